"""Black-box access to the model under test.

A :class:`ModelUnderTest` wraps either an in-process toy model (constant,
rule list, or lookup table) or an external child process spoken to over a
line protocol.  Predictions are cached per exact instance, so repeated
queries for the same input never hit the backing model twice.

Wire protocol (newline-delimited UTF-8 on the child's stdin/stdout)::

    harness -> model:  INIT
    model  -> harness: READY <m>
    harness -> model:  PREDICT v1,v2,...,vn    decimal literals, <= 9
                                               fractional digits
    model  -> harness: CLASS c1,c2,...,cm      integer class codes
    harness -> model:  SHUTDOWN

Any other reply line is a protocol violation.
"""

from __future__ import annotations

import os
import select
import shlex
import subprocess
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

from veritest.propdsl.ast import ConditionAst, contains_predict, eval_condition, instance_vars_of
from veritest.schema import (
    DatasetSchema,
    Instance,
    Prediction,
    format_rational,
    round_half_away,
    validate_instance,
    validate_prediction,
)

WIRE_DIGITS = 9
DEFAULT_TIMEOUT = 10.0


class OracleError(RuntimeError):
    """External process failure, protocol violation, or invalid reply."""


@dataclass(frozen=True)
class ConstantModel:
    """Predicts the same classes for every input."""

    z: Prediction


@dataclass(frozen=True)
class RuleModel:
    """First matching feature condition wins; ``default`` otherwise.

    Rule conditions are feature-only (no model outputs) and reference at
    most one instance variable, which stands for the input being judged.
    """

    rules: tuple[tuple[ConditionAst, Prediction], ...]
    default: Prediction

    def __post_init__(self) -> None:
        for cond, _ in self.rules:
            if contains_predict(cond):
                raise ValueError("rule conditions must be feature-only")
            if len(instance_vars_of(cond)) > 1:
                raise ValueError("rule conditions must use a single instance variable")


@dataclass(frozen=True)
class TableModel:
    """Exhaustive instance -> prediction lookup over a discrete space."""

    table: tuple[tuple[Instance, Prediction], ...]

    def lookup(self, x: Instance) -> Prediction:
        for key, value in self.table:
            if key == x:
                return value
        raise OracleError(f"instance {x.values} missing from model table")


BuiltinModel = Union[ConstantModel, RuleModel, TableModel]


def wire_format(value: Fraction) -> str:
    """Format one feature value for the wire; must fit 9 fractional digits."""
    if value.denominator > 10**WIRE_DIGITS or 10**WIRE_DIGITS % value.denominator:
        raise OracleError(
            f"value {value} is not representable with {WIRE_DIGITS} fractional digits"
        )
    return format_rational(value)


def wire_round(x: Instance) -> Instance:
    """Quantize an instance onto the wire grid (9 decimal places)."""
    return Instance(tuple(round_half_away(v, WIRE_DIGITS) for v in x.values))


class _ExternalProcess:
    """Child process handle implementing the line protocol."""

    def __init__(self, command: str, timeout: float) -> None:
        self.command = command
        self.timeout = timeout
        self.buffer = bytearray()
        try:
            self.proc = subprocess.Popen(
                shlex.split(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
            )
        except OSError as exc:
            raise OracleError(f"cannot start model process {command!r}: {exc}") from exc

    def send(self, line: str) -> None:
        assert self.proc.stdin is not None
        try:
            self.proc.stdin.write((line + "\n").encode())
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise OracleError(f"model process died while sending {line!r}") from exc

    def recv(self, request: str) -> str:
        assert self.proc.stdout is not None
        fd = self.proc.stdout.fileno()
        while True:
            newline = self.buffer.find(b"\n")
            if newline >= 0:
                line = self.buffer[:newline].decode("utf-8", "replace").strip()
                del self.buffer[: newline + 1]
                return line
            ready, _, _ = select.select([fd], [], [], self.timeout)
            if not ready:
                raise OracleError(f"model timed out after {self.timeout}s on request {request!r}")
            chunk = os.read(fd, 65536)
            if not chunk:
                raise OracleError(f"model process closed its output on request {request!r}")
            self.buffer.extend(chunk)

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self.send("SHUTDOWN")
                if self.proc.stdin is not None:
                    self.proc.stdin.close()
            except OracleError:
                pass
            try:
                self.proc.wait(timeout=2.0)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()


class ModelUnderTest:
    """Uniform prediction interface over builtin and external backends."""

    def __init__(self, backend: Union[BuiltinModel, _ExternalProcess], schema: DatasetSchema):
        self.backend = backend
        self.schema = schema
        self.query_count = 0
        self.cache: dict[Instance, Prediction] = {}

    def predict(self, xs: Sequence[Instance]) -> list[Prediction]:
        """Predict a batch of instances, positionally.

        Repeated calls with the same instance return the cached prediction,
        so a deterministic backend stays deterministic even over the wire.
        ``query_count`` grows by the batch size on every call.
        """
        out: list[Prediction] = []
        for x in xs:
            problems = validate_instance(self.schema, x)
            if problems:
                raise ValueError(f"instance does not fit schema: {problems[0]}")
            cached = self.cache.get(x)
            if cached is None:
                cached = self._query(x)
                issues = validate_prediction(self.schema, cached)
                if issues:
                    raise OracleError(f"model returned invalid prediction: {issues[0]}")
                self.cache[x] = cached
            out.append(cached)
        self.query_count += len(xs)
        return out

    def predict_one(self, x: Instance) -> Prediction:
        return self.predict([x])[0]

    def _query(self, x: Instance) -> Prediction:
        backend = self.backend
        if isinstance(backend, ConstantModel):
            return backend.z
        if isinstance(backend, RuleModel):
            for cond, z in backend.rules:
                names = instance_vars_of(cond)
                bound = {names[0]: x} if names else {}
                if eval_condition(cond, bound, {}):
                    return z
            return backend.default
        if isinstance(backend, TableModel):
            return backend.lookup(x)
        request = "PREDICT " + ",".join(wire_format(v) for v in x.values)
        backend.send(request)
        reply = backend.recv(request)
        prefix, _, payload = reply.partition(" ")
        if prefix != "CLASS":
            raise OracleError(f"protocol violation: sent {request!r}, got {reply!r}")
        try:
            codes = tuple(int(tok.strip()) for tok in payload.split(","))
        except ValueError:
            raise OracleError(f"protocol violation: sent {request!r}, got {reply!r}") from None
        if len(codes) != self.schema.l_size:
            raise OracleError(
                f"label-count mismatch: sent {request!r}, got {len(codes)} classes, "
                f"expected {self.schema.l_size}"
            )
        return Prediction(codes)

    def close(self) -> None:
        if isinstance(self.backend, _ExternalProcess):
            self.backend.close()

    def __enter__(self) -> "ModelUnderTest":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()


def builtin_mut(model: BuiltinModel, schema: DatasetSchema) -> ModelUnderTest:
    """Wrap an in-process toy model."""
    return ModelUnderTest(model, schema)


def spawn_external(command: str, schema: DatasetSchema, timeout: float = DEFAULT_TIMEOUT) -> ModelUnderTest:
    """Start an external model process and complete the INIT handshake.

    Raises:
        OracleError: process fails to start, handshake malformed, or the
            advertised label count differs from the schema's.
    """
    proc = _ExternalProcess(command, timeout)
    try:
        proc.send("INIT")
        reply = proc.recv("INIT")
        parts = reply.split()
        if len(parts) != 2 or parts[0] != "READY" or not parts[1].isdigit():
            raise OracleError(f"handshake failure: sent 'INIT', got {reply!r}")
        m = int(parts[1])
        if m != schema.l_size:
            raise OracleError(f"label-count mismatch: model has {m}, schema has {schema.l_size}")
    except OracleError:
        proc.close()
        raise
    return ModelUnderTest(proc, schema)


def predict(mut: ModelUnderTest, xs: Sequence[Instance]) -> list[Prediction]:
    """Operation-style alias for :meth:`ModelUnderTest.predict`."""
    return mut.predict(xs)
