"""Training data: (instance, prediction) rows collected from the black box."""

from __future__ import annotations

from typing import Iterator

from veritest.schema import DatasetSchema, Instance, Prediction, validate_instance, validate_prediction


class LabeledSet:
    """Append-only rows of (instance, black-box prediction).

    Duplicate instances are skipped on add, so the set grows strictly with
    genuinely new inputs; rows are never removed within a run.
    """

    def __init__(self, schema: DatasetSchema) -> None:
        self.schema = schema
        self.rows: list[tuple[Instance, Prediction]] = []
        self._index: dict[Instance, Prediction] = {}

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[tuple[Instance, Prediction]]:
        return iter(self.rows)

    def __contains__(self, x: Instance) -> bool:
        return x in self._index

    def add(self, x: Instance, z: Prediction) -> bool:
        """Append one row; returns False (and keeps the old row) on duplicate x."""
        problems = validate_instance(self.schema, x) + validate_prediction(self.schema, z)
        if problems:
            raise ValueError(f"row does not fit schema: {problems[0]}")
        if x in self._index:
            return False
        self.rows.append((x, z))
        self._index[x] = z
        return True

    def extend(self, rows: Iterator[tuple[Instance, Prediction]] | list) -> int:
        """Add many rows; returns how many were new."""
        return sum(1 for x, z in rows if self.add(x, z))
