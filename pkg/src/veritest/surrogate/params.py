"""Training hyperparameters for both white-box kinds."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class TrainParams:
    """Knobs for decision-tree and network training.

    Tree fields: ``max_depth``, ``min_leaf``, ``criterion`` (gini only).
    Network fields: ``hidden`` layer widths, ``epochs``, ``learning_rate``,
    ``batch_size`` and the RNG ``seed``.
    """

    max_depth: int = 8
    min_leaf: int = 2
    criterion: str = "gini"
    hidden: tuple[int, ...] = (10, 10)
    epochs: int = 80
    learning_rate: float = 0.1
    batch_size: int = 16
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_depth < 1 or self.min_leaf < 1:
            raise ValueError("tree sizes must be positive")
        if self.criterion != "gini":
            raise ValueError(f"unsupported split criterion {self.criterion!r}")
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise ValueError("hidden layer widths must be positive")
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("training parameters must be positive")
