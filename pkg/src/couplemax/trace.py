"""Iterate records shared by the solvers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

Array = np.ndarray


@dataclass(frozen=True)
class IterateState:
    """Current primal-dual point plus the schedule values that produced it."""

    x: Array
    y: Array
    lam: Array
    k: int
    schedule: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class TraceRow:
    k: int
    x_norm: float
    y_norm: float
    lam_norm: float
    grad_norm: float
    max_violation: float
    potential: float | None
    potential_trusted: bool
    schedule: dict[str, float]
    x: Array
    y: Array
    lam: Array


class SolveTrace:
    """Append-only row store; an optional sink sees each row as it lands."""

    def __init__(self, sink=None):
        self.rows: list[TraceRow] = []
        self._sink = sink

    def append(self, row: TraceRow):
        self.rows.append(row)
        if self._sink is not None:
            self._sink(row)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)


@dataclass(frozen=True)
class SolveResult:
    final: IterateState
    trace: SolveTrace
    converged: bool
    iterations_used: int
    first_hit: int | None

    @property
    def final_grad_norm(self) -> float:
        return self.trace.rows[-1].grad_norm if self.trace.rows else math.inf


def first_hit_iteration(trace: SolveTrace, eps: float) -> int | None:
    """First recorded iteration whose measure norm is at most eps."""
    for row in trace:
        if row.grad_norm <= eps:
            return row.k
    return None
