"""Admissible Lagrangians ``L(t, x, v_1, ..., v_n)`` over named slots."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from fracembed.symbolic import (
    Expr,
    SymbolTable,
    diff,
    evaluate,
    free_vars,
    is_real_tree,
    parse,
    substitute,
)

__all__ = ["LagrangianSpec", "HigherLagrangianSpec"]


@dataclass(frozen=True, eq=False)
class LagrangianSpec:
    """A Lagrangian of order ``n`` on ``d`` components.

    ``velocities[i][c]`` names the slot fed with the ``(i+1)``-th operator
    power of component ``c``. Parameter values are substituted at
    construction, so ``expr`` only mentions time and state slots.
    """

    expr: Expr
    positions: tuple[str, ...]
    velocities: tuple[tuple[str, ...], ...]
    time: str | None = "t"

    def __post_init__(self) -> None:
        object.__setattr__(self, "positions", tuple(self.positions))
        object.__setattr__(self, "velocities", tuple(tuple(r) for r in self.velocities))
        if not self.velocities:
            raise ValueError("a Lagrangian needs at least one velocity slot row")
        d = len(self.positions)
        if d == 0 or any(len(r) != d for r in self.velocities):
            raise ValueError("each velocity row must have one slot per position")
        extra = free_vars(self.expr) - set(self.slot_names)
        if extra:
            raise ValueError(f"Lagrangian refers to undeclared slots {sorted(extra)}")
        if not is_real_tree(self.expr):
            raise ValueError("admissible Lagrangians must have real coefficients")

    @classmethod
    def from_string(
        cls,
        text: str,
        positions: Sequence[str] = ("x",),
        velocities: Sequence[Sequence[str]] | Sequence[str] = ("v",),
        *,
        time: str | None = "t",
        parameters: Mapping[str, float] | None = None,
    ) -> LagrangianSpec:
        """Parse ``text``; a flat ``velocities`` list means order 1."""
        vel = [list(velocities)] if velocities and isinstance(velocities[0], str) else [
            list(r) for r in velocities
        ]
        params = dict(parameters or {})
        roles: dict = {"position": list(positions)}
        if time is not None:
            roles["time"] = [time]
        table = SymbolTable.build(
            parameters=params, velocity=[n for row in vel for n in row], **roles
        )
        e = parse(text, table)
        if params:
            e = substitute(e, params)
        return cls(e, tuple(positions), tuple(tuple(r) for r in vel), time)

    @property
    def dim(self) -> int:
        return len(self.positions)

    @property
    def order(self) -> int:
        return len(self.velocities)

    @property
    def slot_names(self) -> tuple[str, ...]:
        names = list(self.positions) + [n for r in self.velocities for n in r]
        return tuple(([self.time] if self.time else []) + names)

    @property
    def slots(self) -> tuple[tuple[str, ...], ...]:
        """Slot rows by operator power: ``slots[0]`` = positions, ``slots[i]`` = v_i."""
        return (self.positions,) + self.velocities

    @cached_property
    def dL_dx(self) -> tuple[Expr, ...]:
        return tuple(diff(self.expr, n) for n in self.positions)

    @cached_property
    def dL_dv(self) -> tuple[tuple[Expr, ...], ...]:
        return tuple(tuple(diff(self.expr, n) for n in row) for row in self.velocities)

    def bindings(self, t: np.ndarray, z: np.ndarray) -> dict:
        """Map slot names to samples; ``z`` has shape ``(order+1, d, m)``."""
        z = np.asarray(z)
        b = {}
        if self.time:
            b[self.time] = t
        for i, row in enumerate(self.slots):
            for c, name in enumerate(row):
                b[name] = z[i, c]
        return b

    def eval_on(self, e: Expr, t: np.ndarray, z: np.ndarray) -> np.ndarray:
        out = evaluate(e, self.bindings(t, z))
        return np.broadcast_to(np.asarray(out, dtype=np.complex128), np.shape(t)).copy()

    def is_quadratic(self) -> bool:
        """True when every second derivative in the state slots is constant."""
        names = [n for row in self.slots for n in row]
        for a in names:
            da = diff(self.expr, a)
            for b in names:
                if free_vars(diff(da, b)):
                    return False
        return True


HigherLagrangianSpec = LagrangianSpec
