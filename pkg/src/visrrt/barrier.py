"""Control barrier functions of arbitrary relative degree.

A barrier is described by its *Lie jet* at a state: the drift derivatives
``L_f^k h`` for ``k = 0..r`` and the input rows ``L_g L_f^k h`` for
``k = 0..r-1``. With linear class-K functions every level of the series

    psi_0 = h,    psi_i = d/dt psi_{i-1} + gamma_i psi_{i-1}

is a fixed linear combination of the jet entries, so the whole series,
including the affine-in-u last level used as a QP row, follows from one
jet evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

# Slack on every psi >= 0 test and on the relative-degree check.
TOL = 1e-9


class RelativeDegreeError(ValueError):
    """The input reaches a level of the series below the declared degree."""


@dataclass(frozen=True)
class ClassK:
    gamma: float = 1.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("class-K gain must be positive")

    def __call__(self, s):
        return self.gamma * s


@dataclass(frozen=True)
class BarrierSpec:
    """Barrier ``h`` of relative degree ``r``.

    ``jet(x)`` returns ``(lf, lg)`` with ``lf`` of length ``r + 1`` and
    ``lg`` of shape ``(r, m)``.
    """

    jet: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    relative_degree: int
    alphas: tuple[ClassK, ...] = field(default=())
    name: str = "h"

    def __post_init__(self):
        if self.relative_degree < 1:
            raise ValueError("relative degree must be >= 1")
        alphas = tuple(self.alphas) or (ClassK(),) * self.relative_degree
        if len(alphas) != self.relative_degree:
            raise ValueError(f"need {self.relative_degree} class-K functions, got {len(alphas)}")
        object.__setattr__(self, "alphas", alphas)

    def h(self, x) -> float:
        return float(self.jet(x)[0][0])


def series_coefficients(gammas: Sequence[float]) -> list[np.ndarray]:
    """Coefficients of each psi_i over the jet basis ``L_f^0 h .. L_f^i h``."""
    coefs = [np.array([1.0])]
    for g in gammas[:-1]:
        prev = coefs[-1]
        nxt = np.zeros(len(prev) + 1)
        nxt[1:] += prev  # time derivative shifts every L_f^k h to L_f^{k+1} h
        nxt[:-1] += g * prev
        coefs.append(nxt)
    return coefs


@dataclass
class PsiSeries:
    values: np.ndarray  # psi_0 .. psi_{r-1}
    c0: float  # psi_r(u) = c0 + c @ u
    c: np.ndarray
    coefs: list
    lf: np.ndarray
    lg: np.ndarray

    @property
    def relative_degree(self) -> int:
        return len(self.values)

    def last(self, u) -> float:
        return float(self.c0 + self.c @ np.asarray(u, dtype=float))

    def dot(self, i: int, u) -> float:
        """Time derivative of psi_i under input ``u``."""
        k = self.coefs[i]
        n = len(k)
        return float(k @ self.lf[1 : n + 1] + (k @ self.lg[:n]) @ np.asarray(u, dtype=float))


def eval_psi_series(spec: BarrierSpec, x) -> PsiSeries:
    r = spec.relative_degree
    lf, lg = spec.jet(x)
    lf = np.asarray(lf, dtype=float)
    lg = np.atleast_2d(np.asarray(lg, dtype=float))
    if lf.shape[0] != r + 1 or lg.shape[0] != r:
        raise ValueError(f"jet of {spec.name} does not match relative degree {r}")
    gammas = [a.gamma for a in spec.alphas]
    coefs = series_coefficients(gammas)
    for i in range(r - 1):
        lg_psi = coefs[i] @ lg[: i + 1]
        if np.max(np.abs(lg_psi)) > TOL:
            raise RelativeDegreeError(
                f"{spec.name}: input appears at level {i} (|L_g psi_{i}| = {np.max(np.abs(lg_psi)):.3g}), "
                f"declared relative degree {r} is too high"
            )
    values = np.array([k @ lf[: len(k)] for k in coefs])
    top = coefs[-1]
    c0 = float(top @ lf[1 : r + 1] + gammas[-1] * values[-1])
    c = top @ lg[:r]
    return PsiSeries(values=values, c0=c0, c=c, coefs=coefs, lf=lf, lg=lg)


def admissible(spec: BarrierSpec, x, u) -> bool:
    """Whether ``u`` satisfies the last level of the series at ``x``."""
    return eval_psi_series(spec, x).last(u) >= -TOL


def in_set_intersection(spec: BarrierSpec, x) -> bool:
    """Whether ``x`` lies in every zero-superlevel set psi_0..psi_{r-1} >= 0."""
    return bool(np.all(eval_psi_series(spec, x).values >= -TOL))


def max_margin_input(series: PsiSeries, u_low, u_high) -> np.ndarray:
    """Box corner maximizing the last level; used to test feasibility."""
    return np.where(series.c >= 0, u_high, u_low).astype(float)
