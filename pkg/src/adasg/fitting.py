"""Least-squares estimation of anisotropic decay parameters from expansion
coefficients or hierarchical surpluses.

The regression model is log|c_nu| ~ -(C + alpha . nu + beta . log(nu + 1)).
Dimensions without enough distinct degree values to separate their columns are
excluded from the design and assigned conservative parameters afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rules1d
from .multiindex import MultiIndex, graded_lex_key

DEFAULT_MIN_MAGNITUDE = 1e-14


class UnfittableError(RuntimeError):
    """Raised when the data cannot support the regression; callers fall back."""


@dataclass(frozen=True)
class FitParams:
    """Estimated decay rates and bookkeeping of repairs applied to them."""

    alpha: tuple[float, ...]
    beta: tuple[float, ...]
    c_const: float
    corrected_dims: frozenset[int] = frozenset()
    excluded_dims: frozenset[int] = frozenset()
    residual: float = 0.0
    n_used: int = 0

    def __post_init__(self):
        if self.corrected_dims & self.excluded_dims:
            raise ValueError("corrected and excluded dimensions must be disjoint")
        if any(not (a > 0.0) for a in self.alpha):
            raise ValueError("alpha entries must be positive after correction")

    @property
    def dim(self) -> int:
        return len(self.alpha)


def isotropic_params(d: int) -> FitParams:
    """The fallback used before any fit succeeds: alpha = 1, beta = 0."""
    return FitParams((1.0,) * d, (0.0,) * d, 0.0)


def adhoc_correction(alpha) -> tuple[tuple[float, ...], frozenset[int]]:
    """Replace non-positive rate entries by the smallest strictly positive one."""
    alpha = [float(a) for a in alpha]
    positive = [a for a in alpha if a > 0.0]
    if not positive:
        raise UnfittableError("no positive decay rate to correct with")
    floor = min(positive)
    corrected = frozenset(k for k, a in enumerate(alpha) if a <= 0.0)
    return tuple(floor if a <= 0.0 else a for a in alpha), corrected


def normalize_alpha(alpha) -> tuple[float, ...]:
    """Scale rates to mean one (reporting only; set membership is scale-bound)."""
    alpha = [float(a) for a in alpha]
    mean = sum(alpha) / len(alpha)
    if not mean > 0.0:
        raise ValueError("mean of alpha must be positive")
    return tuple(a / mean for a in alpha)


def fit_curved(
    coeffs: dict[MultiIndex, float],
    min_magnitude: float = DEFAULT_MIN_MAGNITUDE,
    include_beta: bool = True,
) -> FitParams:
    """Fit (alpha, beta, C) so C + alpha.nu + beta.log(nu+1) tracks -log|c_nu|.

    `min_magnitude` drops coefficients relative to the largest magnitude
    (their logs are dominated by round-off).  With `include_beta` false the
    log columns are masked and beta is pinned to zero.
    """
    if not coeffs:
        raise UnfittableError("no coefficients")
    items = sorted(coeffs.items(), key=lambda kv: graded_lex_key(kv[0]))
    d = len(items[0][0])
    cmax = max(abs(c) for _, c in items)
    if cmax == 0.0 or not math.isfinite(cmax):
        raise UnfittableError("all coefficients are zero or non-finite")
    cut = min_magnitude * cmax
    rows = [(nu, abs(c)) for nu, c in items if abs(c) > cut and abs(c) >= 1e-300]
    if len(rows) < 2 * d + 1:
        raise UnfittableError(f"only {len(rows)} usable coefficients")
    nus = np.array([nu for nu, _ in rows], dtype=float)
    b = -np.log(np.array([c for _, c in rows]))
    min_distinct = 3 if include_beta else 2
    included = [k for k in range(d) if len(set(nus[:, k])) >= min_distinct]
    excluded = frozenset(range(d)) - frozenset(included)
    if not included:
        raise UnfittableError("every dimension is rank-deficient")
    cols = [np.ones(len(rows))]
    cols += [nus[:, k] for k in included]
    if include_beta:
        cols += [np.log(nus[:, k] + 1.0) for k in included]
    A = np.stack(cols, axis=1)
    if np.linalg.matrix_rank(A) < A.shape[1]:
        raise UnfittableError("design matrix is rank-deficient")
    x, *_ = np.linalg.lstsq(A, b, rcond=None)
    c_const = float(x[0])
    alpha_in = x[1:1 + len(included)]
    beta_in = x[1 + len(included):] if include_beta else np.zeros(len(included))
    alpha = [0.0] * d
    beta = [0.0] * d
    for pos, k in enumerate(included):
        alpha[k] = float(alpha_in[pos])
        beta[k] = float(beta_in[pos])
    fitted_included = {k: alpha[k] for k in included}
    pos_values = [a for a in fitted_included.values() if a > 0.0]
    if not pos_values:
        raise UnfittableError("no positive decay rate among included dimensions")
    floor = min(pos_values)
    corrected = frozenset(k for k in included if alpha[k] <= 0.0)
    for k in corrected:
        alpha[k] = floor
    fill = max(alpha[k] for k in included)
    for k in excluded:
        alpha[k] = fill
        beta[k] = 0.0
    residual = float(np.linalg.norm(A @ x - b))
    return FitParams(tuple(alpha), tuple(beta), c_const, corrected, excluded,
                     residual, len(rows))


def fit_surplus(
    surpluses: dict[MultiIndex, float],
    rule: str,
    min_magnitude: float = DEFAULT_MIN_MAGNITUDE,
    include_beta: bool = True,
) -> FitParams:
    """Same regression with hierarchical surpluses as the response.

    Only valid for unit-growth rules (one new node per level), where the
    1-based node index minus one is the polynomial degree.
    """
    if not rules1d.unit_growth(rule):
        raise ValueError(f"surplus fitting requires a unit-growth rule, not {rule!r}")
    shifted = {tuple(v - 1 for v in j): s for j, s in surpluses.items()}
    return fit_curved(shifted, min_magnitude, include_beta)
