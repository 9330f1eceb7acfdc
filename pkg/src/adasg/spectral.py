"""Orthonormal Legendre expansion of an interpolant via exact tensor quadrature.

Polynomials are orthonormal with respect to the uniform *probability* measure
on [-1,1]^d (standard Legendre scaled by sqrt(2 nu + 1)), so Parseval checks
are unit-free.  The quadrature is Gauss-Legendre with enough points per
dimension to integrate interpolant-times-basis products exactly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .multiindex import IndexSet, MultiIndex
from .sparse_grid import Interpolant, evaluate_batch


def legendre_1d(nu: int, y):
    """Degree-nu Legendre polynomial, orthonormal under uniform probability."""
    if nu < 0:
        raise ValueError("degree must be >= 0")
    y = np.asarray(y, dtype=float)
    pm, p = np.zeros_like(y), np.ones_like(y)
    for j in range(nu):
        pm, p = p, ((2 * j + 1) * y * p - j * pm) / (j + 1)
    return p * np.sqrt(2 * nu + 1)


def _legendre_matrix(degrees: int, y: np.ndarray) -> np.ndarray:
    """Rows 0..degrees of orthonormal Legendre values at y: shape (degrees+1, len(y))."""
    out = np.empty((degrees + 1, len(y)))
    pm, p = np.zeros_like(y), np.ones_like(y)
    out[0] = p
    for j in range(degrees):
        pm, p = p, ((2 * j + 1) * y * p - j * pm) / (j + 1)
        out[j + 1] = p * np.sqrt(2 * (j + 1) + 1)
    return out


@dataclass
class QuadratureRule:
    """Tensor Gauss-Legendre rule; weights normalized to uniform probability."""

    nodes: list[np.ndarray]    # per dimension
    weights: list[np.ndarray]  # per dimension, each summing to 1

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(len(n) for n in self.nodes)

    def grid(self) -> np.ndarray:
        """All tensor points, shape (prod(counts), d), first axis varying slowest."""
        mesh = np.meshgrid(*self.nodes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)


def quadrature_for(lam: IndexSet) -> QuadratureRule:
    """Per-dimension Gauss-Legendre with n_k = (max degree in dim k) + 1 points.

    Exact for polynomials of degree 2 n_k - 1, which covers products of two
    members of the space.
    """
    if len(lam) == 0:
        raise ValueError("need a nonempty index set")
    nodes, weights = [], []
    for deg in lam.max_degrees():
        x, w = np.polynomial.legendre.leggauss(deg + 1)
        nodes.append(x)
        weights.append(w / 2.0)
    return QuadratureRule(nodes, weights)


@dataclass
class LegendreExpansion:
    """Coefficients of the orthonormal Legendre expansion over an index set."""

    lam: IndexSet
    coeffs: dict[MultiIndex, float]

    def coeff_array(self) -> np.ndarray:
        return np.array([self.coeffs[nu] for nu in self.lam.members])


def legendre_coeffs(interp: Interpolant, lam: IndexSet) -> LegendreExpansion:
    """Expansion coefficients of the interpolant over `lam` by tensor quadrature.

    Uses only interpolant evaluations (one pass over the quadrature grid),
    never the underlying target function.  The rule is sized so that products
    of the interpolant with any requested basis polynomial integrate exactly,
    even when `lam` is smaller than the interpolant's range.
    """
    range_degs = interp.range.max_degrees()
    lam_degs = lam.max_degrees()
    outside = [nu for nu in lam.members if nu not in interp.range]
    if outside:
        warnings.warn(
            f"{len(outside)} requested modes lie outside the interpolant's "
            "range; their coefficients are zero by orthogonality",
            stacklevel=2,
        )
    nodes, weights = [], []
    for k in range(lam.dim):
        x, w = np.polynomial.legendre.leggauss(max(range_degs[k], lam_degs[k]) + 1)
        nodes.append(x)
        weights.append(w / 2.0)
    rule = QuadratureRule(nodes, weights)
    pts = rule.grid()
    vals = evaluate_batch(interp, pts).reshape(rule.counts)
    # fold one dimension at a time: tensor of values -> tensor of coefficients
    curr = vals
    for k in range(lam.dim):
        mat = _legendre_matrix(lam_degs[k], rule.nodes[k]) * rule.weights[k][None, :]
        curr = np.tensordot(mat, curr, axes=([1], [0]))
        # tensordot puts the new (coefficient) axis first; rotate it to the back
        curr = np.moveaxis(curr, 0, lam.dim - 1)
    coeffs = {nu: float(curr[nu]) for nu in lam.members}
    return LegendreExpansion(lam, coeffs)


def write_expansion_csv(exp: LegendreExpansion, path) -> None:
    d = exp.lam.dim
    with open(path, "w", newline="") as fh:
        fh.write(",".join(f"nu_{k + 1}" for k in range(d)) + ",c_hat\n")
        for nu in exp.lam.members:
            fh.write(",".join(str(v) for v in nu) + f",{exp.coeffs[nu]:.17g}\n")
