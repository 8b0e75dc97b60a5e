"""Growth bounds of sampled systems and their predictor-term form.

A growth bound beta(r, u) = exp(L tau) r + v over-approximates how far two
trajectories started at most r apart (componentwise) can drift over one
sampling period.  L is essentially nonnegative, v >= 0 collects disturbance
and input effects.  Each bound induces the affine data (A, p) consumed by the
transition predictor: A = I + exp(L tau), p = 2 (A z + v) where z is the
measurement-error vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numat


@dataclass(frozen=True)
class GrowthBound:
    """Growth bound data (L, v) at sampling time tau for one input value."""

    L: np.ndarray
    v: np.ndarray
    tau: float

    def __post_init__(self):
        L = numat.as_square_matrix(self.L, "L")
        if not numat.is_essentially_nonnegative(L):
            raise ValueError("L must be essentially nonnegative")
        v = numat.as_vector(self.v, L.shape[0], "v")
        if np.any(v < 0.0):
            raise ValueError("v must be nonnegative")
        tau = float(self.tau)
        if not (np.isfinite(tau) and tau > 0.0):
            raise ValueError("tau must be a positive real")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "tau", tau)

    @property
    def n(self) -> int:
        return self.L.shape[0]


@dataclass(frozen=True)
class PredictorTerm:
    """Affine data (A, p) of the per-cell transition estimate.

    A is nonnegative with strictly positive diagonal, p is nonnegative.
    """

    A: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        A = numat.as_square_matrix(self.A, "A")
        p = numat.as_vector(self.p, A.shape[0], "p")
        if np.any(A < 0.0):
            raise ValueError("A must be entrywise nonnegative")
        if np.any(np.diag(A) <= 0.0):
            raise ValueError("A must have a strictly positive diagonal")
        if np.any(p < 0.0):
            raise ValueError("p must be nonnegative")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return self.A.shape[0]


def eval_growth(gb: GrowthBound, r) -> np.ndarray:
    """beta(r) = exp(L tau) r + v for a nonnegative radius vector r."""
    r = numat.as_vector(r, gb.n, "r")
    if np.any(r < 0.0):
        raise ValueError("r must be nonnegative")
    return numat.expm(gb.L, gb.tau) @ r + gb.v


def to_predictor_term(gb: GrowthBound, z) -> PredictorTerm:
    """Predictor data A = I + exp(L tau), p = 2 (A z + v)."""
    z = numat.as_vector(z, gb.n, "z")
    if np.any(z < 0.0):
        raise ValueError("z must be nonnegative")
    A = np.eye(gb.n) + numat.expm(gb.L, gb.tau)
    return PredictorTerm(A=A, p=2.0 * (A @ z + gb.v))


def disturbance_offset(L, w, tau: float) -> np.ndarray:
    """v = (integral of exp(L s), s in [0, tau]) w for disturbance magnitude w >= 0."""
    L = numat.as_square_matrix(L, "L")
    if not numat.is_essentially_nonnegative(L):
        raise ValueError("L must be essentially nonnegative")
    w = numat.as_vector(w, L.shape[0], "w")
    if np.any(w < 0.0):
        raise ValueError("w must be nonnegative")
    return numat.integral_expm(L, tau) @ w


def check_growth_monotone(gb: GrowthBound, trials: int = 200, seed: int = 0) -> bool:
    """Sampled monotonicity check: r' <= r implies beta(r') <= beta(r).

    Includes the canonical witness pairs (e_j, 0), which detect any negative
    entry of exp(L tau) deterministically; the remainder are random pairs.
    Serves as a self-check on the exponential kernel's positivity.
    """
    W = numat.expm(gb.L, gb.tau)
    n = gb.n

    def beta(r):
        return W @ r + gb.v

    for j in range(n):
        if np.any(beta(np.eye(n)[j]) < beta(np.zeros(n))):
            return False
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        r = rng.uniform(0.0, 2.0, n)
        rp = r * rng.uniform(0.0, 1.0, n)
        if np.any(beta(rp) > beta(r) + 1e-12):
            return False
    return True
