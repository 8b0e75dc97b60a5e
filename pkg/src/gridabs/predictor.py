"""Transition-count prediction for hyper-rectangle abstractions.

The per-(cell, input) estimate is

    E(eta) = prod_i (1 / eta_i) (p_i + (A eta)_i),

the expected number of grid cells met by a box of half-width r' = (p + A eta)/2
whose center is uniformly distributed within one cell.  Summing over inputs and
multiplying by the number of cells predicts the size of an abstraction before
it is built.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from .growth import PredictorTerm
from .numat import as_vector

# Monte Carlo sampling is chunked to bound memory at large sample counts.
_MC_CHUNK = 1 << 18


def validate_eta(eta, n: int | None = None) -> np.ndarray:
    eta = as_vector(eta, n, "eta")
    if np.any(eta <= 0.0):
        raise ValueError("eta must be strictly positive")
    return eta


def predict_single(term: PredictorTerm, eta) -> float:
    """Expected transitions per (cell, input) pair for one predictor term."""
    eta = validate_eta(eta, term.n)
    return float(np.prod((term.p + term.A @ eta) / eta))


def predict_family(terms: Sequence[PredictorTerm], eta) -> float:
    """Sum of predict_single over all input terms (expected successors per cell)."""
    if len(terms) == 0:
        raise ValueError("need at least one predictor term")
    eta = validate_eta(eta, terms[0].n)
    return float(sum(predict_single(t, eta) for t in terms))


def predict_abstraction_total(terms: Sequence[PredictorTerm], eta, num_cells: int) -> float:
    """Predicted total transition count of the abstraction."""
    num_cells = int(num_cells)
    if num_cells < 1:
        raise ValueError("num_cells must be >= 1")
    return num_cells * predict_family(terms, eta)


def exact_expected_cells(eta, r) -> float:
    """prod_i 2 r_i / eta_i: expected cells met by a box of half-width r.

    Exact for a box center uniformly distributed within one grid cell.
    """
    eta = validate_eta(eta)
    r = as_vector(r, eta.size, "r")
    if np.any(r <= 0.0):
        raise ValueError("r must be strictly positive")
    return float(np.prod(2.0 * r / eta))


def mc_expected_cells(eta, r, samples: int, seed: int) -> float:
    """Monte Carlo estimate of the expected cell count.

    Draws centers c with c_i uniform on [0, eta_i) and counts lattice cells
    whose closed extent meets [c - r, c + r] per dimension:
    floor((c_i + r_i)/eta_i) - ceil((c_i - r_i)/eta_i) + 1.

    The generator is numpy's default PCG64 seeded with ``seed``; results are
    bit-reproducible for a fixed seed, and independent streams can be split
    off via seed arithmetic.
    """
    eta = validate_eta(eta)
    r = as_vector(r, eta.size, "r")
    if np.any(r <= 0.0):
        raise ValueError("r must be strictly positive")
    samples = int(samples)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    total = 0.0
    left = samples
    while left > 0:
        m = min(left, _MC_CHUNK)
        c = rng.random((m, eta.size)) * eta
        counts = np.floor((c + r) / eta) - np.ceil((c - r) / eta) + 1.0
        total += float(np.sum(np.prod(counts, axis=1)))
        left -= m
    return total / samples
