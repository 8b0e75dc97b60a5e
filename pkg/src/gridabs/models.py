"""Model registry: named plants with inputs, growth bounds, and disturbances.

Each builder turns a declarative ModelSpec into a Plant whose vector field is
vectorized over leading batch axes.  Growth matrices are derived where the
dynamics permit (linear, decoupled) and must be supplied for the pendulum
model; the offset v always follows from the disturbance magnitude w unless
given explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from . import numat
from .abstraction import Plant
from .growth import GrowthBound, disturbance_offset


@dataclass(frozen=True)
class ModelSpec:
    """Declarative description of a plant instance.

    ``inputs`` is either an explicit list of input values or a mapping
    {"linspace": [[lo, hi, count], ...]} whose cartesian product (first axis
    slowest) forms the input set.  ``growth_L`` optionally overrides the
    derived growth matrices (one matrix, or one per input); ``growth_v``
    overrides the disturbance offset.
    """

    name: str
    params: dict
    inputs: object
    tau: float
    w: object = None
    z: object = None
    growth_L: object = None
    growth_v: object = None


def _resolve_inputs(spec_inputs) -> list[np.ndarray]:
    if isinstance(spec_inputs, dict):
        axes_spec = spec_inputs.get("linspace")
        if axes_spec is None:
            raise ValueError("inputs mapping must carry a 'linspace' entry")
        axes = []
        for lo, hi, count in axes_spec:
            count = int(count)
            if count < 1:
                raise ValueError("linspace count must be >= 1")
            axes.append(np.linspace(float(lo), float(hi), count))
        return [np.array(combo, dtype=float) for combo in product(*axes)]
    out = []
    for u in spec_inputs:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if u.ndim != 1 or not np.all(np.isfinite(u)):
            raise ValueError("each input must be a finite scalar or vector")
        out.append(u)
    if len(out) == 0:
        raise ValueError("at least one input value is required")
    if len({u.size for u in out}) != 1:
        raise ValueError("all input values must share one dimension")
    return out


def linear_growth_matrix(M) -> np.ndarray:
    """Essentially nonnegative majorant of M: diagonal kept, |off-diagonal|."""
    M = numat.as_square_matrix(M, "M")
    L = np.abs(M)
    np.fill_diagonal(L, np.diag(M))
    return L


def linear_flow_map(M, B, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact discrete flow (Ad, Bd) of dx = M x + B u: x+ = Ad x + Bd u."""
    M = numat.as_square_matrix(M, "M")
    B = np.asarray(B, dtype=float)
    return numat.expm(M, tau), numat.integral_expm(M, tau) @ B


def _weights(spec: ModelSpec, n: int) -> np.ndarray:
    if spec.w is None:
        return np.zeros(n)
    w = numat.as_vector(spec.w, n, "w")
    if np.any(w < 0.0):
        raise ValueError("w must be nonnegative")
    return w


def _growth_bounds(spec: ModelSpec, derived_L, n: int, num_inputs: int) -> tuple:
    tau = float(spec.tau)
    w = _weights(spec, n)
    if spec.growth_L is not None:
        raw = np.asarray(spec.growth_L, dtype=float)
        if raw.ndim == 2:
            mats = [raw] * num_inputs
        elif raw.ndim == 3 and raw.shape[0] == num_inputs:
            mats = list(raw)
        else:
            raise ValueError("growth_L must be one matrix or one matrix per input")
    elif derived_L is not None:
        mats = [derived_L] * num_inputs
    else:
        raise ValueError(f"model '{spec.name}' needs growth_L in its configuration")
    bounds = []
    for L in mats:
        if spec.growth_v is not None:
            v = numat.as_vector(spec.growth_v, n, "growth_v")
        elif np.any(w > 0.0):
            v = disturbance_offset(L, w, tau)
        else:
            v = np.zeros(n)
        bounds.append(GrowthBound(L=L, v=v, tau=tau))
    return tuple(bounds)


def _build_linear(spec: ModelSpec) -> Plant:
    M = numat.as_square_matrix(spec.params["M"], "M")
    n = M.shape[0]
    B = np.asarray(spec.params["B"], dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    if B.shape[0] != n:
        raise ValueError("B must have one row per state dimension")
    inputs = _resolve_inputs(spec.inputs)
    if inputs[0].size != B.shape[1]:
        raise ValueError("input dimension must match the columns of B")

    def rhs(x, u):
        return x @ M.T + B @ u

    growth = _growth_bounds(spec, linear_growth_matrix(M), n, len(inputs))
    return Plant(
        name="linear",
        n=n,
        inputs=tuple(inputs),
        rhs=rhs,
        growth=growth,
        tau=float(spec.tau),
        w=_weights(spec, n),
        params={"M": M, "B": B},
    )


def _build_decoupled(spec: ModelSpec) -> Plant:
    a = numat.as_vector(spec.params["a"], None, "a")
    n = a.size
    inputs = _resolve_inputs(spec.inputs)
    if inputs[0].size != n:
        raise ValueError("decoupled inputs must be state-dimension vectors")

    def rhs(x, u):
        return a * x + u

    growth = _growth_bounds(spec, np.diag(a), n, len(inputs))
    return Plant(
        name="decoupled",
        n=n,
        inputs=tuple(inputs),
        rhs=rhs,
        growth=growth,
        tau=float(spec.tau),
        w=_weights(spec, n),
        params={"a": a},
    )


# Fixture defaults for the pendulum-on-cart benchmark; masses in kg, lengths
# in m, inertias in kg m^2.  Override any of them through the params mapping.
_PENDULUM_DEFAULTS = {
    "m1": 0.2,
    "m2": 0.15,
    "l1": 0.25,
    "l2": 0.25,
    "L1": 0.5,
    "J1": 0.2 * 0.5 ** 2 / 12.0,
    "J2": 0.15 * 0.5 ** 2 / 12.0,
    "d1": 0.0,
    "d2": 0.0,
    "gravity": 9.81,
}


def _build_double_pendulum_cart(spec: ModelSpec) -> Plant:
    p = dict(_PENDULUM_DEFAULTS)
    p.update(spec.params or {})
    th1 = p["J1"] + p["m1"] * p["l1"] ** 2 + p["m2"] * p["L1"] ** 2
    th2 = p["J2"] + p["m2"] * p["l2"] ** 2
    hc = p["m2"] * p["L1"] * p["l2"]
    k1 = p["m1"] * p["l1"] + p["m2"] * p["L1"]
    k2 = p["m2"] * p["l2"]
    d1, d2, grav = p["d1"], p["d2"], p["gravity"]
    inputs = _resolve_inputs(spec.inputs)
    if inputs[0].size != 1:
        raise ValueError("double_pendulum_cart takes a scalar cart acceleration input")

    def rhs(x, u):
        # state (phi1, phi2, omega1, omega2), angles from the upright vertical
        phi1, phi2 = x[..., 0], x[..., 1]
        om1, om2 = x[..., 2], x[..., 3]
        acc = u[0]
        cd = np.cos(phi1 - phi2)
        sd = np.sin(phi1 - phi2)
        b1 = (
            grav * k1 * np.sin(phi1)
            - k1 * acc * np.cos(phi1)
            - hc * sd * om2 ** 2
            - d1 * om1
            + d2 * (om2 - om1)
        )
        b2 = (
            grav * k2 * np.sin(phi2)
            - k2 * acc * np.cos(phi2)
            + hc * sd * om1 ** 2
            - d2 * (om2 - om1)
        )
        det = th1 * th2 - (hc * cd) ** 2
        dom1 = (th2 * b1 - hc * cd * b2) / det
        dom2 = (th1 * b2 - hc * cd * b1) / det
        return np.stack([om1, om2, dom1, dom2], axis=-1)

    growth = _growth_bounds(spec, None, 4, len(inputs))
    return Plant(
        name="double_pendulum_cart",
        n=4,
        inputs=tuple(inputs),
        rhs=rhs,
        growth=growth,
        tau=float(spec.tau),
        w=_weights(spec, 4),
        params=p,
    )


_REGISTRY = {
    "linear": _build_linear,
    "decoupled": _build_decoupled,
    "double_pendulum_cart": _build_double_pendulum_cart,
}


def lookup(spec: ModelSpec) -> Plant:
    """Build the plant named by the spec; unknown names raise ValueError."""
    builder = _REGISTRY.get(spec.name)
    if builder is None:
        known = ", ".join(sorted(_REGISTRY))
        raise ValueError(f"unknown model '{spec.name}' (known: {known})")
    tau = float(spec.tau)
    if not (math.isfinite(tau) and tau > 0.0):
        raise ValueError("tau must be a positive real")
    return builder(spec)
