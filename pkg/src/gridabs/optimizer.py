"""Volume-constrained minimization of the predicted transition count.

In log grid coordinates x = log eta the per-cell prediction becomes

    g(x) = sum_terms exp(-gamma) prod_i (p_i + sum_j A_ij exp(x_j))

restricted to the hyperplane V_gamma = {x : sum_i x_i = gamma}, gamma being
the log cell volume.  g is convex on V_gamma for any nonnegative data and
strictly convex exactly when the positive-entry digraph conditions captured
by ``uniqueness_certificate`` hold.  ``minimize`` runs a projected Newton
method on V_gamma intersected with optional box bounds; ``brute_force_minimize``
is the certification oracle: an exhaustive-equivalent lattice search whose
pruning uses only supporting-hyperplane bounds supplied by convexity.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from . import numat
from .growth import GrowthBound, PredictorTerm, to_predictor_term

UNIQUE_GUARANTEED = "UNIQUE_GUARANTEED"
UNIQUENESS_UNKNOWN = "UNIQUENESS_UNKNOWN"

_ARMIJO = 1e-4
# absolute slack in the sufficient-decrease test; near the optimum the true
# decrease of a polish step drops below the rounding noise of the value and
# would otherwise be rejected, freezing the iterate short of the tolerance
_F_NOISE = 4.0 * np.finfo(float).eps
_MAX_HALVINGS = 60
_DEFAULT_TOL = 1e-10
_DEFAULT_MAX_ITER = 500
# exp arguments beyond this are treated as overflow rather than saturated
_EXP_LIMIT = 700.0
_LEAF_POINTS = 2048


class InfeasibleRegion(ValueError):
    """Constraint set V_gamma intersected with the box is empty."""


class DivergenceError(RuntimeError):
    """Iterates left the representable range; carries a coercivity diagnostic."""


@dataclass(frozen=True)
class Objective:
    """Sum of predictor terms sharing one dimension, evaluated in log coordinates."""

    terms: tuple[PredictorTerm, ...]

    def __post_init__(self):
        terms = tuple(self.terms)
        if len(terms) == 0:
            raise ValueError("objective needs at least one term")
        n = terms[0].n
        if any(t.n != n for t in terms):
            raise ValueError("all terms must share one dimension")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def from_growth(cls, growth_bounds: Sequence[GrowthBound], z) -> "Objective":
        return cls(tuple(to_predictor_term(gb, z) for gb in growth_bounds))

    @property
    def n(self) -> int:
        return self.terms[0].n


@dataclass(frozen=True)
class BoxBounds:
    """Per-coordinate bounds in log grid coordinates; +-inf entries allowed."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.array(self.lower, dtype=float)
        upper = np.array(self.upper, dtype=float)
        if lower.ndim != 1 or lower.shape != upper.shape:
            raise ValueError("lower and upper must be vectors of equal length")
        if np.any(np.isnan(lower)) or np.any(np.isnan(upper)):
            raise ValueError("bounds must not contain NaN")
        if np.any(lower == np.inf) or np.any(upper == -np.inf):
            raise ValueError("lower must not be +inf, upper must not be -inf")
        if not np.all(lower < upper):
            raise ValueError("lower < upper must hold componentwise")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def from_eta(cls, lower_eta, upper_eta) -> "BoxBounds":
        """Bounds given as grid parameters; None entries mean unbounded."""
        lo = [(-np.inf if b is None else math.log(b)) for b in lower_eta]
        up = [(np.inf if b is None else math.log(b)) for b in upper_eta]
        return cls(np.asarray(lo), np.asarray(up))

    @property
    def n(self) -> int:
        return self.lower.size


@dataclass
class Solution:
    x_star: np.ndarray
    eta_star: np.ndarray
    value: float
    iterations: int
    certificate: str
    kkt_residual: float
    converged: bool
    flat_patch: bool = field(default=False)


def _box_arrays(box: BoxBounds | None, n: int) -> tuple[np.ndarray, np.ndarray]:
    if box is None:
        return np.full(n, -np.inf), np.full(n, np.inf)
    if box.n != n:
        raise ValueError(f"box dimension {box.n} does not match objective dimension {n}")
    return box.lower, box.upper


def objective_value(obj: Objective, gamma: float, x) -> float:
    """g(x); raises OverflowError instead of saturating."""
    x = numat.as_vector(x, obj.n, "x")
    gamma = float(gamma)
    total = 0.0
    s = float(np.max(x))
    for term in obj.terms:
        # shift by the largest coordinate so exp never overflows; the strictly
        # positive diagonal keeps every row away from a pure-underflow zero
        with np.errstate(divide="ignore"):
            if s <= 300.0:
                logs = np.log(term.p + term.A @ np.exp(x))
            else:
                logs = s + np.log(term.p * math.exp(-s) + term.A @ np.exp(x - s))
        ls = float(np.sum(logs)) - gamma
        if ls > _EXP_LIMIT:
            raise OverflowError("objective value exceeds the floating-point range")
        total += math.exp(ls)
    return total


def _values_batch(obj: Objective, gamma: float, X: np.ndarray) -> np.ndarray:
    """Vectorized g over rows of X; overflow maps to +inf (search use only)."""
    X = np.asarray(X, dtype=float)
    out = np.zeros(X.shape[0])
    with np.errstate(over="ignore", divide="ignore"):
        E = np.exp(X)
        for term in obj.terms:
            R = E @ term.A.T + term.p
            ls = np.sum(np.log(R), axis=1) - gamma
            out += np.exp(ls)
    return out


def _values_pgrads_batch(obj: Objective, gamma: float, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rowwise (g, ||projected gradient||) for the lattice search.

    The projection is onto the constant-sum hyperplane.  Rows that overflow
    come back as (+inf, 0) so a bound built from them prunes the box.
    """
    X = np.asarray(X, dtype=float)
    vals = np.zeros(X.shape[0])
    G = np.zeros_like(X)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        E = np.exp(X)
        for term in obj.terms:
            R = E @ term.A.T + term.p
            gt = np.exp(np.sum(np.log(R), axis=1) - gamma)
            vals += gt
            G += gt[:, None] * E * ((1.0 / R) @ term.A)
        pg = G - G.mean(axis=1, keepdims=True)
        pgn = np.sqrt(np.sum(pg * pg, axis=1))
    bad = ~(np.isfinite(vals) & np.isfinite(pgn))
    if bad.any():
        vals = np.where(bad, np.inf, vals)
        pgn = np.where(bad, 0.0, pgn)
    return vals, pgn


def objective_gradient(obj: Objective, gamma: float, x) -> np.ndarray:
    x = numat.as_vector(x, obj.n, "x")
    if float(np.max(np.abs(x))) > 340.0:
        raise OverflowError("gradient requested outside the representable range")
    ex = np.exp(x)
    grad = np.zeros(obj.n)
    for term in obj.terms:
        R = term.p + term.A @ ex
        gt = math.exp(float(np.sum(np.log(R))) - float(gamma))
        grad += gt * ex * (term.A.T @ (1.0 / R))
    return grad


def objective_hessian(obj: Objective, gamma: float, x) -> np.ndarray:
    x = numat.as_vector(x, obj.n, "x")
    if float(np.max(np.abs(x))) > 340.0:
        raise OverflowError("hessian requested outside the representable range")
    ex = np.exp(x)
    H = np.zeros((obj.n, obj.n))
    for term in obj.terms:
        R = term.p + term.A @ ex
        u = 1.0 / R
        gt = math.exp(float(np.sum(np.log(R))) - float(gamma))
        gradG = ex * (term.A.T @ u)
        M2 = term.A.T @ (term.A * (u * u)[:, None])
        HG = np.diag(gradG) - np.outer(ex, ex) * M2
        H += gt * (np.outer(gradG, gradG) + HG)
    return 0.5 * (H + H.T)


def project_hyperplane_box(y, gamma: float, box: BoxBounds | None = None) -> np.ndarray:
    """Euclidean projection onto {sum x = gamma} intersected with the box.

    Monotone bisection on the shift multiplier, then an exact solve on the
    free coordinates; the returned point satisfies the bounds and
    |sum x - gamma| <= 1e-12.
    """
    y = numat.as_vector(y, None, "y")
    gamma = float(gamma)
    n = y.size
    if box is None:
        return y + (gamma - float(np.sum(y))) / n
    lo, up = _box_arrays(box, n)
    if not (float(np.sum(lo)) <= gamma <= float(np.sum(up))):
        raise InfeasibleRegion(
            f"no point with coordinate sum {gamma} inside the box (bounds sum to "
            f"[{np.sum(lo)}, {np.sum(up)}])"
        )

    def shifted_sum(lam: float) -> float:
        return float(np.sum(np.clip(y - lam, lo, up)))

    lam = (float(np.sum(y)) - gamma) / n
    step = 1.0
    a = b = lam  # shifted_sum is nonincreasing: want S(a) >= gamma >= S(b)
    for _ in range(200):
        if shifted_sum(a) >= gamma:
            break
        a -= step
        step *= 2.0
    else:
        raise InfeasibleRegion("projection bracket not found")
    step = 1.0
    for _ in range(200):
        if shifted_sum(b) <= gamma:
            break
        b += step
        step *= 2.0
    else:
        raise InfeasibleRegion("projection bracket not found")
    for _ in range(120):
        mid = 0.5 * (a + b)
        if shifted_sum(mid) >= gamma:
            a = mid
        else:
            b = mid
    lam = 0.5 * (a + b)
    x = np.clip(y - lam, lo, up)
    free = (x > lo) & (x < up)
    if free.any():
        clamped_sum = float(np.sum(x[~free]))
        lam_exact = (float(np.sum(y[free])) - (gamma - clamped_sum)) / int(free.sum())
        cand = np.clip(y - lam_exact, lo, up)
        if abs(float(np.sum(cand)) - gamma) <= abs(float(np.sum(x)) - gamma):
            x = cand
        free = (x > lo) & (x < up)
        if free.any():
            x[free] -= (float(np.sum(x)) - gamma) / int(free.sum())
    if abs(float(np.sum(x)) - gamma) > 1e-12:
        raise InfeasibleRegion("projection could not meet the volume constraint")
    return x


def smallest_nonzero_entry(obj: Objective) -> float:
    """Smallest strictly positive entry over all terms' (A, p); 0.0 if none."""
    best = math.inf
    for term in obj.terms:
        for arr in (term.A, term.p):
            pos = arr[arr > 0.0]
            if pos.size:
                best = min(best, float(np.min(pos)))
    return 0.0 if math.isinf(best) else best


def lower_bound_check(obj: Objective, gamma: float, x) -> bool:
    """Coercivity bound g(x) >= mu^n exp(-|gamma| c) exp(c ||x||_inf), c = 1/(n-1).

    Only valid for a single certified term with n >= 2; a slack of 1e-12
    absorbs rounding.
    """
    if len(obj.terms) != 1:
        raise ValueError("lower bound applies to single-term objectives")
    n = obj.n
    if n < 2:
        raise ValueError("lower bound needs n >= 2")
    if uniqueness_certificate(obj) != UNIQUE_GUARANTEED:
        raise ValueError("lower bound requires the uniqueness certificate to hold")
    x = numat.as_vector(x, n, "x")
    mu = smallest_nonzero_entry(obj)
    c = 1.0 / (n - 1)
    bound = mu ** n * math.exp(-abs(float(gamma)) * c) * math.exp(c * float(np.max(np.abs(x))))
    return objective_value(obj, gamma, x) >= bound - 1e-12


def _term_certified(term: PredictorTerm) -> bool:
    return numat.is_irreducible(term.A) or numat.is_irreducible(
        numat.border_with_ones(term.A, term.p)
    )


def uniqueness_certificate(source, z=None) -> str:
    """Certificate that the volume-constrained minimizer is unique.

    Accepts an Objective, a single PredictorTerm, a sequence of terms, or a
    sequence of GrowthBound (then ``z`` is required).  For a single term the
    test (A irreducible or bordered (A, p) irreducible) characterizes strict
    convexity exactly; for families any certified member is sufficient but a
    negative answer proves nothing, hence UNIQUENESS_UNKNOWN.  Growth-bound
    input is additionally screened through the bordered (L, z + Lz + v) route
    before falling back to the induced (A, p) data.
    """
    if isinstance(source, Objective):
        items: Sequence = source.terms
    elif isinstance(source, PredictorTerm):
        items = (source,)
    else:
        items = tuple(source)
        if len(items) == 0:
            raise ValueError("empty certificate input")
    if all(isinstance(it, GrowthBound) for it in items):
        if z is None:
            raise ValueError("growth-bound input needs the measurement-error vector z")
        for gb in items:
            if numat.is_irreducible(gb.L):
                return UNIQUE_GUARANTEED
            if numat.is_irreducible(numat.border_growth_data(gb.L, z, gb.tau, gb.v)):
                return UNIQUE_GUARANTEED
            if _term_certified(to_predictor_term(gb, z)):
                return UNIQUE_GUARANTEED
        return UNIQUENESS_UNKNOWN
    if not all(isinstance(it, PredictorTerm) for it in items):
        raise TypeError("certificate input must be predictor terms or growth bounds")
    if any(_term_certified(t) for t in items):
        return UNIQUE_GUARANTEED
    return UNIQUENESS_UNKNOWN


def certificate_details(growth_bounds: Sequence[GrowthBound], z) -> list[dict]:
    """Per-input irreducibility flags backing the certificate, for reporting."""
    out = []
    for gb in growth_bounds:
        term = to_predictor_term(gb, z)
        out.append(
            {
                "irreducible_L": numat.is_irreducible(gb.L),
                "irreducible_L_bordered": numat.is_irreducible(
                    numat.border_growth_data(gb.L, z, gb.tau, gb.v)
                ),
                "irreducible_A": numat.is_irreducible(term.A),
                "irreducible_A_bordered": numat.is_irreducible(
                    numat.border_with_ones(term.A, term.p)
                ),
            }
        )
    return out


def _divergence(obj: Objective, gamma: float, x: np.ndarray) -> DivergenceError:
    xinf = float(np.max(np.abs(x)))
    msg = f"iterates diverged (||x||_inf = {xinf:.3g})"
    if len(obj.terms) == 1 and obj.n >= 2:
        mu = smallest_nonzero_entry(obj)
        if mu > 0.0:
            c = 1.0 / (obj.n - 1)
            msg += (
                "; coercivity bound mu^n exp(-|gamma| c) exp(c ||x||_inf) = "
                f"{mu ** obj.n * math.exp(-abs(gamma) * c):.3g} * exp({c:.3g} ||x||_inf)"
            )
    return DivergenceError(msg)


def _manifold_basis(k: int) -> np.ndarray:
    """Orthonormal basis of {h in R^k : sum h = 0} as columns, deterministic."""
    e = np.full(k, 1.0 / math.sqrt(k))
    P = np.eye(k) - np.outer(e, e)
    U, s, _ = np.linalg.svd(P)
    return U[:, : k - 1]


def _newton_direction(x, grad, H, lo, up) -> np.ndarray | None:
    """Newton step on the free manifold, or None when nearly singular."""
    n = x.size
    atol = 1e-9
    at_lo = x <= lo + atol
    at_up = x >= up - atol
    free = ~(at_lo | at_up)
    for _ in range(n):
        lam = float(np.mean(grad[free])) if free.any() else float(np.mean(grad))
        release = (at_lo & (grad < lam)) | (at_up & (grad > lam))
        if not release.any():
            break
        free |= release
        at_lo &= ~release
        at_up &= ~release
    k = int(free.sum())
    if k < 2:
        return None
    F = np.flatnonzero(free)
    Z = _manifold_basis(k)
    Hr = Z.T @ H[np.ix_(F, F)] @ Z
    gr = Z.T @ grad[F]
    evals = np.linalg.eigvalsh(Hr)
    if evals[0] <= 1e-12 * max(1.0, float(evals[-1])):
        return None
    d = np.zeros(n)
    d[F] = Z @ np.linalg.solve(Hr, -gr)
    return d


def minimize(
    obj: Objective,
    gamma: float,
    box: BoxBounds | None = None,
    tol: float = _DEFAULT_TOL,
    max_iter: int = _DEFAULT_MAX_ITER,
) -> Solution:
    """Globally minimize g over V_gamma intersected with the box.

    Projected Newton with an Armijo arc search (parameter 1e-4, step halving,
    at most 60 halvings) and a projected-gradient fallback whenever the
    reduced Hessian is near singular.  Terminates when the projected-gradient
    norm drops below tol * max(1, |value|); the iteration cap marks the
    solution as not converged instead of raising.
    """
    gamma = float(gamma)
    n = obj.n
    cert = uniqueness_certificate(obj)
    lo, up = _box_arrays(box, n)
    if n == 1:
        if not (lo[0] <= gamma <= up[0]):
            raise InfeasibleRegion("volume constraint fixes x outside the box")
        x = np.array([gamma])
        return Solution(x, np.exp(x), objective_value(obj, gamma, x), 0, cert, 0.0, True)

    x = project_hyperplane_box(np.full(n, gamma / n), gamma, box)
    try:
        val = objective_value(obj, gamma, x)
    except OverflowError:
        raise _divergence(obj, gamma, x) from None
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        try:
            grad = objective_gradient(obj, gamma, x)
        except OverflowError:
            raise _divergence(obj, gamma, x) from None
        pg = x - project_hyperplane_box(x - grad, gamma, box)
        if float(np.linalg.norm(pg)) <= tol * max(1.0, abs(val)):
            converged = True
            break
        H = objective_hessian(obj, gamma, x)
        stepped = False
        for d in filter(lambda v: v is not None, (_newton_direction(x, grad, H, lo, up), -grad)):
            alpha = 1.0
            for _ in range(_MAX_HALVINGS):
                xt = project_hyperplane_box(x + alpha * d, gamma, box)
                decrease = float(grad @ (xt - x))
                if decrease < 0.0:
                    try:
                        vt = objective_value(obj, gamma, xt)
                    except OverflowError:
                        alpha *= 0.5
                        continue
                    if vt <= val + _ARMIJO * decrease + _F_NOISE * abs(val):
                        x, val = xt, vt
                        stepped = True
                        break
                alpha *= 0.5
            if stepped:
                break
        if not stepped:
            break
    grad = objective_gradient(obj, gamma, x)
    kkt = float(np.linalg.norm(x - project_hyperplane_box(x - grad, gamma, box)))
    if not converged:
        converged = kkt <= tol * max(1.0, abs(val))
    return Solution(x, np.exp(x), val, iterations, cert, kkt, converged)


def _lex_less(a: np.ndarray, b: np.ndarray) -> bool:
    return tuple(a) < tuple(b)


def brute_force_minimize(
    obj: Objective,
    gamma: float,
    box: BoxBounds | None = None,
    resolution: float = 1e-3,
) -> Solution:
    """Lattice search oracle over the patch where the minimizer can live.

    The patch is the coercivity ball ||x||_inf <= R derived from the value at
    the projected analytic center plus one log unit of margin.  Every lattice
    point of spacing ``resolution`` in the patch is either evaluated or
    excluded by a supporting-hyperplane bound (valid by convexity), so the
    result equals a full scan, with lexicographic tie-breaking.  ``iterations``
    reports the number of evaluated points; ``flat_patch`` is set when every
    evaluated value coincides up to 1e-9 relative and nothing was pruned.
    """
    gamma = float(gamma)
    resolution = float(resolution)
    if resolution <= 0.0:
        raise ValueError("resolution must be positive")
    n = obj.n
    cert = uniqueness_certificate(obj)
    lo, up = _box_arrays(box, n)
    if n == 1:
        if not (lo[0] <= gamma <= up[0]):
            raise InfeasibleRegion("volume constraint fixes x outside the box")
        x = np.array([gamma])
        return Solution(x, np.exp(x), objective_value(obj, gamma, x), 1, cert, 0.0, True)
    mu = smallest_nonzero_entry(obj)
    if mu == 0.0:
        raise ValueError("all predictor entries vanish; the patch radius is undefined")
    c = 1.0 / (n - 1)
    x0 = project_hyperplane_box(np.full(n, gamma / n), gamma, box)
    g0 = objective_value(obj, gamma, x0)
    radius = max(0.0, (math.log(g0) - n * math.log(mu) + abs(gamma) * c) / c) + 1.0

    base = x0[: n - 1]
    j_lo = np.empty(n - 1, dtype=np.int64)
    j_hi = np.empty(n - 1, dtype=np.int64)
    for k in range(n - 1):
        a = max(lo[k], -radius)
        b = min(up[k], radius)
        j_lo[k] = math.ceil((a - base[k]) / resolution - 1e-12)
        j_hi[k] = math.floor((b - base[k]) / resolution + 1e-12)
    xn_lo = max(lo[n - 1], -radius) - 1e-12
    xn_hi = min(up[n - 1], radius) + 1e-12

    best_val = math.inf
    best_x: np.ndarray | None = None
    evaluated = 0
    pruned_any = False
    seen_min = math.inf
    seen_max = -math.inf

    def consider(X: np.ndarray, vals: np.ndarray):
        nonlocal best_val, best_x, evaluated, seen_min, seen_max
        evaluated += len(vals)
        finite = np.isfinite(vals)
        if finite.any():
            seen_min = min(seen_min, float(np.min(vals[finite])))
            seen_max = max(seen_max, float(np.max(vals[finite])))
        i = int(np.argmin(vals))
        v = float(vals[i])
        if v < best_val or (v == best_val and best_x is not None and _lex_less(X[i], best_x)):
            best_val = v
            best_x = X[i].copy()

    def scan_lattice(stride: int):
        """Evaluate every feasible lattice point whose indices are on the stride."""
        axes = [np.arange(j_lo[k], j_hi[k] + 1, stride) for k in range(n - 1)]
        J = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n - 1)
        Xf = base + resolution * J
        xn = gamma - np.sum(Xf, axis=1)
        feas = (xn >= xn_lo) & (xn <= xn_hi)
        if feas.any():
            X = np.column_stack([Xf[feas], xn[feas]])
            consider(X, _values_batch(obj, gamma, X))

    if n == 2:
        scan_lattice(1)
    else:
        # seed the incumbent from a coarse sub-lattice so the bound prunes
        # far regions right away; correctness only needs the incumbent to be
        # some feasible lattice value
        span = int(np.prod(np.maximum(j_hi - j_lo + 1, 1)))
        stride = 1
        while span // (stride ** (n - 1)) > (1 << 18):
            stride *= 2
        if stride > 1:
            scan_lattice(stride)
        # breadth-first waves so value and gradient batches amortize the
        # per-point cost; pruning stays sound because each wave's bound uses
        # the incumbent available when the wave starts
        nodes = [(j_lo.copy(), j_hi.copy())]
        while nodes:
            CLO = np.array([a for a, _ in nodes], dtype=np.int64)
            CHI = np.array([b for _, b in nodes], dtype=np.int64)
            counts = CHI - CLO + 1
            keep = np.all(counts > 0, axis=1)
            # boxes whose sum coordinate pins the dependent coordinate outside
            # its bounds hold no feasible point at all
            s_min = base.sum() + resolution * np.sum(CLO, axis=1)
            s_max = base.sum() + resolution * np.sum(CHI, axis=1)
            keep &= (gamma - s_max <= xn_hi) & (gamma - s_min >= xn_lo)
            CLO, CHI, counts = CLO[keep], CHI[keep], counts[keep]
            if CLO.shape[0] == 0:
                break
            MID = base + resolution * 0.5 * (CLO + CHI)
            XC = np.column_stack([MID, gamma - np.sum(MID, axis=1)])
            vals, pgn = _values_pgrads_batch(obj, gamma, XC)
            HALF = resolution * 0.5 * (CHI - CLO)
            hsum = np.sum(HALF, axis=1)
            # the farthest corner is the all-positive one, simultaneously for
            # the free coordinates and the dependent-coordinate deviation
            rho = np.sqrt(np.sum(HALF * HALF, axis=1) + hsum * hsum)
            bound = vals - pgn * rho
            prune = bound > best_val
            if prune.any():
                pruned_any = True
            npts = np.prod(counts.astype(float), axis=1)
            leaf = ~prune & (npts <= _LEAF_POINTS)
            pending: list[np.ndarray] = []
            pending_pts = 0

            def flush():
                nonlocal pending, pending_pts
                if pending:
                    X = np.vstack(pending)
                    consider(X, _values_batch(obj, gamma, X))
                    pending, pending_pts = [], 0

            for a, b in zip(CLO[leaf], CHI[leaf]):
                axes = [np.arange(a[k], b[k] + 1) for k in range(n - 1)]
                J = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n - 1)
                Xf = base + resolution * J
                xn = gamma - np.sum(Xf, axis=1)
                feas = (xn >= xn_lo) & (xn <= xn_hi)
                if feas.any():
                    pending.append(np.column_stack([Xf[feas], xn[feas]]))
                    pending_pts += int(np.count_nonzero(feas))
                    if pending_pts >= (1 << 18):
                        flush()
            flush()
            nodes = []
            for a, b, cnt in zip(CLO[~prune & ~leaf], CHI[~prune & ~leaf], counts[~prune & ~leaf]):
                axis = int(np.argmax(cnt))
                midj = (int(a[axis]) + int(b[axis])) // 2
                hi1 = b.copy()
                hi1[axis] = midj
                lo2 = a.copy()
                lo2[axis] = midj + 1
                nodes.append((a, hi1))
                nodes.append((lo2, b))

    if best_x is None:
        raise InfeasibleRegion("no lattice point satisfies the constraints")
    flat = (
        not pruned_any
        and math.isfinite(seen_min)
        and seen_max - seen_min <= 1e-9 * max(1.0, abs(seen_min))
    )
    try:
        grad = objective_gradient(obj, gamma, best_x)
        kkt = float(np.linalg.norm(best_x - project_hyperplane_box(best_x - grad, gamma, box)))
    except OverflowError:
        kkt = math.nan
    return Solution(best_x, np.exp(best_x), best_val, evaluated, cert, kkt, True, flat)
