"""Dense matrix helpers shared by the growth-bound and optimizer layers.

All matrices are small (state dimension times state dimension), so everything
works on plain numpy arrays and favours exactness over asymptotics.  The
irreducibility predicate treats a matrix as the adjacency structure of the
digraph with an edge (i, j) whenever the entry is strictly positive.
"""

from __future__ import annotations

import math

import numpy as np

# Scaled 1-norm target and Taylor degree of the exponential kernel.  With
# theta = 0.5 the degree-16 truncation error is below 1e-19 relative.
_EXPM_THETA = 0.5
_EXPM_DEGREE = 16
# Diagonal shifts larger than this would make exp(+shift) overflow the kernel.
_EXPM_MAX_SHIFT = 200.0


def as_square_matrix(M, name: str = "matrix") -> np.ndarray:
    """Coerce to a float array and validate squareness and finiteness."""
    A = np.array(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise ValueError(f"{name} must be a nonempty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def as_vector(v, n: int | None = None, name: str = "vector") -> np.ndarray:
    A = np.array(v, dtype=float)
    if A.ndim != 1 or A.size == 0:
        raise ValueError(f"{name} must be a nonempty vector, got shape {A.shape}")
    if n is not None and A.size != n:
        raise ValueError(f"{name} must have length {n}, got {A.size}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def is_essentially_nonnegative(M) -> bool:
    """True when every off-diagonal entry is >= 0 (diagonal unconstrained)."""
    A = as_square_matrix(M)
    off = A - np.diag(np.diag(A))
    return bool(np.all(off >= 0.0))


def _reaches_all(adj: np.ndarray, start: int) -> bool:
    """Whether every node is reachable from ``start`` in the boolean digraph."""
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[start] = True
    stack = [start]
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(adj[i]):
            if not seen[j]:
                seen[j] = True
                stack.append(int(j))
    return bool(seen.all())


def is_irreducible(M) -> bool:
    """Strong connectivity of the positive-entry digraph of ``M``.

    Edges require strictly positive entries; negative and zero entries carry
    no edge.  The 1x1 convention is M[0,0] > 0.
    """
    A = as_square_matrix(M)
    n = A.shape[0]
    if n == 1:
        return bool(A[0, 0] > 0.0)
    adj = A > 0.0
    np.fill_diagonal(adj, False)  # self loops are irrelevant for connectivity
    return _reaches_all(adj, 0) and _reaches_all(adj.T, 0)


def strongly_connected_components(M) -> list[list[int]]:
    """Tarjan SCCs of the positive-entry digraph, sinks first.

    The emission order is reverse topological on the condensation, which is
    exactly the block order needed for a lower block-triangular permutation.
    Indices inside a component are sorted ascending for determinism.
    """
    A = as_square_matrix(M)
    n = A.shape[0]
    succ = [np.flatnonzero(A[i] > 0.0) for i in range(n)]
    index = [-1] * n
    low = [0] * n
    onstack = [False] * n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work: list[list[int]] = [[root, 0]]
        while work:
            v, ptr = work[-1]
            if ptr == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                onstack[v] = True
            descended = False
            targets = succ[v]
            while ptr < len(targets):
                w = int(targets[ptr])
                ptr += 1
                if index[w] == -1:
                    work[-1][1] = ptr
                    work.append([w, 0])
                    descended = True
                    break
                if onstack[w]:
                    low[v] = min(low[v], index[w])
            if descended:
                continue
            work.pop()
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    onstack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(sorted(comp))
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[v])
    return comps


def block_triangular_form(M) -> tuple[np.ndarray, list[int]]:
    """Permutation and block sizes putting ``M`` in lower block-triangular form.

    Returns (perm, sizes) with perm an index vector such that
    ``M[perm][:, perm]`` has zero blocks above the diagonal blocks, each
    diagonal block irreducible (or a 1x1 zero).
    """
    comps = strongly_connected_components(M)
    perm = np.concatenate([np.asarray(c, dtype=int) for c in comps])
    sizes = [len(c) for c in comps]
    return perm, sizes


def border_with_ones(A, p) -> np.ndarray:
    """The (n+1)x(n+1) matrix with A top-left, p as last column, ones last row."""
    A = as_square_matrix(A, "A")
    n = A.shape[0]
    p = as_vector(p, n, "p")
    out = np.ones((n + 1, n + 1))
    out[:n, :n] = A
    out[:n, n] = p
    return out


def border_growth_data(L, z, tau, v) -> np.ndarray:
    """Bordered growth-data matrix: L top-left, z + Lz + v last column, ones last row.

    ``tau`` is the sampling time the data belongs to; it is validated but does
    not enter the assembled matrix.
    """
    L = as_square_matrix(L, "L")
    if not is_essentially_nonnegative(L):
        raise ValueError("L must be essentially nonnegative")
    n = L.shape[0]
    z = as_vector(z, n, "z")
    v = as_vector(v, n, "v")
    if np.any(z < 0.0) or np.any(v < 0.0):
        raise ValueError("z and v must be nonnegative")
    tau = float(tau)
    if not (math.isfinite(tau) and tau > 0.0):
        raise ValueError("tau must be a positive real")
    return border_with_ones(L, z + L @ z + v)


def expm(M, t: float = 1.0) -> np.ndarray:
    """exp(M t) by Taylor scaling and squaring.

    For essentially nonnegative M t the kernel runs on the shifted matrix
    M t + c I with c = -min diag, whose series has no cancellation; entries
    that are structurally zero (no path in the digraph) come out exactly 0.0
    and reachable entries come out strictly positive.  Overflow is raised,
    never saturated.
    """
    t = float(t)
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    A = as_square_matrix(M) * t
    n = A.shape[0]
    shift = 0.0
    if is_essentially_nonnegative(A):
        dmin = float(np.min(np.diag(A)))
        if dmin < 0.0 and -dmin <= _EXPM_MAX_SHIFT:
            shift = -dmin
    B = A + shift * np.eye(n)
    nrm = float(np.linalg.norm(B, 1))
    squarings = 0
    if nrm > _EXPM_THETA:
        squarings = int(math.ceil(math.log2(nrm / _EXPM_THETA)))
        B = B / (2.0 ** squarings)
    E = np.eye(n)
    # overflow surfaces as the explicit error below, not as a warning
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(_EXPM_DEGREE, 0, -1):
            E = np.eye(n) + (B / k) @ E
        for _ in range(squarings):
            E = E @ E
        if shift != 0.0:
            E = E * math.exp(-shift)
    if not np.all(np.isfinite(E)):
        raise OverflowError("matrix exponential overflowed")
    return E


def integral_expm(L, tau: float) -> np.ndarray:
    """The integral of exp(L s) over s in [0, tau].

    Computed as the top-right block of exp of the block matrix
    [[L, I], [0, 0]] scaled by tau, which is exact for the integral.
    """
    L = as_square_matrix(L, "L")
    tau = float(tau)
    if not (math.isfinite(tau) and tau > 0.0):
        raise ValueError("tau must be a positive real")
    n = L.shape[0]
    C = np.zeros((2 * n, 2 * n))
    C[:n, :n] = L
    C[:n, n:] = np.eye(n)
    return expm(C, tau)[:n, n:]
