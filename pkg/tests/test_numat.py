"""Tests for the dense matrix helpers.

The irreducibility predicate is validated exhaustively against a boolean
transitive-closure oracle; the exponential is validated against algebraic
identities (semigroup law, nilpotent truncation, closed forms) instead of a
second implementation.
"""

import numpy as np
import pytest

from gridabs import numat
from gridabs.numat import (
    block_triangular_form,
    border_growth_data,
    border_with_ones,
    expm,
    integral_expm,
    is_essentially_nonnegative,
    is_irreducible,
    strongly_connected_components,
)

RNG = np.random.default_rng(42)


def closure_oracle(M: np.ndarray) -> np.ndarray:
    """Transitive closure of the positive-entry digraph by Warshall."""
    R = np.asarray(M) > 0.0
    R = R.copy()
    np.fill_diagonal(R, False)
    n = R.shape[0]
    for k in range(n):
        R |= R[:, k:k + 1] & R[k:k + 1, :]
    return R


def irreducible_oracle(M: np.ndarray) -> bool:
    n = np.asarray(M).shape[0]
    if n == 1:
        return M[0][0] > 0.0
    R = closure_oracle(M)
    return bool(np.all(R[~np.eye(n, dtype=bool)]))


def random_ess_nonneg(n: int, rng, density: float = 0.3) -> np.ndarray:
    L = rng.uniform(0.1, 2.0, (n, n)) * (rng.random((n, n)) < density)
    np.fill_diagonal(L, rng.uniform(-2.0, 1.0, n))
    return L


class TestEssentiallyNonnegative:
    def test_negative_diagonal_allowed(self):
        assert is_essentially_nonnegative([[-5, 0], [1, -2]])

    def test_negative_offdiagonal_rejected(self):
        assert not is_essentially_nonnegative([[1, -0.1], [0, 1]])

    def test_scalar(self):
        assert is_essentially_nonnegative([[3]])
        assert is_essentially_nonnegative([[-3]])

    def test_non_square(self):
        with pytest.raises(ValueError):
            is_essentially_nonnegative([[1, 2, 3], [4, 5, 6]])


class TestIrreducible:
    def test_complete_digraph(self):
        assert is_irreducible([[1, 1], [1, 1]])

    def test_triangular_reducible(self):
        assert not is_irreducible([[1, 1], [0, 1]])

    def test_three_cycle(self):
        assert is_irreducible([[0, 1, 0], [0, 0, 1], [1, 0, 0]])

    def test_two_cycle_without_self_loops(self):
        assert is_irreducible([[0, 1], [1, 0]])

    def test_negative_entries_carry_no_edge(self):
        assert not is_irreducible([[1, -5], [-5, 1]])

    def test_one_by_one_convention(self):
        # strictly positive scalar counts as irreducible, zero or negative not
        assert is_irreducible([[3]])
        assert not is_irreducible([[0]])
        assert not is_irreducible([[-1]])

    def test_non_square(self):
        with pytest.raises(ValueError):
            is_irreducible(np.ones((2, 3)))

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_exhaustive_against_closure_oracle(self, n):
        """Every 0/1 pattern up to n=4 agrees with the Warshall oracle."""
        bits = np.arange(1 << (n * n), dtype=np.int64)
        pats = ((bits[:, None] >> np.arange(n * n)) & 1).astype(float)
        pats = pats.reshape(-1, n, n)
        # batched Warshall over all patterns at once
        R = pats > 0.0
        np.einsum("bii->bi", R)[...] = False
        for k in range(n):
            R |= R[:, :, k:k + 1] & R[:, k:k + 1, :]
        oracle = np.all(R[:, ~np.eye(n, dtype=bool)], axis=1)
        got = np.fromiter(
            (is_irreducible(pats[i]) for i in range(pats.shape[0])), dtype=bool
        )
        assert np.array_equal(got, oracle)


class TestBorderWithOnes:
    def test_block_assembly(self):
        out = border_with_ones([[1, 1], [0, 1]], (0, 1))
        np.testing.assert_array_equal(out, [[1, 1, 0], [0, 1, 1], [1, 1, 1]])

    def test_bordering_can_restore_irreducibility(self):
        # reducible A, but p = (0,1) opens the path 1 -> 2 -> 3 -> 1
        assert is_irreducible(border_with_ones([[1, 1], [0, 1]], (0, 1)))

    def test_bordering_can_fail_to_restore(self):
        # p = (1,0) leaves node 2 with no route back except through itself
        assert not is_irreducible(border_with_ones([[1, 1], [0, 1]], (1, 0)))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            border_with_ones(np.eye(2), (1, 2, 3))


class TestBorderGrowthData:
    def test_zero_matrix(self):
        out = border_growth_data(np.zeros((2, 2)), (1, 1), 0.1, (0, 0))
        np.testing.assert_array_equal(out, [[0, 0, 1], [0, 0, 1], [1, 1, 1]])

    def test_last_column_from_v(self):
        out = border_growth_data([[-1, 0], [0, -1]], (0, 0), 1.0, (2, 3))
        np.testing.assert_array_equal(out[:, 2], [2, 3, 1])

    def test_last_column_accumulates_lz(self):
        out = border_growth_data([[0, 1], [1, 0]], (1, 0), 1.0, (0, 0))
        np.testing.assert_array_equal(out[:, 2], [1, 1, 1])

    def test_rejects_bad_l(self):
        with pytest.raises(ValueError):
            border_growth_data([[0, -1], [0, 0]], (0, 0), 1.0, (0, 0))

    def test_rejects_negative_z(self):
        with pytest.raises(ValueError):
            border_growth_data(np.zeros((2, 2)), (-1, 0), 1.0, (0, 0))


class TestExpm:
    def test_zero_matrix(self):
        np.testing.assert_array_equal(expm(np.zeros((3, 3)), 2.7), np.eye(3))

    def test_diagonal(self):
        out = expm(np.diag([1.0, -2.0]), 0.3)
        np.testing.assert_allclose(
            out, np.diag([np.exp(0.3), np.exp(-0.6)]), rtol=1e-13
        )

    def test_nilpotent_truncates(self):
        out = expm([[0, 1], [0, 0]], 1.0)
        np.testing.assert_allclose(out, [[1, 1], [0, 1]], rtol=0, atol=1e-15)

    def test_rotation_closed_form(self):
        t = 1.234
        out = expm([[0.0, -1.0], [1.0, 0.0]], t)
        expect = np.array(
            [[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]]
        )
        np.testing.assert_allclose(out, expect, atol=1e-12)

    def test_semigroup_property(self):
        for _ in range(25):
            n = int(RNG.integers(1, 7))
            M = RNG.normal(0.0, 1.0, (n, n))
            t1, t2 = RNG.uniform(0.1, 2.0, 2)
            lhs = expm(M, t1 + t2)
            rhs = expm(M, t1) @ expm(M, t2)
            np.testing.assert_allclose(lhs, rhs, rtol=1e-8, atol=1e-10)

    def test_inverse(self):
        M = RNG.normal(0.0, 1.0, (4, 4))
        np.testing.assert_allclose(
            expm(M, 0.7) @ expm(M, -0.7), np.eye(4), atol=1e-10
        )

    def test_structural_zeros_stay_exact(self):
        """Unreachable entries must be exactly zero, not merely tiny.

        The irreducibility transfer tests depend on this: a 1e-300 leak would
        create a spurious digraph edge.
        """
        L = np.array([[-1.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])
        E = expm(L, 0.37)
        assert E[0, 2] == 0.0 and E[1, 0] == 0.0 and E[1, 2] == 0.0
        assert E[2, 0] == 0.0 and E[2, 1] == 0.0
        assert E[0, 1] > 0.0
        assert np.all(np.diag(E) > 0.0)

    def test_overflow_raises(self):
        with pytest.raises(OverflowError):
            expm([[800.0]], 1.0)

    def test_non_finite_t(self):
        with pytest.raises(ValueError):
            expm(np.eye(2), float("inf"))


class TestIntegralExpm:
    def test_zero_matrix(self):
        np.testing.assert_allclose(
            integral_expm(np.zeros((2, 2)), 0.5), 0.5 * np.eye(2), rtol=1e-14
        )

    def test_scalar(self):
        out = integral_expm([[1.0]], 1.0)
        np.testing.assert_allclose(out, [[np.e - 1.0]], rtol=1e-12)

    def test_nilpotent(self):
        out = integral_expm([[0, 1], [0, 0]], 2.0)
        np.testing.assert_allclose(out, [[2, 2], [0, 2]], rtol=1e-13)

    def test_derivative_consistency(self):
        # d/dtau integral = expm(L, tau), checked by central differences
        L = random_ess_nonneg(3, RNG)
        h = 1e-5
        fd = (integral_expm(L, 0.8 + h) - integral_expm(L, 0.8 - h)) / (2 * h)
        np.testing.assert_allclose(fd, expm(L, 0.8), rtol=1e-8, atol=1e-9)

    def test_rejects_nonpositive_tau(self):
        with pytest.raises(ValueError):
            integral_expm(np.eye(2), 0.0)


class TestBlockTriangularForm:
    def test_irreducible_single_block(self):
        perm, sizes = block_triangular_form([[0, 1, 0], [0, 0, 1], [1, 0, 0]])
        assert sizes == [3]
        assert sorted(perm.tolist()) == [0, 1, 2]

    def test_already_triangular(self):
        perm, sizes = block_triangular_form([[1, 0], [1, 1]])
        np.testing.assert_array_equal(perm, [0, 1])
        assert sizes == [1, 1]

    def test_three_singletons(self):
        M = np.array([[1, 1, 0], [0, 1, 0], [0, 1, 1]], dtype=float)
        perm, sizes = block_triangular_form(M)
        assert sizes == [1, 1, 1]
        P = M[np.ix_(perm, perm)]
        assert np.all(np.triu(P, 1) == 0.0) or self._blocks_clear(P, sizes)

    @staticmethod
    def _blocks_clear(P: np.ndarray, sizes) -> bool:
        """Zero everywhere above the diagonal blocks."""
        start = 0
        for s in sizes:
            if np.any(P[start:start + s, start + s:] != 0.0):
                return False
            start += s
        return True

    def test_random_matrices_block_lower_triangular(self):
        for _ in range(60):
            n = int(RNG.integers(1, 9))
            M = (RNG.random((n, n)) < 0.3).astype(float)
            perm, sizes = block_triangular_form(M)
            assert sum(sizes) == n
            assert sorted(perm.tolist()) == list(range(n))
            P = M[np.ix_(perm, perm)]
            assert self._blocks_clear(P, sizes)

    def test_scc_partition_matches_reachability_oracle(self):
        for _ in range(60):
            n = int(RNG.integers(2, 9))
            M = (RNG.random((n, n)) < 0.35).astype(float)
            comps = strongly_connected_components(M)
            R = closure_oracle(M)
            same = R & R.T
            np.fill_diagonal(same, True)
            for comp in comps:
                for i in comp:
                    np.testing.assert_array_equal(
                        np.flatnonzero(same[i]), np.asarray(comp)
                    )


class TestIrreducibilityTransfer:
    """The exponential preserves irreducibility for essentially nonnegative
    matrices, both directly and after bordering; this is the structural fact
    the certificate reduction relies on."""

    def test_direct_transfer(self):
        rng = np.random.default_rng(5)
        hits = 0
        for _ in range(300):
            n = int(rng.integers(2, 7))
            L = random_ess_nonneg(n, rng, density=float(rng.uniform(0.1, 0.5)))
            t = float(rng.uniform(1e-3, 5.0))
            red = is_irreducible(L)
            hits += red
            assert red == is_irreducible(expm(L, t))
        # the sweep must exercise both outcomes to mean anything
        assert 0 < hits < 300

    def test_bordered_transfer(self):
        rng = np.random.default_rng(6)
        checked = 0
        for _ in range(300):
            n = int(rng.integers(2, 7))
            L = random_ess_nonneg(n, rng, density=0.15)
            if is_irreducible(L):
                continue
            p = rng.uniform(0.0, 1.0, n) * (rng.random(n) < 0.4)
            t = float(rng.uniform(1e-3, 5.0))
            lhs = is_irreducible(border_with_ones(L, p))
            rhs = is_irreducible(border_with_ones(expm(L, t), p))
            assert lhs == rhs
            checked += 1
        assert checked > 100
