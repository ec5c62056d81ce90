import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdtlab.errors import InputValidationError
from fdtlab.spectral_core import (
    apply,
    build_cycle_laplacian,
    build_graph_laplacian,
    build_torus_laplacian,
    spectral_norm,
    sym_eig,
    symmetric_operator,
)


def random_symmetric(seed, n):
    g = np.random.default_rng(seed).standard_normal((n, n))
    return symmetric_operator((g + g.T) / 2.0)


def two_by_two_eigs(a, b, d):
    # independent closed-form oracle for [[a, b], [b, d]]
    mean = (a + d) / 2.0
    rad = np.sqrt(((a - d) / 2.0) ** 2 + b**2)
    return mean - rad, mean + rad


class TestSymEig:
    def test_diagonal_permutation(self):
        eig = sym_eig(symmetric_operator(np.diag([3.0, 1.0, 2.0])))
        assert np.allclose(eig.eigenvalues, [1.0, 2.0, 3.0])
        # eigenvectors are signed permutation columns
        assert np.allclose(np.abs(eig.eigenvectors), np.eye(3)[:, [1, 2, 0]])

    def test_2x2_closed_form(self):
        lo, hi = two_by_two_eigs(2.0, 0.1, 4.0)
        eig = sym_eig(symmetric_operator([[2.0, 0.1], [0.1, 4.0]]))
        assert np.allclose(eig.eigenvalues, [lo, hi], atol=1e-12)

    def test_identity(self):
        eig = sym_eig(symmetric_operator(np.eye(5)))
        assert np.allclose(eig.eigenvalues, np.ones(5))

    def test_rejects_nonfinite(self):
        with pytest.raises(InputValidationError):
            symmetric_operator([[np.nan, 0.0], [0.0, 1.0]])

    def test_single_element(self):
        eig = sym_eig(symmetric_operator([[4.0]]))
        assert eig.eigenvalues[0] == 4.0 and eig.eigenvectors[0, 0] == 1.0

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31), n=st.integers(2, 32))
    def test_reconstruction_and_orthonormality(self, seed, n):
        op = random_symmetric(seed, n)
        eig = sym_eig(op)
        norm = max(1.0, spectral_norm(op))
        recon = eig.eigenvectors @ np.diag(eig.eigenvalues) @ eig.eigenvectors.T
        assert np.max(np.abs(recon - op.entries)) <= 1e-8 * norm
        gram = eig.eigenvectors.T @ eig.eigenvectors
        assert np.max(np.abs(gram - np.eye(n))) <= 1e-10
        assert np.all(np.diff(eig.eigenvalues) >= 0)
        residual = op.entries @ eig.eigenvectors - eig.eigenvectors * eig.eigenvalues
        assert np.max(np.abs(residual)) <= 1e-8 * norm

    def test_bit_identical_determinism(self):
        op = random_symmetric(7, 16)
        a, b = sym_eig(op), sym_eig(op)
        assert np.array_equal(a.eigenvalues, b.eigenvalues)
        assert np.array_equal(a.eigenvectors, b.eigenvectors)


class TestGraphLaplacian:
    def test_single_edge(self):
        lap = build_graph_laplacian([[0.0, 1.0], [1.0, 0.0]])
        assert np.array_equal(lap.entries, [[1.0, -1.0], [-1.0, 1.0]])

    def test_path_graph(self):
        w = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
        lap = build_graph_laplacian(w)
        assert np.array_equal(lap.entries, [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31), n=st.integers(2, 16))
    def test_row_sums_zero_and_psd(self, seed, n):
        w = np.abs(np.random.default_rng(seed).standard_normal((n, n)))
        w = (w + w.T) / 2.0
        np.fill_diagonal(w, 0.0)
        lap = build_graph_laplacian(w)
        assert np.max(np.abs(lap.entries.sum(axis=1))) < 1e-12
        assert sym_eig(lap).eigenvalues[0] >= -1e-10

    def test_rejections(self):
        with pytest.raises(InputValidationError):
            build_graph_laplacian([[0.0, 1.0], [2.0, 0.0]])  # asymmetric
        with pytest.raises(InputValidationError):
            build_graph_laplacian([[0.0, -1.0], [-1.0, 0.0]])  # negative
        with pytest.raises(InputValidationError):
            build_graph_laplacian([[1.0, 1.0], [1.0, 0.0]])  # nonzero diagonal


class TestSyntheticOperators:
    def test_cycle_spectrum_closed_form(self):
        for n in (3, 4, 9):
            expect = np.sort(2.0 - 2.0 * np.cos(2.0 * np.pi * np.arange(n) / n))
            got = sym_eig(build_cycle_laplacian(n)).eigenvalues
            assert np.allclose(got, expect, atol=1e-10)

    def test_cycle_examples(self):
        assert np.allclose(sym_eig(build_cycle_laplacian(4)).eigenvalues, [0, 2, 2, 4], atol=1e-10)
        assert np.allclose(sym_eig(build_cycle_laplacian(3)).eigenvalues, [0, 3, 3], atol=1e-10)

    def test_cycle_too_small(self):
        with pytest.raises(InputValidationError):
            build_cycle_laplacian(2)

    def test_torus_spectrum_is_pairwise_sums(self):
        cyc = 2.0 - 2.0 * np.cos(2.0 * np.pi * np.arange(3) / 3)
        expect = np.sort(np.add.outer(cyc, cyc).ravel())
        got = sym_eig(build_torus_laplacian(3, 3)).eigenvalues
        assert np.allclose(got, expect, atol=1e-9)

    def test_torus_shape_and_kernel(self):
        lap = build_torus_laplacian(3, 4)
        assert lap.n == 12
        assert np.allclose(lap.entries @ np.ones(12), 0.0, atol=1e-12)

    def test_torus_bad_size(self):
        with pytest.raises(InputValidationError):
            build_torus_laplacian(2, 5)


class TestNormAndApply:
    def test_spectral_norm_cases(self):
        assert spectral_norm(symmetric_operator(np.zeros((3, 3)))) == 0.0
        assert spectral_norm(symmetric_operator(np.diag([-5.0, 3.0]))) == 5.0
        got = spectral_norm(symmetric_operator([[0.0, 0.1], [0.1, 0.0]]))
        assert abs(got - 0.1) <= 1e-8 * 0.1

    def test_apply(self):
        op = symmetric_operator([[1.0, -1.0], [-1.0, 1.0]])
        assert np.allclose(apply(op, [1.0, 1.0]), [0.0, 0.0])
        ident = symmetric_operator(np.eye(3))
        f = np.array([1.0, -2.0, 0.5])
        assert np.array_equal(apply(ident, f), f)
        assert np.array_equal(apply(symmetric_operator(np.zeros((3, 3))), f), np.zeros(3))

    def test_apply_dimension_mismatch(self):
        with pytest.raises(InputValidationError):
            apply(symmetric_operator(np.eye(3)), [1.0, 2.0])


def test_symmetrize_warns_on_large_asymmetry():
    with pytest.warns(UserWarning, match="symmetrizing"):
        op = symmetric_operator([[0.0, 1.0], [1.0 + 1e-6, 0.0]])
    assert np.array_equal(op.entries, op.entries.T)


def test_ingest_rejects_nonsquare():
    with pytest.raises(InputValidationError):
        symmetric_operator(np.zeros((2, 3)))
