import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from bilocal import linalg as la
from bilocal.states import (
    BELL_ORDER,
    BellKind,
    SourceNoise,
    bell,
    bell_decompose_swapped,
    bell_projector,
    fidelity,
    four_photon_state,
    source_state,
    unswap,
    werner,
)

S = 1 / np.sqrt(2)


def test_bell_amplitudes():
    assert_allclose(bell(BellKind.PHI_PLUS), [S, 0, 0, S])
    assert_allclose(bell(BellKind.PSI_MINUS), [0, S, -S, 0])
    assert abs(np.vdot(bell(BellKind.PHI_PLUS), bell(BellKind.PSI_MINUS))) == 0
    gram = np.array([[np.vdot(bell(a), bell(b)) for b in BELL_ORDER] for a in BELL_ORDER])
    assert_allclose(gram, np.eye(4), atol=1e-15)
    assert len(BellKind) == 4


class TestSourceState:
    def test_noiseless(self):
        for lam in (0.0, 0.3, 1.0):
            assert_allclose(source_state(SourceNoise(1.0, lam)), bell_projector(BellKind.PHI_PLUS))

    def test_white(self):
        assert_allclose(source_state(SourceNoise(0.0, 0.0)), np.eye(4) / 4)

    def test_colored(self):
        expected = 0.5 * (bell_projector(BellKind.PHI_PLUS) + bell_projector(BellKind.PHI_MINUS))
        assert_allclose(source_state(SourceNoise(0.0, 1.0)), expected)
        # dephased: only |00> and |11> populated, no coherence
        assert_allclose(expected, np.diag([0.5, 0, 0, 0.5]))

    def test_keyword_form(self):
        assert_allclose(source_state(v=0.4, lam=0.2), source_state(SourceNoise(0.4, 0.2)))
        with pytest.raises(TypeError):
            source_state(SourceNoise(), v=0.3)

    @pytest.mark.parametrize("v,lam", [(-0.1, 0), (1.1, 0), (0.5, -0.01), (0.5, 1.5)])
    def test_out_of_range(self, v, lam):
        with pytest.raises(ValueError):
            SourceNoise(v, lam)

    def test_grid_is_valid_state(self):
        grid = np.linspace(0, 1, 21)
        for v, lam in itertools.product(grid, grid):
            rho = source_state(SourceNoise(v, lam))
            assert la.is_hermitian(rho)
            assert abs(np.trace(rho) - 1) < 1e-10
            assert np.linalg.eigvalsh(rho).min() > -1e-9

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_convex_decomposition(self, v, lam):
        expected = (v * bell_projector(BellKind.PHI_PLUS)
                    + (1 - v) * lam * source_state(SourceNoise(0, 1))
                    + (1 - v) * (1 - lam) * np.eye(4) / 4)
        assert_allclose(source_state(SourceNoise(v, lam)), expected, atol=1e-12, rtol=0)


class TestWerner:
    def test_endpoints(self):
        assert_allclose(werner(1.0), bell_projector(BellKind.PHI_PLUS))
        assert_allclose(werner(0.0), np.eye(4) / 4)

    def test_reported_fidelity(self):
        # F = (3V + 1)/4
        assert fidelity(werner(0.9804), bell(BellKind.PHI_PLUS)) == pytest.approx(0.9853, abs=1e-4)

    def test_matches_white_source(self):
        for V in (0.0, 0.5, 0.93):
            assert_allclose(werner(V), source_state(SourceNoise(V, 0.0)))

    def test_range(self):
        werner(-1 / 3)
        with pytest.raises(ValueError):
            werner(-0.34)
        with pytest.raises(ValueError):
            werner(1.01)


class TestFourPhoton:
    def test_pure_product(self):
        phi = bell_projector(BellKind.PHI_PLUS)
        rho = four_photon_state(phi, phi)
        w, vecs = np.linalg.eigh(rho)
        assert w[-1] == pytest.approx(1.0)
        psi = vecs[:, -1] * np.sign(vecs[:, -1][np.argmax(np.abs(vecs[:, -1]))])
        nz = np.flatnonzero(np.abs(psi) > 1e-12)
        assert len(nz) == 4
        assert_allclose(psi[nz], 0.5)
        # |0000>, |0011>, |1100>, |1111> in order A,B,B',C
        assert list(nz) == [0b0000, 0b0011, 0b1100, 0b1111]
        assert np.trace(rho) == pytest.approx(1.0)

    def test_werner_purity(self):
        V = 0.93
        rho = four_photon_state(werner(V), werner(V))
        purity = np.trace(rho @ rho).real
        assert purity == pytest.approx(((1 + 3 * V**2) / 4) ** 2, abs=1e-12)

    def test_dimension_check(self):
        with pytest.raises(ValueError):
            four_photon_state(np.eye(2) / 2, werner(1))


class TestBellDecomposition:
    def product_state(self):
        phi = bell(BellKind.PHI_PLUS)
        return np.kron(phi, phi)

    def test_swap_identity(self):
        coeff = bell_decompose_swapped(self.product_state())
        assert_allclose(np.diag(coeff), [0.5] * 4, atol=1e-15)
        assert_allclose(coeff - np.diag(np.diag(coeff)), 0, atol=1e-15)

    def test_already_regrouped(self):
        phi = bell(BellKind.PHI_PLUS)
        coeff = bell_decompose_swapped(np.kron(phi, phi), perm=(0, 1, 2, 3))
        expected = np.zeros((4, 4))
        expected[0, 0] = 1
        assert_allclose(coeff, expected, atol=1e-15)

    def test_unswap_round_trip(self):
        # |Φ+>_AC |Φ+>_BB' mapped back to A,B,B',C decomposes to a single term
        phi = bell(BellKind.PHI_PLUS)
        coeff = bell_decompose_swapped(unswap(np.kron(phi, phi)))
        assert abs(coeff[0, 0]) == pytest.approx(1.0)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=40)
    def test_unitary(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=4) + 1j * rng.normal(size=4)
        c = rng.normal(size=4) + 1j * rng.normal(size=4)
        psi = np.kron(a / np.linalg.norm(a), c / np.linalg.norm(c))
        coeff = bell_decompose_swapped(psi)
        assert np.sum(np.abs(coeff) ** 2) == pytest.approx(1.0, abs=1e-10)

    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            bell_decompose_swapped(np.ones(16))
