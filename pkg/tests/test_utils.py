import logging

import numpy as np
import pytest

from landaulab import utils


class TestUtils:
    @pytest.mark.parametrize(
        "verbose, very_verbose, level",
        [
            (False, False, logging.WARNING),
            (True, False, logging.INFO),
            (False, True, logging.DEBUG),
            (True, True, logging.DEBUG),
        ],
    )
    def test_determine_log_level(self, verbose: bool, very_verbose: bool, level: int):
        assert utils.determine_log_level(verbose, very_verbose) == level

    def test_periodic_offset(self):
        offsets = utils.periodic_offset(np.array([0, 1, 7, 8, 9, 15, -1, 16]), 16)
        assert offsets.tolist() == [0, 1, 7, 8, -7, -1, -1, 0]

    def test_periodic_offset_odd_grid(self):
        offsets = utils.periodic_offset(np.arange(5), 5)
        assert offsets.tolist() == [0, 1, 2, -2, -1]

    def test_site_offsets(self):
        assert utils.site_offsets([1, 15], [15, 1], 16).tolist() == [2, -2]

    def test_canonical_basis_ignores_solver_phase(self):
        vector = np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0)
        first = utils.canonical_subspace_basis(vector[:, None] * np.exp(0.7j))
        second = utils.canonical_subspace_basis(vector[:, None] * np.exp(-2.1j))
        np.testing.assert_allclose(first, second, atol=1e-12)
        np.testing.assert_allclose(first[:, 0], vector, atol=1e-12)

    def test_canonical_basis_is_orthonormal(self):
        rng = np.random.default_rng(3)
        raw = rng.normal(size=(6, 3)) + 1j * rng.normal(size=(6, 3))
        vectors, _ = np.linalg.qr(raw)
        basis = utils.canonical_subspace_basis(vectors)
        np.testing.assert_allclose(basis.conj().T @ basis, np.eye(3), atol=1e-10)
        np.testing.assert_allclose(basis @ basis.conj().T, vectors @ vectors.conj().T, atol=1e-10)

    @pytest.mark.parametrize(
        "values, groups",
        [
            ([1.0, 1.0, 2.0, 3.0, 3.0, 3.0], ((0, 2), (2, 3), (3, 6))),
            ([1.0], ((0, 1),)),
            ([1.0, 2.0], ((0, 1), (1, 2))),
        ],
    )
    def test_split_degenerate(self, values, groups):
        assert utils.split_degenerate(np.array(values), 1e-6) == groups

    def test_smooth_bump(self):
        values = utils.smooth_bump(np.array([0.0, 0.25, 0.5, 0.75, 1.0, 2.0]), 1.0)
        np.testing.assert_allclose(values[[0, 1, 2]], 1.0)
        assert values[3] == pytest.approx(0.5)
        np.testing.assert_allclose(values[[4, 5]], 0.0)

    def test_hermitian_part(self):
        matrix = np.array([[1.0, 2.0j], [0.0, 3.0]])
        part = utils.hermitian_part(matrix)
        np.testing.assert_allclose(part, part.conj().T)
