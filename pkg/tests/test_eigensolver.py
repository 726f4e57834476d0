import numpy as np
import pytest

from landaulab.eigensolver import SolverSettings, counting_function, dense_eig, lanczos_lowest, shift, solve
from landaulab.errors import AboveCertifiedCutoff, DimensionTooLarge, NoConvergence, UsageError
from landaulab.lattice import assemble_laplacian, build_gauge

TWO_PI = 2.0 * np.pi


@pytest.fixture(scope="module")
def operator(constant_geometry):
    return assemble_laplacian(build_gauge(constant_geometry, 2), constant_geometry)


class TestDense:
    def test_raw_matrix(self):
        es = dense_eig(np.diag([3.0, 1.0, 2.0]), cutoff=2.5)
        np.testing.assert_allclose(es.eigenvalues, [1.0, 2.0])
        assert es.k == 0
        assert es.cutoff == 2.5
        assert es.orthonormality_defect() < 1e-12

    def test_cutoff_is_exclusive(self):
        es = dense_eig(np.diag([3.0, 1.0, 2.0]), cutoff=2.0)
        np.testing.assert_allclose(es.eigenvalues, [1.0])

    def test_dimension_cap(self):
        with pytest.raises(DimensionTooLarge):
            dense_eig(np.eye(10), dense_cap=5)

    def test_lowest_cluster(self, operator):
        es = dense_eig(operator, cutoff=TWO_PI)
        assert len(es) == 2
        np.testing.assert_allclose(es.eigenvalues, np.pi, rtol=0.05)
        assert es.orthonormality_defect() < 1e-10
        assert np.max(es.residuals) < 1e-8

    def test_site_densities_are_normalized(self, operator):
        es = dense_eig(operator, cutoff=TWO_PI)
        totals = es.site_densities().T @ es.weights[:: es.rank]
        np.testing.assert_allclose(totals, 1.0, atol=1e-10)
        assert es.section(0).values.shape == (es.sites, 1)

    def test_densities_need_vectors(self, operator):
        es = dense_eig(operator, cutoff=TWO_PI, keep_vectors=False)
        with pytest.raises(UsageError):
            es.site_densities()


class TestLanczos:
    def test_agrees_with_dense(self, operator):
        reference = dense_eig(operator, cutoff=2 * TWO_PI)
        es = lanczos_lowest(operator, 2 * TWO_PI, seed=7)
        assert es.method == "lanczos"
        assert es.seed == 7
        np.testing.assert_allclose(es.eigenvalues, reference.eigenvalues, atol=1e-7)
        assert es.orthonormality_defect() < 1e-8

    def test_seed_independent_count(self, operator):
        counts = {len(lanczos_lowest(operator, TWO_PI, seed=seed)) for seed in (0, 1, 2)}
        assert counts == {2}

    def test_budget(self, operator):
        with pytest.raises(NoConvergence):
            lanczos_lowest(operator, TWO_PI, max_basis=5, max_iters=1)

    def test_solve_dispatches_on_dimension(self, operator):
        assert solve(operator, TWO_PI, SolverSettings(dense_cap=10)).method == "lanczos"
        assert solve(operator, TWO_PI, SolverSettings()).method == "dense"


class TestCounting:
    def test_counting_function(self, operator):
        es = dense_eig(operator, cutoff=2 * TWO_PI)
        assert counting_function(es, TWO_PI) == 2
        assert counting_function(es, 2 * TWO_PI) == 4
        with pytest.raises(AboveCertifiedCutoff):
            counting_function(es, 2 * TWO_PI + 0.1)

    def test_shift(self, operator):
        es = dense_eig(operator, cutoff=TWO_PI)
        moved = shift(es, 1.5)
        np.testing.assert_allclose(moved.eigenvalues, es.eigenvalues + 1.5)
        assert moved.cutoff == TWO_PI + 1.5
        assert counting_function(moved, TWO_PI + 1.5) == 2
