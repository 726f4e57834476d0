from dataclasses import replace

import numpy as np
import pytest

from landaulab.acceptance import constant_field
from landaulab.eigensolver import dense_eig
from landaulab.errors import CutoffTooSmall, DimensionMismatch, FluxMismatch, SectionWrapsTorus, UsageError
from landaulab.geometry import build_geometry, frame_at, frame_from_tensors
from landaulab.lattice import (
    LatticeSection,
    Perturbation,
    _norm_matrix,
    alternate_gauge,
    assemble_laplacian,
    build_gauge,
    gauge_transform,
    load_npz,
    loop_phase,
    matvec,
    peaked_section,
    polynomial_values,
    save_npz,
    transport_field,
    transport_frame,
    write_matrix_market,
)
from landaulab.model_spectrum import OscillatorBasis

TWO_PI = 2.0 * np.pi


@pytest.fixture(scope="module")
def small_geometry():
    return build_geometry(constant_field(8))


def _gaussian_norm_sq(geom, frame, coefficients: np.ndarray, cap: int, nodes: int = 40) -> float:
    """rho_y int exp(-|eta|_y^2 / 2) |f(eta)|^2 d eta by Gauss-Hermite after eta = sqrt(2) R^-1 s, Q = R^T R"""
    upper = np.linalg.cholesky(_norm_matrix(frame)).T
    x, w = np.polynomial.hermite.hermgauss(nodes)
    s = np.stack(np.meshgrid(x, x, indexing="ij"), axis=-1).reshape(-1, 2)
    eta = np.sqrt(2.0) * np.linalg.solve(upper, s.T).T
    values = polynomial_values(coefficients, cap, frame.complex_coordinates(eta), frame.rank)
    integrand = np.sum(np.abs(values) ** 2, axis=-1) * np.outer(w, w).ravel()
    return float(geom.liouville[frame.site] * 2.0 / np.linalg.det(upper) * np.sum(integrand))


class TestGauge:
    @pytest.mark.parametrize("k", [0, 1, 3])
    def test_winding(self, constant_geometry, k: int):
        gauge = build_gauge(constant_geometry, k)
        assert gauge.winding() == pytest.approx(k)
        np.testing.assert_allclose(np.abs(gauge.links), 1.0)

    @pytest.mark.parametrize("builder", [build_gauge, alternate_gauge])
    @pytest.mark.parametrize("site", [(0, 0), (3, 7), (15, 15), (15, 0), (0, 15)])
    def test_loop_phase(self, varying_geometry, builder, site):
        gauge = builder(varying_geometry, 3)
        expected = np.exp(-1j * gauge.flux[0][site])
        assert loop_phase(gauge, site) == pytest.approx(expected, abs=1e-10)

    def test_alternate_gauge_differs(self, constant_geometry):
        first = build_gauge(constant_geometry, 2)
        second = alternate_gauge(constant_geometry, 2)
        assert not np.allclose(first.links, second.links)

    def test_gauge_transform_keeps_loops(self, varying_geometry):
        gauge = build_gauge(varying_geometry, 2)
        chi = np.random.default_rng(1).uniform(0, TWO_PI, size=gauge.shape)
        transformed = gauge_transform(gauge, chi)
        for site in [(0, 0), (5, 9), (15, 15)]:
            assert loop_phase(transformed, site) == pytest.approx(loop_phase(gauge, site), abs=1e-10)

    def test_negative_power(self, constant_geometry):
        with pytest.raises(UsageError):
            build_gauge(constant_geometry, -1)

    def test_flux_mismatch(self, constant_geometry):
        with pytest.raises(FluxMismatch):
            build_gauge(replace(constant_geometry, degrees=(2,)), 1)


class TestAssembly:
    def test_hermitian(self, varying_geometry):
        operator = assemble_laplacian(build_gauge(varying_geometry, 2), varying_geometry)
        assert operator.hermiticity_defect() <= 1e-10
        rng = np.random.default_rng(0)
        u = rng.normal(size=operator.dimension) + 1j * rng.normal(size=operator.dimension)
        v = rng.normal(size=operator.dimension) + 1j * rng.normal(size=operator.dimension)
        left = operator.inner(operator.matrix @ u, v)
        right = operator.inner(u, operator.matrix @ v)
        assert left == pytest.approx(right, rel=1e-10)

    def test_free_laplacian_annihilates_constants(self, small_geometry):
        operator = assemble_laplacian(build_gauge(small_geometry, 0), small_geometry)
        np.testing.assert_allclose(operator.matrix @ np.ones(operator.dimension), 0.0, atol=1e-10)

    def test_spectrum_is_gauge_invariant(self, small_geometry):
        gauge = build_gauge(small_geometry, 2)
        chi = np.random.default_rng(4).uniform(0, TWO_PI, size=gauge.shape)
        reference = dense_eig(assemble_laplacian(gauge, small_geometry)).eigenvalues
        for other in (gauge_transform(gauge, chi), alternate_gauge(small_geometry, 2)):
            values = dense_eig(assemble_laplacian(other, small_geometry)).eigenvalues
            np.testing.assert_allclose(values, reference, atol=1e-9)

    def test_zeroth_order_term_shifts_spectrum(self, small_geometry):
        gauge = build_gauge(small_geometry, 2)
        shift = np.tile(np.eye(1) * 3.0, (small_geometry.sites, 1, 1))
        plain = dense_eig(assemble_laplacian(gauge, small_geometry)).eigenvalues
        perturbed = dense_eig(
            assemble_laplacian(gauge, small_geometry, Perturbation(zeroth_order=shift))
        ).eigenvalues
        np.testing.assert_allclose(perturbed, plain + 1.5, atol=1e-9)

    def test_first_order_term_is_self_adjoint(self, small_geometry):
        x, y = small_geometry.points[:, 0], small_geometry.points[:, 1]
        perturbation = Perturbation(first_order=np.stack([np.cos(TWO_PI * y), np.sin(TWO_PI * x)]))
        operator = assemble_laplacian(build_gauge(small_geometry, 2), small_geometry, perturbation)
        assert operator.hermiticity_defect() <= 1e-10
        assert operator.metadata["perturbed"]

    def test_shifted(self, small_geometry):
        operator = assemble_laplacian(build_gauge(small_geometry, 2), small_geometry)
        plain = dense_eig(operator).eigenvalues
        np.testing.assert_allclose(dense_eig(operator.shifted(0.75)).eigenvalues, plain + 0.75, atol=1e-9)

    def test_grid_mismatch(self, constant_geometry, small_geometry):
        with pytest.raises(DimensionMismatch):
            assemble_laplacian(build_gauge(constant_geometry, 1), small_geometry)

    def test_matvec(self, small_geometry):
        operator = assemble_laplacian(build_gauge(small_geometry, 1), small_geometry)
        section = LatticeSection(values=np.ones((small_geometry.sites, 1), dtype=complex), k=1)
        np.testing.assert_allclose(matvec(operator, section).flat, operator.matrix @ section.flat)
        with pytest.raises(DimensionMismatch):
            matvec(operator, LatticeSection(values=np.ones((3, 1)), k=1))

    def test_npz_round_trip(self, small_geometry, tmp_path):
        operator = assemble_laplacian(build_gauge(small_geometry, 3), small_geometry)
        save_npz(operator, tmp_path / "operator.npz")
        loaded = load_npz(tmp_path / "operator.npz")
        assert (loaded.k, loaded.grid, loaded.half_dim, loaded.rank) == (3, 8, 1, 1)
        assert abs(loaded.matrix - operator.matrix).max() == 0.0
        np.testing.assert_array_equal(loaded.weights, operator.weights)

    def test_matrix_market(self, small_geometry, tmp_path):
        operator = assemble_laplacian(build_gauge(small_geometry, 1), small_geometry)
        write_matrix_market(operator, tmp_path / "operator.mtx")
        with open(tmp_path / "operator.mtx", "rt") as mtx:
            assert mtx.readline().startswith("%%MatrixMarket matrix coordinate complex hermitian")


class TestTransport:
    def test_frame_at_base(self, varying_geometry):
        gauge = build_gauge(varying_geometry, 3)
        assert transport_frame(gauge, (4, 2), (4, 2)) == pytest.approx(1.0)

    @pytest.mark.parametrize("straighten", [False, True])
    def test_field_matches_pointwise_frames(self, small_geometry, straighten: bool):
        gauge = build_gauge(small_geometry, 3)
        y = (2, 5)
        field = transport_field(gauge, y, small_geometry if straighten else None)
        pointwise = [
            transport_frame(gauge, y, small_geometry.site_multi_index(site), small_geometry, straighten)
            for site in range(small_geometry.sites)
        ]
        np.testing.assert_allclose(field, pointwise, atol=1e-10)

    def test_straightening_needs_geometry(self, small_geometry):
        with pytest.raises(UsageError):
            transport_frame(build_gauge(small_geometry, 1), (0, 0), (1, 1), straighten=True)


class TestPeakedSection:
    def test_cutoff_too_small(self, constant_geometry):
        gauge = build_gauge(constant_geometry, 4)
        with pytest.raises(CutoffTooSmall):
            peaked_section(gauge, constant_geometry, frame_at(constant_geometry, 0), np.ones(1), 0, cutoff=1.0)

    def test_section_wraps_torus(self, constant_geometry):
        gauge = build_gauge(constant_geometry, 1)
        with pytest.raises(SectionWrapsTorus):
            peaked_section(gauge, constant_geometry, frame_at(constant_geometry, 0), np.ones(1), 0, cutoff=10.0)

    def test_needs_grid_site(self, constant_geometry, planar_frame):
        gauge = build_gauge(constant_geometry, 1)
        with pytest.raises(UsageError):
            peaked_section(gauge, constant_geometry, planar_frame, np.ones(1), 0)

    @pytest.mark.slow
    @pytest.mark.parametrize("alpha", [0, 1])
    def test_quasimode_on_constant_field(self, alpha: int):
        k, degree = 4, 24
        geom = build_geometry(constant_field(40 * k, degree=degree))
        gauge = build_gauge(geom, k)
        operator = assemble_laplacian(gauge, geom)
        frame = frame_at(geom, (geom.grid // 2, geom.grid // 4))
        basis = OscillatorBasis(1, 1)
        coefficients = np.zeros(len(basis), dtype=complex)
        coefficients[basis.index((alpha,))] = 1.0
        section = peaked_section(gauge, geom, frame, coefficients, 1)
        level = TWO_PI * degree * (alpha + 0.5)
        residual = matvec(operator, section).flat / k - level * section.flat
        assert operator.norm(residual) / operator.norm(section.flat) < 0.05 * level

    @pytest.mark.slow
    @pytest.mark.parametrize("alpha", [0, 1])
    def test_norm_matches_gaussian_integral(self, alpha: int):
        degree = 24
        basis = OscillatorBasis(1, 1)
        coefficients = np.zeros(len(basis), dtype=complex)
        coefficients[basis.index((alpha,))] = 1.0
        norms = []
        for k in (2, 4):
            geom = build_geometry(constant_field(40 * k, degree=degree))
            gauge = build_gauge(geom, k)
            frame = frame_at(geom, (geom.grid // 2, geom.grid // 4))
            section = peaked_section(gauge, geom, frame, coefficients, 1)
            norms.append(assemble_laplacian(gauge, geom).norm(section.flat) ** 2)
            expected = _gaussian_norm_sq(geom, frame, coefficients, 1)
            assert norms[-1] == pytest.approx(expected, rel=1e-2)
        assert expected == pytest.approx(TWO_PI, rel=1e-8)
        assert norms[1] == pytest.approx(norms[0], rel=1e-2)
