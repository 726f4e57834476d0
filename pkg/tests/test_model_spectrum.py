import numpy as np
import pytest

from landaulab.errors import CapExceeded, EndpointOnSpectrum, RankJump
from landaulab.geometry import frame_from_tensors
from landaulab.model_spectrum import (
    OscillatorBasis,
    box_operator,
    cap_for,
    cluster_bundle,
    continuity_modulus,
    envelope_refinement_error,
    level_table,
    projector_symbol,
    sigma_envelope,
    sigma_y,
    site_levels,
    weyl_density,
    weyl_table,
)

TWO_PI = 2.0 * np.pi
PLANAR_FORM = np.array([[0.0, TWO_PI], [-TWO_PI, 0.0]])


def _levels(pairs):
    return [value for value, _ in pairs], [multiplicity for _, multiplicity in pairs]


class TestOscillatorBasis:
    def test_graded_order(self):
        basis = OscillatorBasis(2, 2)
        assert basis.multi_indices == ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))
        assert basis.index((1, 1)) == 4
        assert (0, 3) not in basis

    def test_shifted(self):
        np.testing.assert_allclose(OscillatorBasis(1, 2).shifted(), [[0.5], [1.5], [2.5]])

    def test_negative_cap(self):
        with pytest.raises(CapExceeded):
            OscillatorBasis(1, -1)

    @pytest.mark.parametrize(
        "cutoff, frequency, potential, cap",
        [(6.0, 2.0, 0.0, 4), (5.9, 2.0, 0.0, 3), (1.0, 2.0, 0.0, 1), (10.0, 2.0, 4.0, 4)],
    )
    def test_cap_for(self, cutoff: float, frequency: float, potential: float, cap: int):
        assert cap_for(cutoff, frequency, potential) == cap


class TestModelLevels:
    def test_planar_levels(self, planar_frame):
        values, multiplicities = _levels(sigma_y(planar_frame, 3 * TWO_PI))
        np.testing.assert_allclose(values, [np.pi, 3 * np.pi, 5 * np.pi])
        assert multiplicities == [1, 1, 1]

    def test_cutoff_is_exclusive(self, planar_frame):
        values, _ = _levels(sigma_y(planar_frame, 3 * np.pi))
        np.testing.assert_allclose(values, [np.pi])

    def test_isotropic_multiplicities(self, isotropic_frame):
        values, multiplicities = _levels(sigma_y(isotropic_frame, 3.5 * TWO_PI))
        np.testing.assert_allclose(values, [TWO_PI, 2 * TWO_PI, 3 * TWO_PI])
        assert multiplicities == [1, 2, 3]

    def test_potential_shifts_levels(self):
        frame = frame_from_tensors(np.eye(2), PLANAR_FORM, np.diag([0.0, 1.0]))
        values, multiplicities = _levels(sigma_y(frame, 10.0))
        np.testing.assert_allclose(values, [np.pi, np.pi + 1.0, 3 * np.pi])
        assert multiplicities == [1, 1, 1]

    def test_level_table_labels(self, isotropic_frame):
        rows = level_table(isotropic_frame, 2.5 * TWO_PI)
        assert [(alpha, aux) for _, alpha, aux in rows] == [((0, 0), 0), ((1, 0), 0), ((0, 1), 0)]
        np.testing.assert_allclose([value for value, _, _ in rows], [TWO_PI, 2 * TWO_PI, 2 * TWO_PI])

    def test_box_operator_in_standard_frame(self):
        potential = np.array([[0.5, 0.2j], [-0.2j, 1.0]])
        frame = frame_from_tensors(np.eye(2), PLANAR_FORM, potential)
        operator = box_operator(frame, 2)
        assert operator.dimension == 6
        np.testing.assert_allclose(operator.matrix, operator.matrix.conj().T, atol=1e-12)
        np.testing.assert_allclose(np.linalg.eigvalsh(operator.matrix), np.sort(operator.eigenvalues), atol=1e-12)
        assert operator.label(3) == ((1,), 1)


class TestEnvelope:
    def test_constant_field(self, constant_geometry):
        envelope = sigma_envelope(constant_geometry, 3 * TWO_PI)
        assert len(envelope) == 3
        for (lo, hi), level in zip(envelope, [np.pi, 3 * np.pi, 5 * np.pi]):
            assert lo == pytest.approx(level)
            assert hi == pytest.approx(level)
        assert continuity_modulus(constant_geometry, 3 * TWO_PI) == pytest.approx(0.0, abs=1e-10)
        np.testing.assert_allclose(envelope_refinement_error(constant_geometry, 3 * TWO_PI), 0.0, atol=1e-10)

    def test_varying_field(self, varying_geometry):
        envelope = sigma_envelope(varying_geometry, 3 * TWO_PI)
        assert envelope[0][0] == pytest.approx(0.85 * np.pi)
        assert envelope[0][1] == pytest.approx(1.15 * np.pi)
        assert envelope[1][0] == pytest.approx(0.85 * 3 * np.pi)
        assert continuity_modulus(varying_geometry, 3 * TWO_PI) > 0.0

    def test_truncated_top_component(self, varying_geometry):
        cutoff = 3 * np.pi
        envelope = sigma_envelope(varying_geometry, cutoff)
        assert envelope[len(envelope) - 1][1] == cutoff

    def test_site_levels_shape(self, constant_geometry):
        levels = site_levels(constant_geometry, 3 * TWO_PI)
        assert levels.shape[0] == constant_geometry.sites
        assert levels.shape[1] >= 4
        assert np.all(np.diff(levels, axis=1) >= 0)


class TestWeylDensity:
    @pytest.mark.parametrize("lam, expected", [(0.5 * np.pi, 0.0), (TWO_PI, TWO_PI), (2 * TWO_PI, 2 * TWO_PI)])
    def test_constant_field(self, constant_geometry, lam: float, expected: float):
        assert weyl_density(constant_geometry, lam) == pytest.approx(expected, abs=1e-10)

    def test_monotone(self, varying_geometry):
        table = weyl_table(varying_geometry, np.linspace(0.0, 3 * TWO_PI, 13))
        densities = [value for _, value in table]
        assert np.all(np.diff(densities) >= 0)
        assert densities[0] == 0.0


class TestProjectors:
    def test_projector_symbol(self, planar_frame):
        projector = projector_symbol(planar_frame, (TWO_PI, 2 * TWO_PI))
        np.testing.assert_allclose(projector @ projector, projector, atol=1e-12)
        assert np.trace(projector).real == pytest.approx(1.0)

    def test_endpoint_on_level(self, planar_frame):
        with pytest.raises(EndpointOnSpectrum):
            projector_symbol(planar_frame, (0.0, 3 * np.pi))

    def test_cluster_bundle(self, constant_geometry):
        bundle = cluster_bundle(constant_geometry, (TWO_PI, 2 * TWO_PI))
        assert bundle.rank == 1
        assert bundle.shape == (16, 16)
        assert bundle.half_dim == 1

    def test_rank_jump(self, varying_geometry):
        with pytest.raises(RankJump):
            cluster_bundle(varying_geometry, (0.0, 1.05 * np.pi))
