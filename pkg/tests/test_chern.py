import numpy as np
import pytest

from landaulab.chern import (
    berry_curvature_oracle,
    chern_data,
    fhs_chern,
    harper_matrix,
    hofstadter_projector_field,
    kubo_chern,
    riemann_roch,
)
from landaulab.errors import UnsupportedDimension, UsageError
from landaulab.model_spectrum import ProjectorField, cluster_bundle

TWO_PI = 2.0 * np.pi


@pytest.fixture(scope="module")
def harper_chern_numbers():
    return [fhs_chern(hofstadter_projector_field(3, band, 24)) for band in range(3)]


class TestHarper:
    def test_matrix_is_hermitian(self):
        matrix = harper_matrix(0.3, 1.1, 5, p=2)
        np.testing.assert_allclose(matrix, matrix.conj().T)

    def test_needs_three_sites(self):
        with pytest.raises(UsageError):
            harper_matrix(0.0, 0.0, 2)

    def test_band_chern_numbers(self, harper_chern_numbers):
        assert sum(harper_chern_numbers) == 0
        assert sorted(abs(c) for c in harper_chern_numbers) == [1, 1, 2]
        assert harper_chern_numbers[0] == harper_chern_numbers[2]

    def test_chern_number_is_additive(self, harper_chern_numbers):
        pair = fhs_chern(hofstadter_projector_field(3, [0, 1], 24))
        assert pair == harper_chern_numbers[0] + harper_chern_numbers[1]

    @pytest.mark.parametrize("band", [0, 1, 2])
    def test_kubo_agrees(self, harper_chern_numbers, band: int):
        value = kubo_chern(lambda kx, ky: harper_matrix(kx, ky, 3), band, 24, periods=(TWO_PI / 3, TWO_PI))
        assert value == pytest.approx(harper_chern_numbers[band], abs=0.1)

    @pytest.mark.parametrize("band", [0, 2])
    def test_berry_curvature_agrees(self, harper_chern_numbers, band: int):
        value = berry_curvature_oracle(hofstadter_projector_field(3, band, 48))
        assert round(value) == harper_chern_numbers[band]

    def test_curvature_sums_to_chern_number(self):
        data = chern_data(hofstadter_projector_field(3, 0, 16))
        assert data.curvature.shape == (16, 16)
        assert -data.curvature.sum() / TWO_PI == pytest.approx(data.c1, abs=1e-6)

    def test_full_rank_is_trivial(self):
        assert fhs_chern(hofstadter_projector_field(3, [0, 1, 2], 8)) == 0


class TestClusterBundles:
    @pytest.mark.parametrize("window", [(0.0, TWO_PI), (TWO_PI, 2 * TWO_PI)])
    def test_constant_field_bundles_are_trivial(self, constant_geometry, window):
        bundle = cluster_bundle(constant_geometry, window)
        assert fhs_chern(bundle) == 0
        assert riemann_roch(3, 1, bundle) == 3

    def test_varying_field_lowest_bundle(self, varying_geometry):
        bundle = cluster_bundle(varying_geometry, (0.0, TWO_PI))
        assert riemann_roch(5, varying_geometry.degrees[0], bundle) == 5

    def test_riemann_roch_with_given_chern_number(self, constant_geometry):
        bundle = cluster_bundle(constant_geometry, (0.0, TWO_PI))
        assert riemann_roch(4, 2, bundle, c1=-1) == 7

    def test_four_torus_unsupported(self):
        matrices = np.tile(np.diag([1.0, 0.0]).astype(complex), (16, 1, 1))
        with pytest.raises(UnsupportedDimension):
            chern_data(ProjectorField(matrices=matrices, shape=(2, 2, 2, 2), rank=1))
        with pytest.raises(UnsupportedDimension):
            riemann_roch(1, 1, ProjectorField(matrices=matrices, shape=(2, 2, 2, 2), rank=1, half_dim=2))
