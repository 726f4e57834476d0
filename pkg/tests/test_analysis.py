import numpy as np
import pytest

from landaulab.analysis import (
    cluster_tolerance,
    component_windows,
    counting_vs_rr,
    detect_clusters,
    distance_scaling,
    endpoint_defect,
    endpoint_scaling,
    fit_power_law,
    functional_calculus_diag,
    garding_bounds,
    gaussian_profile_fit,
    global_weyl,
    local_weyl,
    local_weyl_field,
    max_distance,
    model_kernel_slice,
    projector_kernel_slice,
    projector_trace,
    toeplitz_bounds,
    window_extremes,
)
from landaulab.eigensolver import EigenSystem, dense_eig
from landaulab.errors import (
    AboveCertifiedCutoff,
    CutoffInsideSigma,
    EndpointOnSigmaY,
    InsufficientKGrid,
    InsufficientSamples,
    LambdaOnSigma,
    SupportExceedsCertifiedRange,
    UsageError,
)
from landaulab.intervals import IntervalUnion
from landaulab.lattice import assemble_laplacian, build_gauge
from landaulab.model_spectrum import sigma_envelope
from landaulab.types import KernelSlice

TWO_PI = 2.0 * np.pi


def _synthetic(k: int, eigenvalues, cutoff: float = 5.0) -> EigenSystem:
    values = np.asarray(eigenvalues, dtype=float)
    return EigenSystem(
        k=k, eigenvalues=np.sort(values), vectors=None, residuals=np.zeros(len(values)), cutoff=cutoff, weights=np.ones(4)
    )


@pytest.fixture(scope="module")
def lowest_cluster(constant_geometry):
    operator = assemble_laplacian(build_gauge(constant_geometry, 2), constant_geometry)
    return dense_eig(operator, cutoff=TWO_PI)


@pytest.fixture(scope="module")
def constant_envelope(constant_geometry):
    return sigma_envelope(constant_geometry, 3 * TWO_PI)


class TestClusters:
    def test_detect_clusters(self):
        envelope = IntervalUnion([(1.0, 1.05), (3.0, 3.05)])
        es = _synthetic(2, [1.0, 1.05, 3.0, 3.1, 2.0])
        report = detect_clusters(es, envelope, 4.0, 0.1, predicted=[2, 2])
        assert report.counts == [2, 2]
        assert report.orphans == [2.0]
        assert not report.contained
        assert report.total == 5
        assert report.components[1].max_distance == pytest.approx(0.05)
        rows = counting_vs_rr(report, [2, 2])
        assert [row.passed for row in rows] == [True, True, False]
        assert rows[2].label == "gap 0"

    def test_cutoff_checks(self):
        envelope = IntervalUnion([(1.0, 1.05), (3.0, 3.05)])
        es = _synthetic(2, [1.0, 3.0])
        with pytest.raises(CutoffInsideSigma):
            detect_clusters(es, envelope, 3.02, 0.1)
        with pytest.raises(AboveCertifiedCutoff):
            detect_clusters(es, envelope, 6.0, 0.1)

    def test_max_distance(self):
        envelope = IntervalUnion([(1.0, 1.05), (3.0, 3.05)])
        assert max_distance(_synthetic(2, [1.0, 2.0, 3.0]), envelope, 4.0) == pytest.approx(0.95)
        assert max_distance(_synthetic(2, [4.5]), envelope, 4.0) == 0.0

    def test_tolerance_is_capped_by_gaps(self, constant_geometry, constant_envelope):
        tolerance = cluster_tolerance(constant_geometry, 2, constant_envelope)
        assert 0.0 < tolerance <= 0.45 * constant_envelope.min_gap()

    def test_lattice_cluster(self, constant_geometry, constant_envelope, lowest_cluster):
        tolerance = cluster_tolerance(constant_geometry, 2, constant_envelope)
        report = detect_clusters(lowest_cluster, constant_envelope, TWO_PI, tolerance)
        assert report.counts == [2]
        assert report.contained

    def test_component_windows(self):
        windows = component_windows(IntervalUnion([(1.0, 1.0), (3.0, 3.0)]), 5.0)
        assert windows == [(0.5, 2.0), (2.0, 4.0)]


class TestScaling:
    def test_fit_power_law(self):
        ks = [4, 6, 8, 12]
        fit = fit_power_law(ks, [3.0 / k for k in ks])
        assert fit.slope == pytest.approx(-1.0)
        assert fit.intercept == pytest.approx(np.log10(3.0))
        assert fit.residual == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("ks", [[4, 6, 8], [4, 4, 6, 8]])
    def test_insufficient_k_grid(self, ks):
        with pytest.raises(InsufficientKGrid):
            fit_power_law(ks, [1.0] * len(ks))

    def test_distance_scaling(self):
        systems = [_synthetic(k, [1.0 + 2.0 / k**0.5]) for k in (16, 25, 36, 49)]
        fit = distance_scaling(systems, [IntervalUnion([(1.0, 1.0)])] * 4, 1.9)
        assert fit.slope == pytest.approx(-0.5)
        assert fit.measurable

    def test_distance_scaling_per_run_envelope(self):
        ks = (4, 6, 8, 12)
        systems = [_synthetic(k, [1.0]) for k in ks]
        envelopes = [IntervalUnion([(1.0 + 1.0 / k, 2.0)]) for k in ks]
        assert distance_scaling(systems, envelopes, 3.0).slope == pytest.approx(-1.0)

    def test_envelope_count_must_match(self):
        systems = [_synthetic(k, [1.0]) for k in (4, 6, 8, 12)]
        with pytest.raises(UsageError):
            distance_scaling(systems, [IntervalUnion([(1.0, 2.0)])], 3.0)

    def test_contained_spectrum_is_not_measurable(self):
        systems = [_synthetic(k, [1.5]) for k in (4, 6, 8, 12)]
        fit = distance_scaling(systems, [IntervalUnion([(1.0, 2.0)])] * 4, 3.0)
        assert fit.values == [0.0] * 4
        assert not fit.measurable

    def test_endpoint_defect(self):
        envelope = IntervalUnion([(1.0, 2.0), (3.0, 3.5), (4.5, 6.0)])
        es = _synthetic(2, [1.1, 1.5, 1.8, 3.2, 3.3, 4.9], cutoff=5.0)
        assert endpoint_defect(es, envelope, 5.0) == pytest.approx(0.2)
        assert endpoint_defect(_synthetic(2, []), envelope, 5.0) == 0.0

    def test_endpoint_scaling(self):
        ks = (4, 6, 8, 12)
        systems = [_synthetic(k, [1.0 + 0.5 / k, 1.5, 2.0 - 1.0 / k], cutoff=4.0) for k in ks]
        fit = endpoint_scaling(systems, [IntervalUnion([(1.0, 2.0)])] * 4, 4.0)
        np.testing.assert_allclose(fit.values, [1.0 / k for k in ks])
        assert fit.slope == pytest.approx(-1.0)
        assert fit.measurable


class TestWeyl:
    def test_global_weyl(self, constant_geometry, constant_envelope, lowest_cluster):
        comparison = global_weyl(lowest_cluster, constant_geometry, TWO_PI, constant_envelope)
        assert comparison.count == 2
        assert comparison.ratio == pytest.approx(1.0)

    def test_undefined_ratio(self, constant_geometry, constant_envelope, lowest_cluster):
        comparison = global_weyl(lowest_cluster, constant_geometry, 0.5 * np.pi, constant_envelope)
        assert not comparison.defined
        assert np.isnan(comparison.ratio)

    def test_lambda_on_sigma(self, constant_geometry, constant_envelope, lowest_cluster):
        with pytest.raises(LambdaOnSigma):
            global_weyl(lowest_cluster, constant_geometry, constant_envelope[0][0], constant_envelope)

    def test_projector_trace(self, lowest_cluster):
        assert projector_trace(lowest_cluster, (0.0, TWO_PI)) == pytest.approx(2.0)

    @pytest.mark.parametrize("site", [0, 37, 255])
    def test_local_weyl(self, constant_geometry, lowest_cluster, site: int):
        value = local_weyl(lowest_cluster, constant_geometry, site, 0.0, TWO_PI)
        assert value.multiplicity == 1
        assert value.rescaled == pytest.approx(1.0, rel=1e-6)
        assert value.value == pytest.approx(value.prediction, rel=1e-6)

    def test_local_weyl_field(self, constant_geometry, lowest_cluster):
        field = local_weyl_field(lowest_cluster, 0.0, TWO_PI)
        assert field.shape == (constant_geometry.sites,)
        np.testing.assert_allclose(field, field[0], rtol=1e-6)

    def test_endpoint_on_model_level(self, constant_geometry, lowest_cluster):
        with pytest.raises(EndpointOnSigmaY):
            local_weyl(lowest_cluster, constant_geometry, 0, 0.0, np.pi)


class TestKernel:
    def test_gaussian_fit(self):
        k = 10
        t = 0.4 * np.arange(10)
        kernel_slice = KernelSlice(
            k=k, site=0, direction=[1, 0], offsets=[[0.0, 0.0]] * len(t), norms=list(t / k), values=list(0.3 * np.exp(-0.25 * t))
        )
        fit = gaussian_profile_fit(kernel_slice)
        assert fit.coefficient == pytest.approx(0.25)
        assert fit.peak == pytest.approx(0.3)
        assert fit.samples == 9
        assert fit.residual == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize(
        "k, norms",
        [(10, [0.0, 0.1, 0.2, 0.3]), (0, [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]), (10, [0.1, 0.2, 0.3])],
    )
    def test_insufficient_samples(self, k: int, norms):
        kernel_slice = KernelSlice(
            k=k, site=0, direction=[1, 0], offsets=[[0.0, 0.0]] * len(norms), norms=norms, values=[1.0] * len(norms)
        )
        with pytest.raises(InsufficientSamples):
            gaussian_profile_fit(kernel_slice)

    def test_lattice_slice_starts_on_diagonal(self, constant_geometry, lowest_cluster):
        kernel_slice = projector_kernel_slice(lowest_cluster, constant_geometry, (0.0, TWO_PI), 0, [1, 0], 2.0)
        assert kernel_slice.norms[0] == 0.0
        assert kernel_slice.values[0] == pytest.approx(1.0 / np.pi, rel=1e-8)
        assert kernel_slice.values[1] < kernel_slice.values[0]

    def test_model_slice(self, planar_frame):
        offsets = np.array([[0.0, 0.0], [0.1, 0.0]])
        values = model_kernel_slice(planar_frame, (0.0, TWO_PI), offsets, 4)
        expected = 4.0 / TWO_PI * np.exp(-0.25 * 4 * planar_frame.norm_sq(offsets))
        np.testing.assert_allclose(values, expected)


class TestBounds:
    def test_functional_calculus(self, constant_geometry, constant_envelope, lowest_cluster):
        value = functional_calculus_diag(lowest_cluster, constant_geometry, np.ones_like, 5, TWO_PI, constant_envelope)
        assert value.model == pytest.approx(1.0)
        assert value.lattice == pytest.approx(1.0, rel=1e-8)

    @pytest.mark.parametrize("support_end", [np.pi, 3 * np.pi])
    def test_support_outside_certified_range(self, constant_geometry, constant_envelope, lowest_cluster, support_end):
        with pytest.raises(SupportExceedsCertifiedRange):
            functional_calculus_diag(lowest_cluster, constant_geometry, np.ones_like, 0, support_end, constant_envelope)

    def test_window_extremes(self, varying_geometry):
        lower, upper = window_extremes(varying_geometry, (0.0, TWO_PI))
        assert lower == pytest.approx(0.85 * np.pi)
        assert upper == pytest.approx(1.15 * np.pi)
        assert np.all(np.isnan(window_extremes(varying_geometry, (7.0, 8.0))))

    def test_garding_bounds(self, constant_geometry, lowest_cluster):
        check = garding_bounds(lowest_cluster, constant_geometry, (0.0, TWO_PI), 0.2)
        assert check.passed
        assert len(check.values) == 2

    def test_toeplitz_bounds(self, constant_geometry, lowest_cluster):
        multiplier = np.cos(TWO_PI * constant_geometry.points[:, 0])
        check = toeplitz_bounds(lowest_cluster, (0.0, TWO_PI), multiplier, 1e-10)
        assert check.passed
        constant = toeplitz_bounds(lowest_cluster, (0.0, TWO_PI), np.full(constant_geometry.sites, 2.0), 1e-10)
        np.testing.assert_allclose(constant.values, 2.0)
