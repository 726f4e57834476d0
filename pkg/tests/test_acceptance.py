import pytest

import landaulab.acceptance as acceptance
from landaulab.acceptance import (
    ACCEPTANCE_CRITERIA,
    LEVEL_CUTOFF,
    _guarded,
    _scaling_run,
    cluster_counting,
    constant_field,
    distance_scaling_criterion,
    gauge_and_solver_agreement,
    model_algebra,
    run_acceptance,
    varying_field,
    weyl_law,
)
from landaulab.analysis import distance_scaling, endpoint_scaling
from landaulab.eigensolver import SolverSettings
from landaulab.errors import ErrorCodes
from landaulab.geometry import build_geometry
from landaulab.types import CriterionResult


class TestFields:
    @pytest.mark.parametrize("factory", [constant_field, varying_field])
    @pytest.mark.parametrize("degree", [1, 2])
    def test_degrees(self, factory, degree: int):
        assert build_geometry(factory(12, degree)).degrees == (degree,)


class TestSuite:
    def test_ten_criteria(self):
        assert len(ACCEPTANCE_CRITERIA) == 10

    def test_selection(self, monkeypatch):
        def _criterion(number: int):
            return lambda solver: CriterionResult(number, f"criterion {number}", number != 2, {})

        monkeypatch.setattr(acceptance, "ACCEPTANCE_CRITERIA", [_criterion(n) for n in range(1, 4)])
        (result,) = run_acceptance(SolverSettings(), only=[2])
        assert (result.number, result.passed) == (2, False)
        assert [result.number for result in run_acceptance(SolverSettings())] == [1, 2, 3]

    def test_library_errors_fail_the_criterion(self):
        def broken(solver: SolverSettings):
            raise ErrorCodes()("USAGE", "broken criterion")

        result = _guarded(broken, 4, SolverSettings())
        assert not result.passed
        assert result.number == 4
        assert "broken criterion" in result.details["error"]


@pytest.mark.slow
class TestSlowCriteria:
    @pytest.mark.parametrize(
        "criterion",
        [cluster_counting, distance_scaling_criterion, weyl_law, model_algebra, gauge_and_solver_agreement],
    )
    def test_passes(self, criterion):
        result = criterion(SolverSettings())
        assert result.passed, result.details

    def test_varying_field_scaling_is_measurable(self):
        systems, envelopes = _scaling_run(lambda grid: varying_field(grid), (4, 6, 8, 12), SolverSettings(), 4)
        assert distance_scaling(systems, envelopes, LEVEL_CUTOFF).values == [0.0] * 4
        fit = endpoint_scaling(systems, envelopes, LEVEL_CUTOFF)
        assert fit.measurable
        assert all(value > 0 for value in fit.values)
        assert fit.slope <= -0.4
