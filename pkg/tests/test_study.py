import json

import numpy as np
import pytest

from wongzakai.catalog import additive_heat
from wongzakai.errors import ArgumentError, NumericalError, StructuralError
from wongzakai.hilbert import SpaceDescriptor
from wongzakai.noise import BrownianLattice, sample_increments
from wongzakai.schemes import Trajectory, simulate
from wongzakai.study import (
    StudySpec,
    fit_rate,
    path_errors,
    run_study,
    summarize,
    sup_error_moment,
    synthetic_report,
)


def traj(states, times=None, space=None):
    states = np.asarray(states, dtype=float)
    if states.ndim == 1:
        states = states[:, None]
    times = np.linspace(0, 1, len(states)) if times is None else times
    space = SpaceDescriptor.spectral(np.zeros(states.shape[1])) if space is None else space
    return Trajectory(times, states, "x", 1, space)


class TestSupErrorMoment:
    def test_identical(self):
        a = traj(np.random.default_rng(0).standard_normal((11, 3)))
        assert sup_error_moment(a, a, 2) == 0.0

    def test_constant_offset(self):
        s = np.random.default_rng(0).standard_normal((11, 3))
        off = s.copy()
        off[:, 1] += 0.4
        assert sup_error_moment(traj(s), traj(off), 1) == pytest.approx(0.16, rel=1e-14)

    def test_parabola(self):
        t = np.linspace(0, 1, 1001)  # contains t = 1/2
        assert sup_error_moment(traj(t, t), traj(t**2, t), 1) == pytest.approx(0.0625, rel=1e-14)

    def test_grid_mismatch(self):
        with pytest.raises(StructuralError):
            sup_error_moment(traj(np.zeros(5)), traj(np.zeros(6)), 2)

    def test_space_mismatch(self):
        a = traj(np.zeros((5, 2)))
        b = traj(np.zeros((5, 2)), space=SpaceDescriptor.spectral([-1.0, -2.0]))
        with pytest.raises(StructuralError):
            sup_error_moment(a, b, 2)

    def test_arrays(self):
        assert sup_error_moment(np.zeros((3, 2)), np.array([[0, 0], [3, 4], [0, 0]]), 1.5) == pytest.approx(125.0)


class TestFitRate:
    def test_exact_power_law(self):
        ms = [4, 8, 16, 32]
        slope, intercept, resid = fit_rate([(m, 8 / m, 0.0) for m in ms])
        assert slope == pytest.approx(-1.0, abs=1e-12)
        assert intercept == pytest.approx(np.log(8), abs=1e-12)
        assert resid < 1e-12

    def test_inverse_square(self):
        slope, _, _ = fit_rate([(m, 5 / m**2, 0.01 * 5 / m**2) for m in (2, 4, 8, 16)])
        assert slope == pytest.approx(-2.0, abs=1e-12)

    def test_noisy(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            ms = np.array([4, 8, 16, 32, 64])
            e = (1 + 0.01 * rng.standard_normal(5)) / ms
            slope, _, _ = fit_rate([(m, v, 0.01 * v) for m, v in zip(ms, e)])
            assert -1.05 <= slope <= -0.95

    def test_weights_favor_precise_points(self):
        # an outlier with a large relative error barely moves the fit
        pts = [(4, 1 / 4, 1e-4), (8, 1 / 8, 1e-4), (16, 1 / 16 * 3, 10.0), (32, 1 / 32, 1e-5)]
        slope, _, _ = fit_rate(pts)
        assert slope == pytest.approx(-1.0, abs=1e-3)

    def test_matches_statsmodels_wls(self):
        import statsmodels.api as sm

        ms = np.array([4, 8, 16, 32, 64.0])
        e = np.array([0.3, 0.11, 0.07, 0.02, 0.012])
        se = np.array([0.05, 0.01, 0.02, 0.002, 0.003])
        slope, intercept, _ = fit_rate(list(zip(ms, e, se)))
        res = sm.WLS(np.log(e), sm.add_constant(np.log(ms)), weights=(e / se) ** 2).fit()
        assert slope == pytest.approx(res.params[1], rel=1e-10)
        assert intercept == pytest.approx(res.params[0], rel=1e-10)

    def test_too_few(self):
        with pytest.raises(ArgumentError):
            fit_rate([(4, 1.0, 0.1), (8, 0.5, 0.1)])

    def test_nonpositive(self):
        with pytest.raises(ArgumentError):
            fit_rate([(4, 1.0, 0.1), (8, 0.0, 0.1), (16, 0.2, 0.1)])


class TestStudySpec:
    def test_p_one_rejected(self):
        with pytest.raises(ArgumentError, match="untestable"):
            StudySpec("additive_heat", p=1.0).validate()

    def test_m_divides(self):
        with pytest.raises(ArgumentError):
            StudySpec("additive_heat", m_list=[4, 6, 8], m_fine=64).validate()

    def test_reference_separation(self):
        with pytest.raises(ArgumentError):
            StudySpec("additive_heat", m_list=[4, 8, 32], m_fine=64).validate()

    def test_increasing(self):
        with pytest.raises(ArgumentError):
            StudySpec("additive_heat", m_list=[8, 4, 16], m_fine=64).validate()


class TestRunStudy:
    def test_degenerate_without_noise(self):
        spec = StudySpec("additive_heat", params={"amplitude": 0.0}, m_list=[4, 8, 16], m_fine=64, paths=4,
                         pair="WZ-vs-EM")
        rep = run_study(spec)
        assert rep.degenerate and rep.slope is None
        assert np.all(rep.estimates <= 1e-32)

    def test_additive_em_equals_reference(self):
        # constant volatility and zero drift: freezing per coarse cell changes nothing, and the
        # stochastic convolution is the shared fine-lattice sum, so EM is the reference at every m
        spec = StudySpec("additive_heat", m_list=[4, 8, 16, 32, 64], m_fine=256, paths=20, pair="EM-vs-ref")
        rep = run_study(spec)
        np.testing.assert_array_equal(rep.estimates, 0.0)
        assert rep.degenerate

    def test_additive_wz_monotone(self):
        spec = StudySpec("additive_heat", m_list=[4, 8, 16, 32, 64], m_fine=256, paths=200, pair="WZ-vs-ref")
        est = run_study(spec).estimates
        assert np.all(np.diff(est) < 0)

    def test_matches_direct_computation(self):
        spec = StudySpec("nemytskii_heat", params={"modes": 4}, m_list=[4, 8, 16], m_fine=64, paths=6,
                         chunk_size=4)
        errs = path_errors(spec)
        from wongzakai.catalog import build_model

        model = build_model("nemytskii_heat", modes=4)
        inc = sample_increments(0, range(6), model.r, 1.0, 64)
        ref = simulate("ref", model, model.params["x0"], inc, 1.0)
        wz = simulate("wz", model, model.params["x0"], inc, 1.0, 8)
        direct = [sup_error_moment(wz[i], ref[i], 2.0, model.space) for i in range(6)]
        np.testing.assert_allclose(errs[:, 1], direct, rtol=1e-15)

    def test_stderr_definition(self):
        spec = StudySpec("additive_heat", m_list=[4, 8, 16], m_fine=64, paths=3)
        errs = np.array([[1.0, 2.0, 3.0], [2.0, 2.0, 5.0], [3.0, 2.0, 4.0]])
        rep = summarize(spec, errs)
        assert rep.rows[0]["estimate"] == 2.0
        assert rep.rows[0]["stderr"] == pytest.approx(np.std([1, 2, 3], ddof=1) / np.sqrt(3))
        assert rep.rows[1]["stderr"] == 0.0

    def test_worker_count_invariance(self):
        spec = StudySpec("nemytskii_heat", params={"modes": 4}, m_list=[4, 8, 16], m_fine=64, paths=30,
                         chunk_size=7)
        a = run_study(spec, workers=1).to_dict()
        b = run_study(spec, workers=3).to_dict()
        assert a["rows"] == b["rows"] and a["slope"] == b["slope"]

    def test_same_spec_same_report(self):
        spec = StudySpec("additive_heat", m_list=[4, 8, 16], m_fine=64, paths=10)
        assert run_study(spec).rows == run_study(spec).rows

    def test_stderr_shrinks_with_paths(self):
        base = dict(model="additive_heat", m_list=[4, 8, 16], m_fine=64, pair="WZ-vs-ref")
        ratios = []
        for seed in range(3):
            a = run_study(StudySpec(paths=200, base_seed=seed, **base)).rows[0]["stderr"]
            b = run_study(StudySpec(paths=400, base_seed=seed, **base)).rows[0]["stderr"]
            ratios.append(b / a)
        assert abs(np.mean(ratios) - 1 / np.sqrt(2)) < 0.2 / np.sqrt(2)

    def test_monotone_coupling_per_path(self):
        spec = StudySpec("additive_heat", m_list=[4, 16, 64], m_fine=256, paths=100, pair="WZ-vs-ref")
        errs = path_errors(spec)
        frac = np.mean(np.all(np.diff(errs, axis=1) <= 0, axis=1))
        assert frac >= 0.9

    def test_blowup_names_seed_and_m(self):
        spec = StudySpec("geometric", params={"sigma": 2000.0}, m_list=[4, 8, 16], m_fine=64, paths=2, base_seed=5)
        with pytest.raises(NumericalError) as info:
            run_study(spec)
        # the reference (level m_fine) is integrated first and fails first
        assert info.value.seed == 5 and info.value.m == 64 and info.value.path in (0, 1)

    def test_outputs(self, tmp_path):
        spec = StudySpec("additive_heat", m_list=[4, 8, 16], m_fine=64, paths=5)
        rep = run_study(spec)
        rep.to_json(tmp_path / "r.json")
        rep.to_csv(tmp_path / "r.csv")
        data = json.loads((tmp_path / "r.json").read_text())
        assert data["spec"]["paths"] == 5 and "version" in data["metadata"]
        lines = (tmp_path / "r.csv").read_text().splitlines()
        assert lines[0] == "m,delta_m,estimate,stderr,paths"
        assert len(lines) == 4


class TestSynthetic:
    def test_slope(self):
        rep = synthetic_report(StudySpec("additive_heat", m_list=[4, 8, 16, 32], m_fine=256), 3.0)
        assert rep.slope == pytest.approx(-1.0, abs=1e-6)
