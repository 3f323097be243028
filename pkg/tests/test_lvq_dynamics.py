"""LVQ1 order-parameter dynamics under a drifting class prior."""

import numpy as np
import pytest

from concept_drift_dynamics.modules.gauss_kernel import GaussianSpec, quad_expect
from concept_drift_dynamics.modules.lvq_dynamics import (
    ConstantPrior,
    LinearPrior,
    LvqModel,
    OscillatingPrior,
    SuddenPrior,
    build_schedule,
    class_errors,
    error_measures,
    lvq1_drives,
    lvq_observables,
    lvq_ode_rhs,
    prior_at,
    schedule_to_dict,
)
from concept_drift_dynamics.utils.errors import ConfigError, DegenerateIndicatorError, DomainError
from concept_drift_dynamics.utils.order_parameters import OrderParameterState
from oracles import sample_expect

INIT = OrderParameterState(0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0)
GENERIC = OrderParameterState.from_matrices([[0.5, 0.1], [0.2, 0.4]], [[0.9, 0.2], [0.2, 0.7]])


def _random_state(seed):
    rng = np.random.default_rng(seed)
    R = rng.uniform(-0.5, 1.0, (2, 2))
    A = rng.normal(0.0, 0.5, (2, 2))
    return OrderParameterState.from_matrices(R, R @ R.T + A @ A.T + 0.05 * np.eye(2))


def _cluster_gaussian(state, lam, v, m):
    """Mean and covariance of (h1, h2, b1, b2) for examples of cluster m."""
    mean = lam * np.array([state.R[0, m], state.R[1, m], float(m == 0), float(m == 1)])
    return mean, v * np.block([[state.Q, state.R], [state.R.T, np.eye(2)]])


class TestSchedules:
    """Class-1 prior p1(alpha)."""

    def test_constant(self):
        assert prior_at(ConstantPrior(0.3), 123.0) == 0.3

    def test_linear_ramp(self):
        schedule = LinearPrior(alpha_o=20.0, alpha_end=200.0, p_max=0.8)
        assert prior_at(schedule, 0.0) == 0.5
        assert prior_at(schedule, 20.0) == 0.5
        assert prior_at(schedule, 110.0) == pytest.approx(0.65, abs=1e-15)
        assert prior_at(schedule, 500.0) == 0.8
        assert schedule.discontinuities() == (20.0, 200.0)

    def test_sudden_switch(self):
        schedule = SuddenPrior(alpha_o=100.0, p_max=0.75)
        assert prior_at(schedule, 100.0) == 0.25
        assert prior_at(schedule, 100.5) == 0.75

    def test_oscillating(self):
        schedule = OscillatingPrior(period=50.0, p_max=0.8)
        assert prior_at(schedule, 0.0) == pytest.approx(0.8, abs=1e-15)
        assert prior_at(schedule, 25.0) == pytest.approx(0.2, abs=1e-15)
        assert prior_at(schedule, 50.0) == pytest.approx(0.8, abs=1e-15)

    def test_negative_time(self):
        with pytest.raises(DomainError):
            prior_at(ConstantPrior(), -1.0)

    @pytest.mark.parametrize(
        "raw",
        [
            {"kind": "linear", "alpha_o": 20, "alpha_end": 200, "p_max": 0.8},
            {"kind": "sudden", "alpha_o": 50, "p_max": 0.9},
            {"kind": "oscillating", "period": 30, "p_max": 0.7},
            {"kind": "constant", "p1": 0.4},
        ],
    )
    def test_dict_form_is_stable(self, raw):
        schedule = build_schedule(raw)
        assert build_schedule(schedule_to_dict(schedule)) == schedule

    @pytest.mark.parametrize(
        "raw",
        [
            {"kind": "stepwise"},
            {"alpha_o": 1.0},
            {"kind": "sudden", "alpha_o": 10.0, "period": 4.0},
            {"kind": "linear", "p_max": 1.0},
            {"kind": "linear", "alpha_o": 50.0, "alpha_end": 40.0},
            {"kind": "oscillating", "period": 0.0},
        ],
    )
    def test_invalid_schedules(self, raw):
        with pytest.raises(ConfigError):
            build_schedule(raw)


class TestDrives:
    """Winner-indicator averages."""

    def test_indicators_partition_each_cluster(self):
        drives = lvq1_drives(GENERIC, 0.5, 1.0, 0.4, 0.3)
        np.testing.assert_allclose(drives.f_sq.sum(axis=1), [1.0, 1.0], atol=1e-12)
        np.testing.assert_array_equal(drives.f_cross, [0.0, 0.0])

    def test_signs_follow_class_labels(self):
        drives = lvq1_drives(GENERIC, 0.5, 1.0, 0.4, 0.4)
        np.testing.assert_allclose(drives.f_mean[0], [drives.f_sq[0, 0], -drives.f_sq[0, 1]], atol=1e-15)
        np.testing.assert_allclose(drives.f_mean[1], [-drives.f_sq[1, 0], drives.f_sq[1, 1]], atol=1e-15)

    @pytest.mark.slow
    @pytest.mark.parametrize("state", [GENERIC, _random_state(3), _random_state(4)])
    def test_every_component_matches_split_quadrature(self, state):
        lam, variances = 1.0, (0.4, 0.25)
        drives = lvq1_drives(state, 0.5, lam, *variances)
        Q = state.Q
        # prototype 1 is closer where (Q22 - Q11) + 2 (h1 - h2) > 0
        half_spaces = [(Q[1, 1] - Q[0, 0], np.array([2.0, -2.0, 0.0, 0.0])), (Q[0, 0] - Q[1, 1], np.array([-2.0, 2.0, 0.0, 0.0]))]
        for m, v in enumerate(variances):
            spec = GaussianSpec(*_cluster_gaussian(state, lam, v, m))
            for i, indicator in enumerate(half_spaces):
                psi = 1.0 if i == m else -1.0
                mass = quad_expect(lambda p: np.ones(len(p)), spec, order=36, indicator=indicator)
                assert drives.f_sq[m, i] == pytest.approx(mass, abs=1e-7)
                assert drives.f_mean[m, i] == pytest.approx(psi * mass, abs=1e-7)
                for k in range(2):
                    h_k = quad_expect(lambda p, k=k: p[:, k], spec, order=36, indicator=indicator)
                    b_k = quad_expect(lambda p, k=k: p[:, 2 + k], spec, order=36, indicator=indicator)
                    assert drives.hf[m, i, k] == pytest.approx(psi * h_k, abs=1e-7)
                    assert drives.bf[m, i, k] == pytest.approx(psi * b_k, abs=1e-7)

    def test_coinciding_prototypes(self):
        state = OrderParameterState(0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0)
        with pytest.raises(DegenerateIndicatorError):
            lvq1_drives(state, 0.5, 1.0, 0.4, 0.4)


class TestOdeRhs:
    """Right-hand side at the untrained state, where every average is elementary."""

    def test_untrained_state(self):
        expected = [0.25, -0.25, -0.25, 0.25, 0.2, 0.0, 0.2]
        np.testing.assert_allclose(lvq_ode_rhs(INIT, 0.0, LvqModel()), expected, atol=1e-12)

    def test_learning_rate_scaling(self):
        # R gains eta * F while the diagonal noise term scales with eta^2
        rhs = lvq_ode_rhs(INIT, 0.0, LvqModel(eta=0.5))
        np.testing.assert_allclose(rhs, [0.125, -0.125, -0.125, 0.125, 0.05, 0.0, 0.05], atol=1e-12)

    def test_weight_decay(self):
        base = lvq_ode_rhs(GENERIC, 0.0, LvqModel())
        decayed = lvq_ode_rhs(GENERIC, 0.0, LvqModel(gamma=0.1))
        x = GENERIC.as_array()
        np.testing.assert_allclose(decayed - base, np.concatenate([-0.1 * x[:4], -0.2 * x[4:]]), atol=1e-14)

    def test_uses_prior_at_alpha(self):
        model = LvqModel(schedule=SuddenPrior(alpha_o=10.0, p_max=0.75))
        before = lvq_ode_rhs(GENERIC, 5.0, model)
        after = lvq_ode_rhs(GENERIC, 15.0, model)
        assert not np.allclose(before, after)
        np.testing.assert_allclose(before, lvq_ode_rhs(GENERIC, 0.0, LvqModel(schedule=ConstantPrior(0.25))), atol=1e-15)

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", [5, 6, 7])
    def test_matches_one_step_simulation(self, seed):
        n, samples, eta, p1 = 2000, 800_000, 1.0, 0.6
        model = LvqModel(v1=0.4, v2=0.25, eta=eta, schedule=ConstantPrior(p1))
        state = _random_state(seed)
        R, Q = state.R, state.Q
        rng = np.random.default_rng(seed)

        # Frame (B1, B2, e3, e4) spanning both prototypes; the other N - 4 input
        # coordinates only enter |xi|^2, as a scaled chi-square variable.
        W = np.hstack([R, np.linalg.cholesky(Q - R @ R.T)])
        labels = np.where(rng.random(samples) < p1, 0, 1)
        variances = np.where(labels == 0, model.v1, model.v2)
        xi = model.lam * np.eye(4)[labels] + np.sqrt(variances)[:, None] * rng.standard_normal((samples, 4))
        xi_sq = np.sum(xi**2, axis=1) + variances * rng.chisquare(n - 4, samples)
        h = xi @ W.T
        winner = np.argmin(np.diag(Q) - 2.0 * h, axis=1)
        psi = np.where(winner == labels, 1.0, -1.0)

        rows = np.arange(samples)
        h_win, h_other, q_win = h[rows, winner], h[rows, 1 - winner], Q[winner, winner]
        dR = np.zeros((samples, 2, 2))
        dR[rows, winner] = eta * psi[:, None] * (xi[:, :2] - R[winner])
        dQ = np.zeros((samples, 2))
        dQ[rows, winner] = 2.0 * eta * psi * (h_win - q_win) + eta**2 * (xi_sq - 2.0 * h_win + q_win) / n
        dQ12 = eta * psi * (h_other - Q[0, 1])
        # N times the one-step change of every order parameter
        scaled = np.column_stack([dR[:, 0, 0], dR[:, 0, 1], dR[:, 1, 0], dR[:, 1, 1], dQ[:, 0], dQ12, dQ[:, 1]])

        mean = scaled.mean(axis=0)
        sem = scaled.std(axis=0, ddof=1) / np.sqrt(samples)
        z = (mean - lvq_ode_rhs(state, 0.0, model)) / sem
        assert np.all(np.abs(z) <= 4.0), z

    @pytest.mark.parametrize("field", ["lam", "v1", "v2", "eta"])
    def test_parameters_must_be_positive(self, field):
        with pytest.raises(ConfigError):
            LvqModel(**{field: 0.0})

    def test_negative_weight_decay(self):
        with pytest.raises(ConfigError):
            LvqModel(gamma=-0.01)


class TestErrors:
    """Class-wise, reference and tracking errors."""

    def test_untrained_prototypes_guess(self):
        assert class_errors(INIT, 1.0, 0.4, 0.4) == (0.5, 0.5)

    def test_class_errors_are_misassigned_mass(self):
        drives = lvq1_drives(GENERIC, 0.5, 1.0, 0.4, 0.25)
        eps1, eps2 = class_errors(GENERIC, 1.0, 0.4, 0.25)
        assert eps1 == pytest.approx(drives.f_sq[0, 1], abs=1e-14)
        assert eps2 == pytest.approx(drives.f_sq[1, 0], abs=1e-14)

    @pytest.mark.parametrize("state", [GENERIC, _random_state(3), _random_state(4)])
    def test_class_errors_match_misassignment_frequency(self, state):
        lam, variances = 1.0, (0.4, 0.25)
        errors = class_errors(state, lam, *variances)
        for m, v in enumerate(variances):

            def misassigned(p, m=m):
                # squared distances to the prototypes up to the common |xi|^2
                distances = np.diag(state.Q) - 2.0 * p[:, :2]
                return (np.argmin(distances, axis=1) != m).astype(float)

            assert errors[m] == pytest.approx(sample_expect(misassigned, *_cluster_gaussian(state, lam, v, m)), abs=4e-3)

    def test_error_measures(self):
        eps_g, eps_ref, eps_track = error_measures(0.1, 0.3, 0.75)
        assert eps_g == pytest.approx(0.15)
        assert eps_ref == pytest.approx(0.2)
        assert eps_track == eps_g

    def test_error_measures_range(self):
        with pytest.raises(DomainError):
            error_measures(1.2, 0.3, 0.5)

    def test_observables(self):
        model = LvqModel(schedule=LinearPrior())
        values = lvq_observables(GENERIC, 110.0, model)
        assert values["p1"] == pytest.approx(0.65)
        assert values["eps_track"] == pytest.approx(0.65 * values["eps1"] + 0.35 * values["eps2"])
        assert values["eps_ref"] == pytest.approx(0.5 * (values["eps1"] + values["eps2"]))
