import numpy as np
import pytest

from grnet.data import ExpressionDataset
from grnet.errors import DataError
from grnet.model import (GrnModel, LOGISTIC, StepConfig, free_run, load_model,
                         load_weight_matrix, one_step_predictions, rollout,
                         save_model, save_weight_matrix, sigmoid, step)

UNIT = StepConfig(1.0)


def dataset_from(values, times=None, normalized=True):
    values = np.asarray(values, dtype=float)
    n, T = values.shape
    times = np.arange(T, dtype=float) if times is None else times
    return ExpressionDataset([f"g{i}" for i in range(n)], times, values,
                             normalized=normalized)


def random_model(n, rng, scale=0.8):
    return GrnModel(rng.uniform(-scale, scale, (n, n)),
                    bias=rng.uniform(-0.3, 0.3, n))


class TestSigmoid:
    def test_midpoint(self):
        assert sigmoid(0.0) == 0.5

    def test_complement(self):
        for z in np.random.default_rng(0).normal(scale=4, size=50):
            assert sigmoid(z) + sigmoid(-z) == pytest.approx(1.0, abs=1e-15)

    def test_closed_form_value(self):
        # 1 / (1 + exp(-0.3)), frozen from direct evaluation
        assert sigmoid(0.3) == pytest.approx(0.574442516811659, abs=1e-14)

    def test_monotone_and_saturating(self):
        z = np.linspace(-800, 800, 2001)
        out = sigmoid(z)
        assert np.all(np.diff(out) >= 0)
        assert np.all((out >= 0) & (out <= 1))
        assert np.all(np.isfinite(out))


class TestStep:
    def test_zero_parameter_maps_to_half(self):
        m = GrnModel(np.zeros((3, 3)))
        out = step(m, np.array([0.1, 0.9, 0.4]), UNIT)
        assert np.allclose(out, 0.5, atol=0)

    def test_tiny_dt_keeps_state(self):
        rng = np.random.default_rng(1)
        m = random_model(4, rng)
        e = rng.random(4)
        out = step(m, e, StepConfig(1e-9))
        assert np.max(np.abs(out - e)) < 1e-8

    def test_hand_evaluated_component(self):
        w = np.array([[1.0, -1.0], [0.2, 0.1]])
        m = GrnModel(w, bias=np.array([0.1, 0.0]))
        out = step(m, np.array([0.6, 0.4]), UNIT)
        # net_1 = 0.6 - 0.4 + 0.1 = 0.3
        assert out[0] == pytest.approx(0.574442516811659, abs=1e-12)

    def test_unit_box_preserved_at_full_decay(self):
        rng = np.random.default_rng(2)
        m = random_model(5, rng, scale=3.0)
        states = rng.random((5, 1000))
        out = step(m, states, UNIT)
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_batch_matches_single(self):
        # batched and single-vector paths hit different BLAS kernels, so
        # agreement is to machine precision rather than bit-exact
        rng = np.random.default_rng(3)
        m = random_model(3, rng)
        states = rng.random((3, 8))
        batched = step(m, states, UNIT)
        for t in range(8):
            single = step(m, states[:, t], UNIT)
            assert np.max(np.abs(batched[:, t] - single)) < 1e-15

    def test_dimension_mismatch(self):
        m = GrnModel(np.zeros((2, 2)))
        with pytest.raises(ValueError, match="genes"):
            step(m, np.zeros(3), UNIT)

    def test_external_inputs_required(self):
        m = GrnModel(np.zeros((2, 2)), ext_weights=np.ones((2, 1)))
        with pytest.raises(ValueError, match="external"):
            step(m, np.zeros(2), UNIT)
        out = step(m, np.full(2, 0.5), UNIT, inputs=np.array([2.0]))
        assert np.allclose(out, sigmoid(2.0))

    def test_dt_above_tau_rejected(self):
        m = GrnModel(np.zeros((2, 2)), tau=np.array([1.0, 0.5]))
        with pytest.raises(DataError, match="time constant"):
            step(m, np.zeros(2), StepConfig(0.8))

    def test_finite_difference_sensitivities(self):
        # FD of the implementation against hand-coded derivative formulas
        rng = np.random.default_rng(4)
        n = 3
        w = rng.uniform(-1, 1, (n, n))
        bias = rng.uniform(-0.5, 0.5, n)
        tau = rng.uniform(1.0, 2.0, n)
        lam = rng.uniform(0.2, 1.0, n)
        e = rng.random(n)
        dt, h = 0.7, 1e-6
        cfg = StepConfig(dt)

        def f(mod, state):
            return step(mod, state, cfg)

        m = GrnModel(w, bias=bias, tau=tau, lam=lam)
        net = w @ e + bias
        a = dt / tau
        fp = sigmoid(net) * (1 - sigmoid(net))
        # d out_i / d e_j = a_i f'(net_i) w_ij + delta_ij (1 - lam_i a_i)
        jac = a[:, None] * fp[:, None] * w + np.diag(1 - lam * a)
        for j in range(n):
            ep, em = e.copy(), e.copy()
            ep[j] += h
            em[j] -= h
            fd = (f(m, ep) - f(m, em)) / (2 * h)
            assert np.max(np.abs(fd - jac[:, j])) < 1e-5
        # d out_i / d w_ij = a_i f'(net_i) e_j
        for i in range(n):
            for j in range(n):
                wp, wm = w.copy(), w.copy()
                wp[i, j] += h
                wm[i, j] -= h
                fd = (f(GrnModel(wp, bias=bias, tau=tau, lam=lam), e)
                      - f(GrnModel(wm, bias=bias, tau=tau, lam=lam), e)) / (2 * h)
                assert abs(fd[i] - a[i] * fp[i] * e[j]) < 1e-5
        # d out_i / d tau_i = -(dt / tau_i^2) f + lam_i dt / tau_i^2 e_i
        for i in range(n):
            tp, tm = tau.copy(), tau.copy()
            tp[i] += h
            tm[i] -= h
            fd = (f(GrnModel(w, bias=bias, tau=tp, lam=lam), e)
                  - f(GrnModel(w, bias=bias, tau=tm, lam=lam), e)) / (2 * h)
            expected = -(dt / tau[i] ** 2) * sigmoid(net[i]) \
                + lam[i] * dt / tau[i] ** 2 * e[i]
            assert abs(fd[i] - expected) < 1e-5
        # d out_i / d lam_i = -(dt / tau_i) e_i
        for i in range(n):
            lp, lm = lam.copy(), lam.copy()
            lp[i] += h
            lm[i] -= h
            fd = (f(GrnModel(w, bias=bias, tau=tau, lam=lp), e)
                  - f(GrnModel(w, bias=bias, tau=tau, lam=lm), e)) / (2 * h)
            assert abs(fd[i] - (-(dt / tau[i]) * e[i])) < 1e-5


class TestRollout:
    def test_single_step(self):
        rng = np.random.default_rng(5)
        m = random_model(3, rng)
        e0 = rng.random(3)
        traj = rollout(m, e0, 1, UNIT)
        assert traj.shape == (3, 2)
        assert np.array_equal(traj[:, 0], e0)
        assert np.array_equal(traj[:, 1], step(m, e0, UNIT))

    def test_zero_parameter_fixed_point(self):
        m = GrnModel(np.zeros((4, 4)))
        traj = rollout(m, np.random.default_rng(6).random(4), 5, UNIT)
        assert np.all(traj[:, 1:] == 0.5)

    def test_two_stage_composition_bit_identical(self):
        rng = np.random.default_rng(7)
        m = random_model(3, rng)
        e0 = rng.random(3)
        full = rollout(m, e0, 10, UNIT)
        first = rollout(m, e0, 4, UNIT)
        second = rollout(m, first[:, -1], 6, UNIT)
        assert np.array_equal(full, np.hstack([first, second[:, 1:]]))

    def test_stable_model_reaches_fixed_point(self):
        w = np.array([[0.5, 0.3], [-0.2, 0.4]])
        m = GrnModel(w, bias=np.array([0.1, -0.1]))
        traj = rollout(m, np.array([0.9, 0.1]), 200, UNIT)
        e_star = traj[:, -1]
        assert np.max(np.abs(step(m, e_star, UNIT) - e_star)) < 1e-9

    def test_external_series_too_short(self):
        m = GrnModel(np.zeros((2, 2)), ext_weights=np.ones((2, 1)))
        with pytest.raises(ValueError, match="cover"):
            rollout(m, np.zeros(2), 5, UNIT, inputs=np.zeros((1, 3)))

    def test_steps_minimum(self):
        m = GrnModel(np.zeros((2, 2)))
        with pytest.raises(ValueError, match="steps"):
            rollout(m, np.zeros(2), 0, UNIT)


class TestOneStepPredictions:
    def test_minimal_two_points(self):
        rng = np.random.default_rng(8)
        m = random_model(2, rng)
        ds = dataset_from(rng.random((2, 2)))
        preds = one_step_predictions(m, ds, UNIT)
        assert preds.shape == (2, 1)
        assert np.array_equal(preds[:, 0], step(m, ds.values[:, 0], UNIT))

    def test_self_consistency_on_model_data(self):
        rng = np.random.default_rng(9)
        m = random_model(3, rng)
        traj = rollout(m, rng.random(3), 12, UNIT)
        ds = dataset_from(traj)
        preds = one_step_predictions(m, ds, UNIT)
        assert np.allclose(preds, ds.values[:, 1:], atol=1e-15)

    def test_error_grows_with_perturbation(self):
        rng = np.random.default_rng(10)
        m = random_model(3, rng)
        ds = dataset_from(rollout(m, rng.random(3), 30, UNIT))
        sses = []
        for eps in (1e-3, 1e-2, 1e-1):
            w = m.weights.copy()
            w[0, 1] += eps
            preds = one_step_predictions(GrnModel(w, bias=m.bias), ds, UNIT)
            sses.append(float(np.sum((preds - ds.values[:, 1:]) ** 2)))
        assert sses[0] < sses[1] < sses[2]

    def test_requires_normalized(self):
        ds = dataset_from([[0.0, 2.0]], normalized=False)
        with pytest.raises(DataError, match="normalized"):
            one_step_predictions(GrnModel(np.zeros((1, 1))), ds)

    def test_per_interval_spacing_used(self):
        rng = np.random.default_rng(11)
        m = GrnModel(rng.uniform(-1, 1, (2, 2)), tau=np.array([2.0, 2.0]))
        times = np.array([0.0, 0.5, 2.0])
        ds = dataset_from(rng.random((2, 3)), times=times)
        preds = one_step_predictions(m, ds)
        first = step(m, ds.values[:, 0], StepConfig(0.5))
        second = step(m, ds.values[:, 1], StepConfig(1.5))
        assert np.allclose(preds[:, 0], first, atol=1e-15)
        assert np.allclose(preds[:, 1], second, atol=1e-15)


class TestFreeRun:
    def test_matches_rollout_on_uniform_grid(self):
        rng = np.random.default_rng(12)
        m = random_model(3, rng)
        ds = dataset_from(rng.random((3, 9)))
        traj = free_run(m, ds)
        direct = rollout(m, ds.values[:, 0], 8, UNIT)
        assert np.array_equal(traj, direct)


class TestModelIO:
    def test_model_round_trip(self, tmp_path):
        rng = np.random.default_rng(13)
        m = GrnModel(rng.normal(size=(3, 3)),
                     ext_weights=rng.normal(size=(3, 2)),
                     bias=rng.normal(size=3),
                     tau=rng.uniform(1, 2, 3),
                     lam=rng.uniform(0, 1, 3))
        path = tmp_path / "model.csv"
        save_model(m, ["a", "b", "c"], path)
        back, names = load_model(path)
        assert names == ["a", "b", "c"]
        for attr in ("weights", "ext_weights", "bias", "tau", "lam"):
            assert np.array_equal(getattr(back, attr), getattr(m, attr))

    def test_weight_matrix_round_trip(self, tmp_path):
        w = np.random.default_rng(14).normal(size=(4, 4))
        path = tmp_path / "w.csv"
        save_weight_matrix(["a", "b", "c", "d"], w, path)
        names, back = load_weight_matrix(path)
        assert names == ["a", "b", "c", "d"]
        assert np.array_equal(back, w)

    def test_missing_block_rejected(self, tmp_path):
        path = tmp_path / "w.csv"
        path.write_text("params,beta,tau,lambda,reserved\na,0,1,1,0\n")
        with pytest.raises(DataError, match="weights"):
            load_weight_matrix(path)

    def test_non_square_rejected(self, tmp_path):
        path = tmp_path / "w.csv"
        path.write_text("weights,a,b\na,0.1,0.2\n")
        with pytest.raises(DataError, match="square"):
            load_weight_matrix(path)


class TestModelValidation:
    def test_positive_tau_required(self):
        with pytest.raises(ValueError, match="positive"):
            GrnModel(np.zeros((2, 2)), tau=np.array([1.0, 0.0]))

    def test_non_negative_lambda_required(self):
        with pytest.raises(ValueError, match="non-negative"):
            GrnModel(np.zeros((2, 2)), lam=np.array([1.0, -0.1]))

    def test_finite_weights_required(self):
        w = np.zeros((2, 2))
        w[0, 0] = np.inf
        with pytest.raises(ValueError, match="non-finite"):
            GrnModel(w)

    def test_immutable_arrays(self):
        m = GrnModel(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            m.weights[0, 0] = 1.0
