"""Saddle-training tests: step gradients vs finite differences, oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cotflow.datasets import DatasetSpec, sample_batch
from cotflow.errors import DataError, NumericError
from cotflow.neural_ot import (
    GaussianSpec,
    NeuralOTModel,
    OTTrainResult,
    TrainConfig,
    gaussian_ot_map,
    init_neural_ot,
    map_descent_step,
    psi_ascent_step,
    train_neural_ot,
    transport_cost,
    transport_map,
)
from cotflow.nn import MlpParams, init_adam, init_mlp, mlp_forward
from cotflow.oracles import sinkhorn
from cotflow.rng import Rng


def identity_map_params(dim: int) -> MlpParams:
    return MlpParams((dim, dim), (np.eye(dim),), (np.zeros(dim),), "identity")


def zero_potential_params(dim: int, hidden: int = 3) -> MlpParams:
    return MlpParams(
        (dim, hidden, 1),
        (np.zeros((hidden, dim)), np.zeros((1, hidden))),
        (np.zeros(hidden), np.zeros(1)),
        "relu",
    )


def small_model(rng: Rng, dim: int = 2) -> NeuralOTModel:
    cfg = TrainConfig(map_hidden=(4,), psi_hidden=(4,), activation="tanh")
    return init_neural_ot(dim, cfg, rng)


def psi_batch_objective(model: NeuralOTModel, x, y) -> float:
    tx = mlp_forward(model.map_params, x)
    return float(
        mlp_forward(model.potential_params, y).mean()
        - mlp_forward(model.potential_params, tx).mean()
    )


def map_batch_objective(model: NeuralOTModel, x) -> float:
    tx = mlp_forward(model.map_params, x)
    cost = np.mean(transport_cost(x, tx))
    return float(cost - mlp_forward(model.potential_params, tx).mean())


def fd_step_check(model, objective, params_getter, rebuild, h=1e-6):
    """Finite differences of a batch objective with respect to one net."""
    params = params_getter(model)
    grads_fd = []
    for li in range(len(params.weights)):
        for which in ("w", "b"):
            block = params.weights[li] if which == "w" else params.biases[li]
            g = np.zeros_like(block)
            for idx in np.ndindex(block.shape):
                for sign in (1.0, -1.0):
                    arrs = list(params.weights if which == "w" else params.biases)
                    arr = arrs[li].copy()
                    arr[idx] += sign * h
                    arrs[li] = arr
                    if which == "w":
                        p2 = MlpParams(params.layer_dims, tuple(arrs), params.biases, params.activation)
                    else:
                        p2 = MlpParams(params.layer_dims, params.weights, tuple(arrs), params.activation)
                    val = objective(rebuild(model, p2))
                    g[idx] += sign * val / (2 * h)
            grads_fd.append(g)
    return grads_fd


class TestTransportCost:
    def test_zero_on_equal_points(self):
        x = np.array([1.0, -2.0])
        assert transport_cost(x, x.copy()) == 0.0

    def test_half_squared_norm(self):
        assert transport_cost(np.array([0.0, 0.0]), np.array([3.0, 4.0])) == pytest.approx(12.5)

    def test_dimension_mismatch(self):
        with pytest.raises(DataError):
            transport_cost(np.zeros(2), np.zeros(3))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(min_value=0, max_value=2**31))
    def test_symmetry(self, seed):
        rng = Rng(seed)
        x = rng.normal(3)
        y = rng.normal(3)
        assert transport_cost(x, y) == pytest.approx(transport_cost(y, x), rel=1e-14)


class TestPsiAscentStep:
    def test_zero_lr_changes_nothing(self):
        rng = Rng(1)
        model = small_model(rng)
        x = rng.normal((5, 2))
        y = rng.normal((5, 2))
        opt = init_adam(model.potential_params, lr=0.0)
        model2, _, _ = psi_ascent_step(model, x, y, opt)
        for a, b in zip(model.potential_params.weights, model2.potential_params.weights):
            np.testing.assert_array_equal(a, b)

    def test_map_params_untouched_bitwise(self):
        rng = Rng(2)
        model = small_model(rng)
        x = rng.normal((8, 2))
        y = rng.normal((8, 2))
        before = [w.copy() for w in model.map_params.weights]
        opt = init_adam(model.potential_params, lr=0.1)
        model2, _, _ = psi_ascent_step(model, x, y, opt)
        assert model2.map_params is model.map_params
        for a, b in zip(before, model2.map_params.weights):
            np.testing.assert_array_equal(a, b)

    def test_identical_batches_identity_map_cancel(self):
        """With T = id and the same batch on both sides the two sums cancel."""
        rng = Rng(3)
        psi = init_mlp([2, 4, 1], "tanh", rng)
        model = NeuralOTModel(identity_map_params(2), psi, 2)
        x = rng.normal((6, 2))
        opt = init_adam(psi, lr=0.5)
        model2, _, obj = psi_ascent_step(model, x, x.copy(), opt)
        assert obj == 0.0
        for a, b in zip(psi.weights, model2.potential_params.weights):
            np.testing.assert_array_equal(a, b)

    def test_gradient_matches_finite_differences(self):
        """Ascent direction equals the FD gradient of the batch objective."""
        rng = Rng(4)
        model = small_model(rng, dim=1)
        x = rng.normal((3, 1))
        y = rng.normal((3, 1))

        tx = mlp_forward(model.map_params, x)
        from cotflow.nn import mlp_backward

        g_tx, _ = mlp_backward(model.potential_params, tx, np.full((3, 1), -1.0 / 3))
        g_y, _ = mlp_backward(model.potential_params, y, np.full((3, 1), 1.0 / 3))
        analytic = g_tx.added(g_y)

        fd = fd_step_check(
            model,
            lambda m: psi_batch_objective(m, x, y),
            lambda m: m.potential_params,
            lambda m, p: NeuralOTModel(m.map_params, p, m.dim),
        )
        flat_a = np.concatenate(
            [g.ravel() for g in analytic.weights] + [g.ravel() for g in analytic.biases]
        )
        ws = fd[0::2]
        bs = fd[1::2]
        flat_f = np.concatenate([g.ravel() for g in ws] + [g.ravel() for g in bs])
        assert np.linalg.norm(flat_a - flat_f) / max(np.linalg.norm(flat_f), 1e-12) < 1e-4

    def test_single_sample_single_layer_hand_chain_rule(self):
        """1-D single-sample batches on a linear potential psi(v) = w v + b:
        the objective is psi(y) - psi(T(x)), so dw = y - T(x) and db = 0."""
        psi = MlpParams((1, 1), (np.array([[0.4]]),), (np.array([0.1]),), "identity")
        model = NeuralOTModel(identity_map_params(1), psi, 1)
        x = np.array([[0.7]])
        y = np.array([[-0.2]])
        from cotflow.nn import mlp_backward

        g_tx, _ = mlp_backward(model.potential_params, x, np.array([[-1.0]]))
        g_y, _ = mlp_backward(model.potential_params, y, np.array([[1.0]]))
        grads = g_tx.added(g_y)
        assert grads.weights[0][0, 0] == pytest.approx(-0.2 - 0.7, rel=1e-14)
        assert grads.biases[0][0] == pytest.approx(0.0, abs=1e-16)

        fd = fd_step_check(
            model,
            lambda m: psi_batch_objective(m, x, y),
            lambda m: m.potential_params,
            lambda m, p: NeuralOTModel(m.map_params, p, m.dim),
        )
        assert fd[0][0, 0] == pytest.approx(grads.weights[0][0, 0], rel=1e-6)

    def test_empty_batch_rejected(self):
        model = small_model(Rng(5))
        opt = init_adam(model.potential_params, lr=0.1)
        with pytest.raises(DataError):
            psi_ascent_step(model, np.zeros((0, 2)), np.zeros((3, 2)), opt)


class TestMapDescentStep:
    def test_zero_lr_changes_nothing(self):
        rng = Rng(6)
        model = small_model(rng)
        x = rng.normal((5, 2))
        opt = init_adam(model.map_params, lr=0.0)
        model2, _, _ = map_descent_step(model, x, opt)
        for a, b in zip(model.map_params.weights, model2.map_params.weights):
            np.testing.assert_array_equal(a, b)

    def test_potential_params_untouched_bitwise(self):
        rng = Rng(7)
        model = small_model(rng)
        x = rng.normal((5, 2))
        before = [w.copy() for w in model.potential_params.weights]
        opt = init_adam(model.map_params, lr=0.1)
        model2, _, _ = map_descent_step(model, x, opt)
        assert model2.potential_params is model.potential_params
        for a, b in zip(before, model2.potential_params.weights):
            np.testing.assert_array_equal(a, b)

    def test_identity_map_zero_potential_objective_zero(self):
        rng = Rng(8)
        model = NeuralOTModel(identity_map_params(2), zero_potential_params(2), 2)
        x = rng.normal((4, 2))
        opt = init_adam(model.map_params, lr=0.0)
        _, _, obj = map_descent_step(model, x, opt)
        assert obj == 0.0

    def test_zero_potential_reduces_to_transport_cost_gradient(self):
        """With psi = 0 the objective is the mean cost of a linear 1-D map."""
        w = np.array([[0.7]])
        b = np.array([0.2])
        map_params = MlpParams((1, 1), (w,), (b,), "identity")
        model = NeuralOTModel(map_params, zero_potential_params(1), 1)
        x = Rng(9).normal((5, 1))

        fd = fd_step_check(
            model,
            lambda m: map_batch_objective(m, x),
            lambda m: m.map_params,
            lambda m, p: NeuralOTModel(p, m.potential_params, m.dim),
        )
        tx = x * 0.7 + 0.2
        analytic_w = float(np.mean((tx - x) * x))
        analytic_b = float(np.mean(tx - x))
        assert fd[0][0, 0] == pytest.approx(analytic_w, rel=1e-6)
        assert fd[1][0] == pytest.approx(analytic_b, rel=1e-6)

    def test_gradient_matches_finite_differences(self):
        rng = Rng(10)
        model = small_model(rng, dim=1)
        x = rng.normal((3, 1))
        tx = mlp_forward(model.map_params, x)
        from cotflow.nn import mlp_backward

        n = 3
        _, psi_in = mlp_backward(model.potential_params, tx, np.full((n, 1), 1.0 / n))
        upstream = (tx - x) / n - psi_in
        analytic, _ = mlp_backward(model.map_params, x, upstream)

        fd = fd_step_check(
            model,
            lambda m: map_batch_objective(m, x),
            lambda m: m.map_params,
            lambda m, p: NeuralOTModel(p, m.potential_params, m.dim),
        )
        flat_a = np.concatenate(
            [g.ravel() for g in analytic.weights] + [g.ravel() for g in analytic.biases]
        )
        flat_f = np.concatenate([g.ravel() for g in fd[0::2]] + [g.ravel() for g in fd[1::2]])
        assert np.linalg.norm(flat_a - flat_f) / max(np.linalg.norm(flat_f), 1e-12) < 1e-4


class TestTrainNeuralOT:
    def test_zero_outer_returns_initialized_model(self):
        cfg = TrainConfig(n_outer=0, map_hidden=(8,), psi_hidden=(8,), seed=3)
        src = DatasetSpec("gaussian", 4, 1)
        result = train_neural_ot(cfg, src, src, Rng(3))
        assert isinstance(result, OTTrainResult)
        fresh = init_neural_ot(2, cfg, Rng(3).substream(0))
        for a, b in zip(result.model.map_params.weights, fresh.map_params.weights):
            np.testing.assert_array_equal(a, b)
        assert result.log == ()

    def test_dimension_mismatch_rejected(self):
        cfg = TrainConfig(n_outer=1, map_hidden=(4,), psi_hidden=(4,))
        src = DatasetSpec("gaussian", 4, 1, {"mean": (0.0,), "cov": ((1.0,),)})
        tgt = DatasetSpec("moons", 4, 1)
        with pytest.raises(DataError):
            train_neural_ot(cfg, src, tgt, Rng(0))

    def test_nonfinite_loss_aborts_with_iteration(self):
        """An absurd learning rate overflows within a few iterations."""
        cfg = TrainConfig(
            n_outer=50, k_map=2, batch_size=16, lr=1e200,
            map_hidden=(8,), psi_hidden=(8,), seed=1, log_every=100,
        )
        src = DatasetSpec("gaussian", 4, 1)
        tgt = DatasetSpec("gaussian", 4, 2, {"mean": (5.0, 5.0)})
        with pytest.raises(NumericError, match="iteration"):
            train_neural_ot(cfg, src, tgt, Rng(1))

    def test_identity_recovery_same_distribution(self):
        """Source = target makes the identity map optimal."""
        cfg = TrainConfig(
            n_outer=500, k_map=10, batch_size=128, lr=5e-4,
            map_hidden=(32, 32), psi_hidden=(32, 32), seed=2, log_every=250,
        )
        src = DatasetSpec("gaussian", 4, 11)
        result = train_neural_ot(cfg, src, src, Rng(5))
        x = sample_batch(src, 4096, Rng(99))
        tx = transport_map(result.model, x)
        ratio = np.mean(np.sum((tx - x) ** 2, axis=1)) / np.mean(np.sum(x**2, axis=1))
        assert ratio <= 0.05

    def test_one_d_gaussian_map_recovery(self):
        """N(0,1) -> N(2,4) has the closed-form map 2x + 2."""
        cfg = TrainConfig(
            n_outer=800, k_map=10, batch_size=128, lr=1e-3,
            map_hidden=(32, 32), psi_hidden=(32, 32), seed=3, log_every=400,
        )
        src = DatasetSpec("gaussian", 4, 21, {"mean": (0.0,), "cov": ((1.0,),)})
        tgt = DatasetSpec("gaussian", 4, 22, {"mean": (2.0,), "cov": ((4.0,),)})
        result = train_neural_ot(cfg, src, tgt, Rng(6))
        x = sample_batch(src, 4096, Rng(100))
        tstar = 2.0 * x + 2.0
        mse = np.mean((transport_map(result.model, x) - tstar) ** 2)
        assert mse <= 0.05 * np.mean((tstar - x) ** 2)


class TestGaussianOTMap:
    def test_equal_gaussians_give_identity(self):
        rng = Rng(31)
        m = rng.normal(3)
        c = rng.normal((3, 3))
        cov = c @ c.T + 0.5 * np.eye(3)
        a = GaussianSpec(m, cov)
        big_a, shift = gaussian_ot_map(a, GaussianSpec(m.copy(), cov.copy()))
        np.testing.assert_allclose(big_a, np.eye(3), atol=1e-10)
        np.testing.assert_allclose(shift, np.zeros(3), atol=1e-10)

    def test_one_d_closed_form(self):
        a = GaussianSpec(np.zeros(1), np.eye(1))
        b = GaussianSpec(np.array([2.0]), np.array([[4.0]]))
        big_a, shift = gaussian_ot_map(a, b)
        np.testing.assert_allclose(big_a, [[2.0]])
        np.testing.assert_allclose(shift, [2.0])

    def test_output_symmetric_positive(self):
        rng = Rng(32)
        for _ in range(10):
            c1 = rng.normal((2, 2))
            c2 = rng.normal((2, 2))
            a = GaussianSpec(rng.normal(2), c1 @ c1.T + 0.3 * np.eye(2))
            b = GaussianSpec(rng.normal(2), c2 @ c2.T + 0.3 * np.eye(2))
            big_a, _ = gaussian_ot_map(a, b)
            assert np.max(np.abs(big_a - big_a.T)) < 1e-10
            assert np.all(np.linalg.eigvalsh(big_a) > 0.0)

    def test_non_spd_rejected(self):
        with pytest.raises(DataError):
            GaussianSpec(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_diagonal_case_matches_sinkhorn_barycentric_map(self):
        """Entropic barycentric projection reproduces diag(sqrt(2), sqrt(0.5)).

        2000 samples a side, lam = 1e-3; the barycentric estimate
        T(x_i) = sum_j pi_ij y_j / sum_j pi_ij is compared to the closed
        form on the source sample cloud.
        """
        rng = Rng(33)
        n = 2000
        x = rng.normal((n, 2))
        y = rng.normal((n, 2)) * np.sqrt(np.array([2.0, 0.5]))
        cost = 0.5 * ((x[:, None, :] - y[None, :, :]) ** 2).sum(-1)
        plan = sinkhorn(cost, np.full(n, 1.0 / n), np.full(n, 1.0 / n), 1e-3)
        bary = (plan.matrix @ y) / plan.matrix.sum(axis=1, keepdims=True)
        big_a, shift = gaussian_ot_map(
            GaussianSpec(np.zeros(2), np.eye(2)),
            GaussianSpec(np.zeros(2), np.diag([2.0, 0.5])),
        )
        np.testing.assert_allclose(big_a, np.diag([np.sqrt(2.0), np.sqrt(0.5)]), atol=1e-12)
        tstar = x @ big_a.T + shift
        err = np.mean(np.sqrt(((bary - tstar) ** 2).sum(axis=1)))
        spread = np.mean(np.sqrt(((tstar - x) ** 2).sum(axis=1)))
        assert err < 0.15 * max(spread, 1.0)
