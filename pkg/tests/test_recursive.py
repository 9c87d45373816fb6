"""Online estimators: step contracts, covariance invariants, reductions."""

from collections import deque

import numpy as np
import pytest

from sepident.errors import ConfigError
from sepident.models import ComplexExponential3, Observation, ParameterState
from sepident.recursive import (
    EstimatorConfig,
    RecursiveState,
    hrgn_step,
    repi_step,
    rgn_step,
    rls_update,
    run_stream,
    rvp_step,
    sgd_step,
)

from conftest import InertNonlinearModel, ScalarExpModel

TRUE_A = np.array([1.0, 1.5, 3.0, 0.8])
TRUE_C = np.array([2.0, 3.0, 2.0])


def synth_obs(rng, model, truth, n, noise=0.2):
    X = rng.standard_normal((n, model.state_dim))
    return [
        Observation(y=model.predict(truth, X[i]) + noise * rng.standard_normal(), x=X[i], t=i)
        for i in range(n)
    ]


def linear_obs(rng, n_obs, dim):
    X = rng.standard_normal((n_obs, dim))
    c_true = rng.uniform(-2, 2, dim)
    Y = X @ c_true + 0.1 * rng.standard_normal(n_obs)
    return [Observation(y=Y[i], x=X[i], t=i) for i in range(n_obs)], c_true


class TestRlsUpdate:
    def test_zero_residual_keeps_coefficients(self, rng):
        K = 5.0 * np.eye(3)
        c = rng.standard_normal(3)
        phi = rng.standard_normal(3)
        c_new, p, K_new = rls_update(c, K, phi, v=0.0)
        np.testing.assert_array_equal(c_new, c)
        # K still contracts
        assert np.trace(K_new) < np.trace(K)

    def test_scalar_arithmetic(self):
        """K=1, phi=1, v=1: gain 1/2, c + 1/2, K -> 1/2."""
        c_new, p, K_new = rls_update(np.array([0.3]), np.eye(1), np.ones(1), v=1.0)
        assert p[0] == pytest.approx(0.5, rel=1e-15)
        assert c_new[0] == pytest.approx(0.8, rel=1e-14)
        assert K_new[0, 0] == pytest.approx(0.5, rel=1e-14)

    def test_update_suppressed_keeps_K(self, rng):
        K = 2.0 * np.eye(2)
        c_new, p, K_same = rls_update(np.zeros(2), K, np.ones(2), v=1.0, update_K=False)
        np.testing.assert_array_equal(K_same, K)

    def test_diffuse_prior_matches_batch_least_squares(self, rng):
        """RLS from K = 1e8 I over random rows converges to batch LS."""
        obs, _ = linear_obs(rng, 200, 5)
        c = np.zeros(5)
        K = 1e8 * np.eye(5)
        for o in obs:
            v = o.y - o.x @ c
            c, _, K = rls_update(c, K, o.x, v)
        X = np.stack([o.x for o in obs])
        Y = np.array([o.y for o in obs])
        c_batch = np.linalg.lstsq(X, Y, rcond=None)[0]
        np.testing.assert_allclose(c, c_batch, rtol=1e-4)


class TestRgnStep:
    def test_zero_residual_fixed_point(self, rng):
        model = ComplexExponential3()
        theta = ParameterState(TRUE_A, TRUE_C)
        state = RecursiveState.initial(model, theta)
        x = rng.standard_normal(3)
        obs = Observation(y=model.predict(theta, x), x=x, t=0)
        new, trace = rgn_step(model, state, obs)
        np.testing.assert_array_equal(new.theta.join(), theta.join())
        assert np.trace(new.S) < np.trace(state.S)
        assert trace.residual_before == 0.0

    def test_sherman_morrison_consistency(self, rng):
        """S stays the inverse of the accumulated curvature matrix."""
        model = ComplexExponential3()
        truth = ParameterState(TRUE_A, TRUE_C)
        obs = synth_obs(rng, model, truth, 100)
        state = RecursiveState.initial(model, ParameterState(TRUE_A * 1.1, TRUE_C * 0.9), s0=1.0)
        H = np.eye(7)
        for o in obs:
            g = model.gradient_full(state.theta, o)
            H = H + np.outer(g, g)
            state, _ = rgn_step(model, state, o)
            np.testing.assert_allclose(state.S, np.linalg.inv(H), rtol=1e-8, atol=1e-12)

    def test_reduces_to_rls_for_linear_model(self, rng):
        """With an inert nonlinear parameter and s0 == k0, the c-part is RLS."""
        model = InertNonlinearModel(n=3)
        obs, _ = linear_obs(rng, 60, 3)
        s0 = 7.0
        state = RecursiveState.initial(model, ParameterState([0.5], np.zeros(3)), s0=s0, k0=s0)
        c_rls = np.zeros(3)
        K = s0 * np.eye(3)
        for o in obs:
            state, _ = rgn_step(model, state, o)
            v = o.y - o.x @ c_rls
            c_rls, _, K = rls_update(c_rls, K, o.x, v)
            np.testing.assert_allclose(state.theta.c, c_rls, rtol=1e-12, atol=1e-14)
            assert state.theta.a[0] == 0.5  # inert parameter never moves


class TestRepiStep:
    def test_hand_trace_scalar_model(self):
        """One step on y = c e^{-ax} from (a, c, K, S) = (1, 1, 1, I).

        Expected values computed beforehand by an independent scalar
        walk of the three sub-steps at 30-digit precision.
        """
        model = ScalarExpModel()
        state = RecursiveState(ParameterState([1.0], [1.0]), np.eye(2), np.eye(1), 0)
        obs = Observation(y=1.0, x=[1.0], t=0)
        new, trace = repi_step(model, state, obs)
        assert trace.residual_before == pytest.approx(0.63212055882855768, rel=1e-15)
        assert trace.alpha == pytest.approx(1.3317881683083864, rel=1e-14)
        assert new.theta.a[0] == pytest.approx(0.78962507765156364, rel=1e-14)
        assert new.theta.c[0] == pytest.approx(1.2055213446028344, rel=1e-14)
        assert new.K[0, 0] == pytest.approx(0.82909829546703824, rel=1e-14)
        np.testing.assert_allclose(
            new.S,
            [[0.85248939001965705, 0.12243330451623325], [0.12243330451623325, 0.89838077371680426]],
            rtol=1e-14,
        )

    def test_zero_residual_fixed_point(self, rng):
        """Every update term carries the residual, so theta stays put."""
        model = ComplexExponential3()
        theta = ParameterState(TRUE_A, TRUE_C)
        state = RecursiveState.initial(model, theta)
        x = rng.standard_normal(3)
        obs = Observation(y=model.predict(theta, x), x=x, t=0)
        new, _ = repi_step(model, state, obs)
        np.testing.assert_array_equal(new.theta.a, theta.a)
        np.testing.assert_array_equal(new.theta.c, theta.c)
        assert np.trace(new.S) < np.trace(state.S)
        assert np.trace(new.K) < np.trace(state.K)

    def test_substeps_match_kernel_reconstruction(self, rng):
        """Replays the three sub-steps with plain numpy and compares all outputs."""
        model = ComplexExponential3()
        state = RecursiveState(
            ParameterState(rng.uniform(0.5, 2, 4), rng.uniform(-1, 3, 3)),
            np.linalg.inv(np.eye(7) + 0.1 * np.ones((7, 7))),
            2.5 * np.eye(3),
            0,
        )
        x = rng.standard_normal(3)
        obs = Observation(y=1.3, x=x, t=0)
        a, c, S, K = state.theta.a, state.theta.c, state.S, state.K
        phi = model.basis(a, x)
        v0 = obs.y - phi @ c
        c_tilde = c + (K @ phi) / (1 + phi @ K @ phi) * v0
        jac = model.basis_jacobian(a, x)
        g = np.concatenate([-(jac.T @ c_tilde), -phi])
        g_ext = np.concatenate([-(jac.T @ c_tilde), np.zeros(3)])
        alpha = 1 + g @ S @ g
        S_new = S - np.outer(S @ g, S @ g) / alpha
        v1 = obs.y - phi @ c_tilde
        a_new = a - (S_new @ g_ext)[:4] * v1  # linear block of the move discarded
        phi_new = model.basis(a_new, x)
        v2 = obs.y - phi_new @ c
        p = (K @ phi_new) / (1 + phi_new @ K @ phi_new)
        c_new = c + p * v2
        K_new = K - np.outer(K @ phi_new, K @ phi_new) / (1 + phi_new @ K @ phi_new)
        new, trace = repi_step(model, state, obs)
        np.testing.assert_allclose(new.theta.a, a_new, rtol=1e-12)
        np.testing.assert_allclose(new.theta.c, c_new, rtol=1e-12)
        np.testing.assert_allclose(new.S, 0.5 * (S_new + S_new.T), rtol=1e-12)
        np.testing.assert_allclose(new.K, 0.5 * (K_new + K_new.T), rtol=1e-12)
        assert trace.alpha == pytest.approx(float(alpha), rel=1e-12)

    def test_nonlinear_move_ignores_linear_direction_block(self, rng):
        """a' must follow only the first k entries of S g~ v."""
        model = ComplexExponential3()
        state = RecursiveState.initial(
            model, ParameterState(rng.uniform(0.5, 2, 4), rng.uniform(-1, 3, 3))
        )
        x = rng.standard_normal(3)
        obs = Observation(y=0.7, x=x, t=0)
        new, _ = repi_step(model, state, obs)
        # independent reconstruction of the expected a from the full direction
        a, c, S, K = state.theta.a, state.theta.c, state.S, state.K
        phi = model.basis(a, x)
        v0 = obs.y - phi @ c
        c_tilde = c + (K @ phi) / (1 + phi @ K @ phi) * v0
        jac = model.basis_jacobian(a, x)
        g = np.concatenate([-(jac.T @ c_tilde), -phi])
        alpha = 1 + g @ S @ g
        S_new = S - np.outer(S @ g, S @ g) / alpha
        direction_full = S_new @ np.concatenate([-(jac.T @ c_tilde), np.zeros(3)]) * (
            obs.y - phi @ c_tilde
        )
        np.testing.assert_allclose(new.theta.a, a - direction_full[:4], rtol=1e-12)
        # the discarded linear block is generally nonzero
        assert np.linalg.norm(direction_full[4:]) > 0

    def test_reduces_to_rls_for_linear_model(self, rng):
        model = InertNonlinearModel(n=3)
        obs, _ = linear_obs(rng, 60, 3)
        state = RecursiveState.initial(model, ParameterState([0.5], np.zeros(3)), s0=1.0, k0=9.0)
        c_rls = np.zeros(3)
        K = 9.0 * np.eye(3)
        for o in obs:
            state, _ = repi_step(model, state, o)
            v = o.y - o.x @ c_rls
            c_rls, _, K = rls_update(c_rls, K, o.x, v)
            np.testing.assert_array_equal(state.theta.c, c_rls)
            np.testing.assert_array_equal(state.K, K)


class TestHrgnStep:
    def test_zero_residual_no_parameter_change(self, rng):
        model = ComplexExponential3()
        theta = ParameterState(TRUE_A, TRUE_C)
        state = RecursiveState.initial(model, theta)
        x = rng.standard_normal(3)
        obs = Observation(y=model.predict(theta, x), x=x, t=0)
        new, _ = hrgn_step(model, state, obs)
        np.testing.assert_array_equal(new.theta.join(), theta.join())

    def test_reduces_to_rls_for_linear_model(self, rng):
        model = InertNonlinearModel(n=2)
        obs, _ = linear_obs(rng, 40, 2)
        state = RecursiveState.initial(model, ParameterState([1.0], np.zeros(2)), k0=4.0)
        c_rls = np.zeros(2)
        K = 4.0 * np.eye(2)
        for o in obs:
            state, _ = hrgn_step(model, state, o)
            v = o.y - o.x @ c_rls
            c_rls, _, K = rls_update(c_rls, K, o.x, v)
            np.testing.assert_array_equal(state.theta.c, c_rls)
            np.testing.assert_array_equal(state.K, K)

    def test_only_leading_block_of_S_changes(self, rng):
        model = ComplexExponential3()
        state = RecursiveState.initial(
            model, ParameterState(rng.uniform(0.5, 2, 4), rng.uniform(0, 3, 3))
        )
        obs = Observation(y=0.4, x=rng.standard_normal(3), t=0)
        new, _ = hrgn_step(model, state, obs)
        np.testing.assert_array_equal(new.S[4:, :], state.S[4:, :])
        np.testing.assert_array_equal(new.S[:4, 4:], state.S[:4, 4:])
        assert not np.array_equal(new.S[:4, :4], state.S[:4, :4])


class TestRvpStep:
    def test_accumulates_until_window_covers_linear_dim(self, rng):
        model = InertNonlinearModel(n=3)
        obs, _ = linear_obs(rng, 5, 3)
        state = RecursiveState.initial(model, ParameterState([1.0], np.zeros(3)))
        window = deque(maxlen=10)
        for i, o in enumerate(obs[:2]):
            state, trace = rvp_step(model, state, window, o)
            assert trace.note is not None  # frozen
            np.testing.assert_array_equal(state.theta.c, np.zeros(3))
        assert len(window) == 2

    def test_exactly_determined_window_interpolates(self, rng):
        """A rank-n window of n observations pins c to the interpolant."""
        model = InertNonlinearModel(n=2)
        state = RecursiveState.initial(model, ParameterState([1.0], np.zeros(2)))
        window = deque(maxlen=5)
        obs = [
            Observation(y=3.0, x=[1.0, 0.0], t=0),
            Observation(y=-2.0, x=[0.0, 1.0], t=1),
        ]
        for o in obs:
            state, _ = rvp_step(model, state, window, o)
        np.testing.assert_allclose(state.theta.c, [3.0, -2.0], rtol=1e-12)

    def test_rank_deficient_window_freezes(self, rng):
        model = InertNonlinearModel(n=2)
        state = RecursiveState.initial(model, ParameterState([1.0], np.array([5.0, 5.0])))
        window = deque(maxlen=5)
        obs = [Observation(y=1.0, x=[1.0, 0.0], t=i) for i in range(3)]  # rank 1
        for o in obs:
            state, trace = rvp_step(model, state, window, o)
            assert trace.note is not None
        np.testing.assert_array_equal(state.theta.c, [5.0, 5.0])

    def test_unbounded_window_linear_model_matches_batch(self, rng):
        model = InertNonlinearModel(n=3)
        obs, _ = linear_obs(rng, 50, 3)
        state = RecursiveState.initial(model, ParameterState([1.0], np.zeros(3)))
        window = deque(maxlen=None)
        for o in obs:
            state, _ = rvp_step(model, state, window, o)
        X = np.stack([o.x for o in obs])
        Y = np.array([o.y for o in obs])
        np.testing.assert_allclose(state.theta.c, np.linalg.lstsq(X, Y, rcond=None)[0], rtol=1e-10)


class TestSgdStep:
    def test_zero_residual_unchanged(self, rng):
        model = ComplexExponential3()
        theta = ParameterState(TRUE_A, TRUE_C)
        state = RecursiveState.initial(model, theta)
        x = rng.standard_normal(3)
        obs = Observation(y=model.predict(theta, x), x=x, t=0)
        new, _ = sgd_step(model, state, obs, 0.01)
        np.testing.assert_array_equal(new.theta.join(), theta.join())

    def test_zero_learning_rate_unchanged(self, rng):
        model = ComplexExponential3()
        state = RecursiveState.initial(model, ParameterState(TRUE_A, TRUE_C))
        obs = Observation(y=9.0, x=rng.standard_normal(3), t=0)
        new, _ = sgd_step(model, state, obs, 0.0)
        np.testing.assert_array_equal(new.theta.join(), state.theta.join())

    def test_scalar_hand_computation(self):
        """theta' = theta - eta g v on y = c e^{-ax}."""
        model = ScalarExpModel()
        state = RecursiveState.initial(model, ParameterState([1.0], [1.0]))
        obs = Observation(y=1.0, x=[1.0], t=0)
        eta = 0.1
        phi = np.exp(-1.0)
        v = 1.0 - phi
        g = np.array([phi, -phi])  # (-c dphi/da, -phi) at a=c=1, x=1
        new, _ = sgd_step(model, state, obs, eta)
        np.testing.assert_allclose(new.theta.join(), np.array([1.0, 1.0]) - eta * g * v, rtol=1e-14)


class TestRunStream:
    def test_truth_start_noise_free_stays_put(self, rng):
        model = ComplexExponential3()
        truth = ParameterState(TRUE_A, TRUE_C)
        obs = synth_obs(rng, model, truth, 50, noise=0.0)
        for alg in ("REPI", "RGN", "HRGN", "RVP", "SGD"):
            traces = run_stream(model, EstimatorConfig(algorithm=alg), obs, truth, true_params=truth)
            assert all(t.rel_error <= 1e-8 for t in traces), alg

    def test_deterministic_replay(self, rng):
        model = ComplexExponential3()
        truth = ParameterState(TRUE_A, TRUE_C)
        obs = synth_obs(rng, model, truth, 80)
        init = ParameterState(TRUE_A * 1.2, TRUE_C * 0.8)
        cfg = EstimatorConfig(algorithm="REPI")
        t1 = run_stream(model, cfg, obs, init, true_params=truth)
        t2 = run_stream(model, cfg, obs, init, true_params=truth)
        for a, b in zip(t1, t2):
            assert a.rel_error == b.rel_error
            np.testing.assert_array_equal(a.theta_after.join(), b.theta_after.join())

    def test_rejected_step_keeps_stream_alive(self):
        """An observation that overflows the basis is rejected, not fatal."""
        model = ScalarExpModel()
        init = ParameterState([-2.0], [1.0])  # exp(-a x) explodes for large x
        obs = [
            Observation(y=1.0, x=[1.0], t=0),
            Observation(y=1.0, x=[500.0], t=1),
            Observation(y=1.0, x=[1.0], t=2),
        ]
        traces = run_stream(model, EstimatorConfig(algorithm="RGN"), obs, init)
        assert len(traces) == 3
        assert any(t.rejected for t in traces)
        assert not traces[-1].rejected

    def test_stream_positions_are_one_based(self, rng):
        model = ComplexExponential3()
        truth = ParameterState(TRUE_A, TRUE_C)
        obs = synth_obs(rng, model, truth, 5)
        traces = run_stream(model, EstimatorConfig(algorithm="SGD"), obs, truth)
        assert [t.t for t in traces] == [1, 2, 3, 4, 5]

    def test_empty_stream_rejected(self):
        model = ComplexExponential3()
        with pytest.raises(ValueError):
            run_stream(model, EstimatorConfig(algorithm="REPI"), [], ParameterState(TRUE_A, TRUE_C))

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            EstimatorConfig(algorithm="NEWTON")
        with pytest.raises(ConfigError):
            EstimatorConfig(algorithm="REPI", s0=0.0)
        model = ComplexExponential3()
        cfg = EstimatorConfig(algorithm="RVP", window_p=2)  # below n=3
        with pytest.raises(ConfigError):
            cfg.validate_for(model)


class TestCovarianceInvariants:
    """Both covariance recursions preserve symmetry and positive semidefiniteness."""

    @pytest.mark.parametrize("alg", ["REPI", "RGN", "HRGN", "RVP"])
    def test_symmetric_psd_along_stream(self, alg, rng):
        model = ComplexExponential3()
        truth = ParameterState(TRUE_A, TRUE_C)
        obs = synth_obs(rng, model, truth, 120)
        init = ParameterState(TRUE_A * 1.15, TRUE_C * 0.9)
        cfg = EstimatorConfig(algorithm=alg)
        state = RecursiveState.initial(model, init, cfg.s0, cfg.k0)
        window = deque(maxlen=cfg.window_p)
        for o in obs:
            if alg == "RVP":
                state, trace = rvp_step(model, state, window, o)
            else:
                step = {"REPI": repi_step, "RGN": rgn_step, "HRGN": hrgn_step}[alg]
                state, trace = step(model, state, o)
            for M in (state.S, state.K):
                np.testing.assert_allclose(M, M.T, atol=1e-10)
                assert np.linalg.eigvalsh(M)[0] >= -1e-10 * np.trace(M)
            if trace.alpha is not None:
                assert trace.alpha >= 1.0

    def test_K_quadratic_form_contracts(self, rng):
        model = ComplexExponential3()
        truth = ParameterState(TRUE_A, TRUE_C)
        obs = synth_obs(rng, model, truth, 100)
        state = RecursiveState.initial(model, ParameterState(TRUE_A * 1.1, TRUE_C * 1.1))
        probes = rng.standard_normal((20, 3))
        for o in obs:
            prev_K = state.K
            state, _ = repi_step(model, state, o)
            for w in probes:
                bound = w @ prev_K @ w + 1e-12 * (w @ w) * np.trace(prev_K)
                assert w @ state.K @ w <= bound
