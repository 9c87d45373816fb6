"""Online estimators: one-observation update steps over shared covariance state.

Five algorithms share the :class:`RecursiveState` machinery:

REPI  three-step update: a recursive-least-squares pre-elimination of the
      linear coefficients (covariance not committed), a nonlinear update
      whose parameter direction uses the extended gradient (linear block
      zeroed) while the covariance downdate uses the full gradient, and a
      final RLS commit of the linear coefficients at the fresh nonlinear
      estimate. The asymmetry between the two step-2 gradients is
      intentional: the covariance tracks the full information content, the
      direction respects the linear block's stationarity.
RGN   joint recursive Gauss-Newton over theta = (a, c); ignores the
      linear/nonlinear partition entirely.
HRGN  alternates an RLS update of c and an independent recursive GN update
      of a (no coupling between the blocks).
RVP   eliminates c by batch least squares over a sliding window, then takes
      a recursive GN step on a with the eliminated coefficients.
SGD   plain stochastic gradient descent on the joint parameters.

All steps are pure: they return a new state and never mutate the input
(the RVP window deque is the one documented exception, advancing by the
incoming observation). A step that would produce non-finite numbers is
rejected: the returned state is the input state and the trace records the
reason, so a stream never crashes mid-run.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from ._kernels import rls_gain, rls_gain_downdate, sm_downdate
from .errors import ConfigError, NumericOverflowError
from .metrics import relative_param_error
from .models import Observation, ParameterState, SeparableModel

ALGORITHMS = ("REPI", "RGN", "HRGN", "RVP", "SGD")


def _cc(arr: np.ndarray) -> np.ndarray:
    """Contiguous float64 view or copy (the compiled kernels require it)."""
    return np.ascontiguousarray(arr, dtype=np.float64)


@dataclass(frozen=True)
class RecursiveState:
    """Estimator state after t accepted observations.

    S is the full (k+n) x (k+n) parameter covariance, K the n x n linear
    covariance; both stay symmetric PSD under the rank-one downdates.
    """

    theta: ParameterState
    S: np.ndarray
    K: np.ndarray
    t: int = 0

    @staticmethod
    def initial(model: SeparableModel, theta0: ParameterState, s0: float = 100.0, k0: float = 100.0) -> "RecursiveState":
        if theta0.k != model.k or theta0.n != model.n:
            raise ConfigError(
                f"initial parameters ({theta0.k},{theta0.n}) do not match model ({model.k},{model.n})"
            )
        if s0 <= 0 or k0 <= 0:
            raise ConfigError("initial covariance scales must be positive")
        dim = model.k + model.n
        return RecursiveState(theta0, s0 * np.eye(dim), k0 * np.eye(model.n), t=0)


@dataclass(frozen=True)
class EstimatorConfig:
    """Algorithm choice plus the knobs the choice needs.

    window_p (RVP) is the sliding-window length; None means unbounded.

    The default joint-covariance scale is deliberately moderate. REPI's
    nonlinear move scales like s0 * (1 + s0 ||phi||^2) / (1 + s0 ||g||^2)
    in the diffuse limit (the covariance is downdated along the full
    gradient but the move follows the extended one), so a diffuse S blows
    its first steps up; a diffuse K is safe and keeps the linear updates
    least-squares-like.
    """

    algorithm: str
    s0: float = 1.0
    k0: float = 100.0
    window_p: int | None = 10
    learning_rate: float = 0.01

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if self.s0 <= 0 or self.k0 <= 0:
            raise ConfigError("s0 and k0 must be positive")
        if self.algorithm == "SGD" and self.learning_rate <= 0:
            raise ConfigError("SGD learning_rate must be positive")

    def validate_for(self, model: SeparableModel) -> None:
        if self.algorithm == "RVP" and self.window_p is not None and self.window_p < model.n:
            raise ConfigError(f"RVP window_p={self.window_p} must be at least n={model.n}")


@dataclass(frozen=True)
class StepTrace:
    """Per-step diagnostics: residual before the update, state after it."""

    t: int
    residual_before: float
    theta_after: ParameterState
    alpha: float | None = None
    rel_error: float | None = None
    rejected: bool = False
    note: str | None = None


def rls_update(
    c: np.ndarray, K: np.ndarray, phi: np.ndarray, v: float, update_K: bool = True
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One recursive-least-squares update.

    Gain p = K phi / (1 + phi^T K phi); c' = c + p v; when update_K, the
    committed covariance is (I - p phi^T) K re-symmetrized, otherwise K is
    returned unchanged. The denominator is at least 1 for PSD K.
    """
    c = _cc(c)
    K = _cc(K)
    phi = _cc(phi)
    if update_K:
        p, K_new = rls_gain_downdate(K, phi)
    else:
        p, K_new = rls_gain(K, phi), K
    if not np.isfinite(p).all():
        raise NumericOverflowError("least-squares gain")
    return c + p * float(v), p, K_new


def _reject(state: RecursiveState, v0: float, note: str) -> tuple[RecursiveState, StepTrace]:
    trace = StepTrace(
        t=state.t, residual_before=v0, theta_after=state.theta, rejected=True, note=note
    )
    return state, trace


def rgn_step(
    model: SeparableModel, state: RecursiveState, obs: Observation
) -> tuple[RecursiveState, StepTrace]:
    """Joint recursive Gauss-Newton step over theta = (a, c); K untouched."""
    try:
        phi = model.basis(state.theta.a, obs.x)
        jac = model.basis_jacobian(state.theta.a, obs.x)
    except NumericOverflowError as exc:
        return _reject(state, np.nan, f"model evaluation failed: {exc}")
    v0 = float(obs.y - phi @ state.theta.c)
    g = np.concatenate([-(jac.T @ state.theta.c), -phi])
    S_new, alpha = sm_downdate(state.S, g)
    theta_vec = state.theta.join() - S_new @ g * v0
    if not (np.isfinite(theta_vec).all() and np.isfinite(S_new).all()):
        return _reject(state, v0, "non-finite update")
    theta_new = ParameterState.split(theta_vec, model.k)
    new = RecursiveState(theta_new, S_new, state.K, state.t + 1)
    return new, StepTrace(t=new.t, residual_before=v0, theta_after=theta_new, alpha=alpha)


def repi_step(
    model: SeparableModel, state: RecursiveState, obs: Observation
) -> tuple[RecursiveState, StepTrace]:
    """Three-step update: pre-eliminate c, update a, commit c.

    Step 1 computes the provisional coefficients c_tilde from the incoming
    covariance K without committing it. Step 2 downdates S with the full
    gradient at (a, c_tilde) but moves theta along the extended gradient
    (linear block zero) and keeps only the nonlinear block of the move;
    K is committed exactly once, in step 3, with the basis at the new a.
    """
    k = model.k
    a, c = state.theta.a, state.theta.c
    # step 1: provisional linear coefficients, K not committed
    try:
        phi_old = model.basis(a, obs.x)
    except NumericOverflowError as exc:
        return _reject(state, np.nan, f"step 1: {exc}")
    v0 = float(obs.y - phi_old @ c)
    c_tilde = c + rls_gain(state.K, phi_old) * v0
    if not np.isfinite(c_tilde).all():
        return _reject(state, v0, "step 1: non-finite pre-elimination")
    # step 2: nonlinear update (full gradient for S, extended gradient for theta)
    try:
        jac = model.basis_jacobian(a, obs.x)
    except NumericOverflowError as exc:
        return _reject(state, v0, f"step 2: {exc}")
    ga = -(jac.T @ c_tilde)
    g_full = np.concatenate([ga, -phi_old])
    v1 = float(obs.y - phi_old @ c_tilde)
    S_new, alpha = sm_downdate(state.S, g_full)
    # S_new @ (ga, 0) restricted to the nonlinear block; the linear block
    # of the direction is discarded by construction
    a_new = a - S_new[:k, :k] @ ga * v1
    if not (np.isfinite(a_new).all() and np.isfinite(S_new).all()):
        return _reject(state, v0, "step 2: non-finite nonlinear update")
    # step 3: commit the linear coefficients at the new nonlinear estimate
    try:
        phi_new = model.basis(a_new, obs.x)
    except NumericOverflowError as exc:
        return _reject(state, v0, f"step 3: {exc}")
    v2 = float(obs.y - phi_new @ c)
    p, K_new = rls_gain_downdate(state.K, phi_new)
    c_new = c + p * v2
    if not np.isfinite(c_new).all():
        return _reject(state, v0, "step 3: non-finite commit")
    theta_new = ParameterState(a_new, c_new)
    new = RecursiveState(theta_new, S_new, K_new, state.t + 1)
    return new, StepTrace(t=new.t, residual_before=v0, theta_after=theta_new, alpha=alpha)


def hrgn_step(
    model: SeparableModel, state: RecursiveState, obs: Observation
) -> tuple[RecursiveState, StepTrace]:
    """Alternating update: RLS on c (K committed), then GN on a alone.

    The nonlinear step uses the leading k x k block of S with its own
    rank-one recursion and evaluates gradient and residual at the freshly
    committed c; the blocks never exchange covariance information.
    """
    k = model.k
    a, c = state.theta.a, state.theta.c
    try:
        phi = model.basis(a, obs.x)
        jac = model.basis_jacobian(a, obs.x)
    except NumericOverflowError as exc:
        return _reject(state, np.nan, f"model evaluation failed: {exc}")
    v0 = float(obs.y - phi @ c)
    p, K_new = rls_gain_downdate(state.K, phi)
    c_new = c + p * v0
    if not np.isfinite(c_new).all():
        return _reject(state, v0, "non-finite linear update")
    ga = -(jac.T @ c_new)
    v1 = float(obs.y - phi @ c_new)
    Sa_new, alpha = sm_downdate(_cc(state.S[:k, :k]), ga)
    a_new = a - Sa_new @ ga * v1
    if not np.isfinite(a_new).all():
        return _reject(state, v0, "non-finite nonlinear update")
    S_new = state.S.copy()
    S_new[:k, :k] = Sa_new
    theta_new = ParameterState(a_new, c_new)
    new = RecursiveState(theta_new, S_new, K_new, state.t + 1)
    return new, StepTrace(t=new.t, residual_before=v0, theta_after=theta_new, alpha=alpha)


def rvp_step(
    model: SeparableModel,
    state: RecursiveState,
    window: deque,
    obs: Observation,
) -> tuple[RecursiveState, StepTrace]:
    """Sliding-window elimination of c, then a GN step on a.

    The window advances by the incoming observation first (it covers the
    current time step). Until it holds at least n observations, or when its
    design matrix is rank deficient, the parameters are frozen and only the
    window accumulates.
    """
    k, n = model.k, model.n
    a, c = state.theta.a, state.theta.c
    window.append(obs)
    try:
        phi = model.basis(a, obs.x)
    except NumericOverflowError as exc:
        return _reject(state, np.nan, f"model evaluation failed: {exc}")
    v0 = float(obs.y - phi @ c)
    frozen_note = None
    if len(window) < n:
        frozen_note = "window shorter than linear dimension; parameters frozen"
    else:
        try:
            Phi_w = np.stack([model.basis(a, o.x) for o in window])
        except NumericOverflowError as exc:
            return _reject(state, v0, f"window evaluation failed: {exc}")
        Y_w = np.array([o.y for o in window])
        c_ls, _, rank, _ = np.linalg.lstsq(Phi_w, Y_w, rcond=None)
        if rank < n:
            frozen_note = "rank-deficient window design matrix; parameters frozen"
    if frozen_note is not None:
        new = RecursiveState(state.theta, state.S, state.K, state.t + 1)
        return new, StepTrace(
            t=new.t, residual_before=v0, theta_after=state.theta, note=frozen_note
        )
    try:
        jac = model.basis_jacobian(a, obs.x)
    except NumericOverflowError as exc:
        return _reject(state, v0, f"model evaluation failed: {exc}")
    ga = -(jac.T @ c_ls)
    v1 = float(obs.y - phi @ c_ls)
    Sa_new, alpha = sm_downdate(_cc(state.S[:k, :k]), ga)
    a_new = a - Sa_new @ ga * v1
    if not (np.isfinite(a_new).all() and np.isfinite(c_ls).all()):
        return _reject(state, v0, "non-finite update")
    S_new = state.S.copy()
    S_new[:k, :k] = Sa_new
    theta_new = ParameterState(a_new, c_ls)
    new = RecursiveState(theta_new, S_new, state.K, state.t + 1)
    return new, StepTrace(t=new.t, residual_before=v0, theta_after=theta_new, alpha=alpha)


def sgd_step(
    model: SeparableModel, state: RecursiveState, obs: Observation, learning_rate: float
) -> tuple[RecursiveState, StepTrace]:
    """Gradient step theta' = theta - eta g v; covariances untouched."""
    try:
        g = model.gradient_full(state.theta, obs)
        v0 = model.residual(state.theta, obs)
    except NumericOverflowError as exc:
        return _reject(state, np.nan, f"model evaluation failed: {exc}")
    theta_vec = state.theta.join() - learning_rate * g * v0
    if not np.isfinite(theta_vec).all():
        return _reject(state, v0, "non-finite update")
    theta_new = ParameterState.split(theta_vec, model.k)
    new = RecursiveState(theta_new, state.S, state.K, state.t + 1)
    return new, StepTrace(t=new.t, residual_before=v0, theta_after=theta_new)


def run_stream(
    model: SeparableModel,
    config: EstimatorConfig,
    observations: Iterable[Observation] | Sequence[Observation],
    initial: ParameterState,
    true_params: ParameterState | None = None,
) -> list[StepTrace]:
    """Fold the configured step over an observation sequence.

    Returns one trace per observation with ``t`` set to the 1-based stream
    position; rejected steps leave the state untouched and the stream
    continues. When true_params is given, each trace carries the relative
    parameter error of its post-update estimate.
    """
    observations = list(observations)
    if not observations:
        raise ValueError("empty observation sequence")
    config.validate_for(model)
    state = RecursiveState.initial(model, initial, config.s0, config.k0)
    window: deque = deque(maxlen=config.window_p)
    traces: list[StepTrace] = []
    with np.errstate(over="ignore", invalid="ignore", divide="ignore", under="ignore"):
        for pos, obs in enumerate(observations, start=1):
            if config.algorithm == "REPI":
                state, trace = repi_step(model, state, obs)
            elif config.algorithm == "RGN":
                state, trace = rgn_step(model, state, obs)
            elif config.algorithm == "HRGN":
                state, trace = hrgn_step(model, state, obs)
            elif config.algorithm == "RVP":
                state, trace = rvp_step(model, state, window, obs)
            else:
                state, trace = sgd_step(model, state, obs, config.learning_rate)
            rel = relative_param_error(trace.theta_after, true_params) if true_params else None
            traces.append(replace(trace, t=pos, rel_error=rel))
    return traces
