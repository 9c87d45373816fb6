"""Evaluation metrics and the persistent-excitation checker."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MetricDomainError
from .models import Observation, ParameterState, SeparableModel

PE_TOLERANCE = 1e-10


@dataclass(frozen=True)
class PeReport:
    """Windowed second-moment eigenvalue bounds of an information-vector sequence."""

    is_pe: bool
    beta: float
    gamma: float
    N: int


def relative_param_error(theta_hat: ParameterState, theta_true: ParameterState) -> float:
    """||theta_hat - theta_true|| / ||theta_true|| over the concatenated (a, c)."""
    if theta_hat.k != theta_true.k or theta_hat.n != theta_true.n:
        raise MetricDomainError(
            f"parameter dimensions differ: ({theta_hat.k},{theta_hat.n}) vs ({theta_true.k},{theta_true.n})"
        )
    ref = np.linalg.norm(theta_true.join())
    if ref == 0.0:
        raise MetricDomainError("relative error undefined for zero true parameter vector")
    return float(np.linalg.norm(theta_hat.join() - theta_true.join()) / ref)


def cumulative_fit_error(predictions, targets, t: int) -> float:
    """Mean squared prediction error over the first t entries."""
    if t <= 0:
        raise MetricDomainError("cumulative fit error undefined for t <= 0")
    predictions = np.asarray(predictions, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if predictions.shape[0] < t or targets.shape[0] < t:
        raise MetricDomainError(f"need at least t={t} predictions and targets")
    diff = predictions[:t] - targets[:t]
    return float(diff @ diff / t)


def prediction_accuracy(model: SeparableModel, state: ParameterState, holdout: list[Observation]) -> float:
    """Mean squared one-step-ahead prediction error over a holdout set.

    Regressor inputs are the recorded (true) lagged values, not simulated
    outputs, so this measures one-step generalization of the fitted model.
    """
    if not holdout:
        raise MetricDomainError("prediction accuracy undefined for an empty holdout")
    errs = np.array([obs.y - model.predict(state, obs.x) for obs in holdout])
    return float(errs @ errs / errs.shape[0])


def pe_check(vectors, N: int) -> PeReport:
    """Persistent-excitation check over every length-N window.

    For each window the second-moment matrix (1/N) sum phi phi^T is formed;
    beta is the smallest eigenvalue over all windows and gamma the largest.
    The sequence is persistently exciting when beta stays above a small
    positive tolerance.
    """
    V = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    T, dim = V.shape
    if N < dim:
        raise MetricDomainError(f"window length N={N} must be at least the vector dimension {dim}")
    if T < N:
        raise MetricDomainError(f"need at least N={N} vectors, got {T}")
    beta = np.inf
    gamma = -np.inf
    for start in range(T - N + 1):
        W = V[start : start + N]
        eigs = np.linalg.eigvalsh(W.T @ W / N)
        beta = min(beta, eigs[0])
        gamma = max(gamma, eigs[-1])
    return PeReport(is_pe=bool(beta > PE_TOLERANCE), beta=float(beta), gamma=float(gamma), N=N)
