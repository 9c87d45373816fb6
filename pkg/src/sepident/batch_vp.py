"""Offline variable-projection solver for batch separable least squares.

Eliminates the linear coefficients of ``min ||Phi(a) c - y||^2`` through a
least-squares solve and Gauss-Newton-iterates on the reduced residual
``r2(a) = ||(I - Phi Phi^+) y||^2``. Provides both the exact reduced-function
Jacobian and the one-term simplification that drops the second (adjoint)
term, plus the joint block system whose linear gradient block is pinned to
zero; eliminating the linear block of that system reproduces the one-term
Jacobian's Gauss-Newton step, which is what the recursive estimator exploits
online.

All solves use orthogonal factorizations (SVD/QR); normal equations appear
only in the Gauss-Newton direction where they are standard.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, SingularMatrixError
from .models import ParameterState, SeparableModel

MAX_CONDITION = 1e12


@dataclass(frozen=True)
class BatchDataset:
    """Batch of m observations for one model: targets Y (m,), inputs X (m, state_dim)."""

    model: SeparableModel
    Y: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=np.float64).reshape(-1)
        X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        if X.shape[0] != Y.shape[0]:
            raise DimensionMismatchError("X rows", Y.shape[0], X.shape[0])
        if X.shape[1] != self.model.state_dim:
            raise DimensionMismatchError("X columns", self.model.state_dim, X.shape[1])
        if Y.shape[0] < self.model.n:
            raise ValueError(f"need at least n={self.model.n} observations, got {Y.shape[0]}")
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "X", X)

    @property
    def m(self) -> int:
        return self.Y.shape[0]


@dataclass
class VpOptions:
    """Gauss-Newton loop controls for :func:`vp_fit`."""

    max_iter: int = 100
    gradient_tol: float = 1e-8
    step_tol: float = 1e-12
    jacobian: str = "kaufman"  # "kaufman" or "gp"
    backtracking: bool = True


@dataclass
class VpSolveReport:
    a_hat: np.ndarray
    c_hat: np.ndarray
    iterations: int
    residual_history: list[float] = field(default_factory=list)
    converged: bool = False
    reason: str = ""


def design_matrix(data: BatchDataset, a) -> np.ndarray:
    """Phi(a): row i is the basis vector at input x_i, shape (m, n)."""
    return np.stack([data.model.basis(a, x) for x in data.X])


def _check_condition(Phi: np.ndarray) -> None:
    # column equilibration before estimating the condition number: RBF bases
    # produce wildly scaled columns that would otherwise dominate the estimate
    norms = np.linalg.norm(Phi, axis=0)
    if np.any(norms == 0.0):
        raise SingularMatrixError("design matrix (zero column)", cond=np.inf)
    cond = np.linalg.cond(Phi / norms)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularMatrixError("design matrix", cond=float(cond))


def _factor(data: BatchDataset, a):
    """Shared factorization: returns (Phi, Q, R, c_hat, r2_vec)."""
    Phi = design_matrix(data, a)
    _check_condition(Phi)
    Q, R = np.linalg.qr(Phi)
    c_hat = np.linalg.solve(R, Q.T @ data.Y)
    r2_vec = data.Y - Phi @ c_hat
    return Phi, Q, R, c_hat, r2_vec


def solve_linear(data: BatchDataset, a) -> tuple[np.ndarray, np.ndarray]:
    """Optimal linear coefficients for fixed a.

    Returns (c_hat, residual_vec) with residual_vec = Phi c_hat - Y, which is
    orthogonal to the columns of Phi.
    """
    Phi, _, _, c_hat, r2_vec = _factor(data, a)
    return c_hat, -r2_vec


def reduced_residual(data: BatchDataset, a) -> tuple[np.ndarray, float]:
    """Projection of Y onto the orthogonal complement of range(Phi(a)).

    Returns (r2_vec, ||r2_vec||^2).
    """
    _, _, _, _, r2_vec = _factor(data, a)
    return r2_vec, float(r2_vec @ r2_vec)


def _basis_jacobian_stack(data: BatchDataset, a) -> np.ndarray:
    """dPhi tensor: entry [i, j, l] = d phi_j / d a_l at x_i, shape (m, n, k)."""
    return np.stack([data.model.basis_jacobian(a, x) for x in data.X])


def jacobian_kaufman(data: BatchDataset, a) -> np.ndarray:
    """One-term reduced-function Jacobian -P_perp (dPhi c_hat), shape (m, k)."""
    _, Q, _, c_hat, _ = _factor(data, a)
    dphi = _basis_jacobian_stack(data, a)
    A1 = np.einsum("mnk,n->mk", dphi, c_hat)
    return -(A1 - Q @ (Q.T @ A1))


def jacobian_gp(data: BatchDataset, a) -> np.ndarray:
    """Exact Jacobian of r2_vec w.r.t. a, shape (m, k).

    Column l is -P_perp D_l c_hat - (Phi^+)^T D_l^T r2_vec with D_l the
    elementwise basis derivative matrix; matches central finite differences
    of :func:`reduced_residual`.
    """
    _, Q, R, c_hat, r2_vec = _factor(data, a)
    dphi = _basis_jacobian_stack(data, a)
    A1 = np.einsum("mnk,n->mk", dphi, c_hat)
    term1 = -(A1 - Q @ (Q.T @ A1))
    B = np.einsum("mnk,m->nk", dphi, r2_vec)
    term2 = -(Q @ np.linalg.solve(R.T, B))  # (Phi^+)^T = Q R^{-T}
    return term1 + term2


def epi_direction(data: BatchDataset, state: ParameterState) -> tuple[np.ndarray, np.ndarray]:
    """Joint Gauss-Newton direction with the linear gradient block zeroed.

    The linear coefficients are first re-solved to their optimum for
    state.a (the zero block is only valid there); then the (k+n) block
    system is solved for (delta_a, delta_c). The returned delta_a equals
    the Gauss-Newton step of the one-term Jacobian, and delta_c satisfies
    Jc^T Jc delta_c + Jc^T Ja delta_a = 0.
    """
    k = data.model.k
    Phi, _, _, c_hat, r2_vec = _factor(data, state.a)
    dphi = _basis_jacobian_stack(data, state.a)
    Ja = np.einsum("mnk,n->mk", dphi, c_hat)  # residual Jacobian w.r.t. a at c_hat
    r = -r2_vec  # residual Phi c_hat - Y
    M = np.block([[Ja.T @ Ja, Ja.T @ Phi], [Phi.T @ Ja, Phi.T @ Phi]])
    rhs = np.concatenate([-(Ja.T @ r), np.zeros(data.model.n)])
    try:
        delta = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("joint block system", cond=float(np.linalg.cond(M))) from exc
    if not np.isfinite(delta).all():
        raise SingularMatrixError("joint block system", cond=float(np.linalg.cond(M)))
    return delta[:k], delta[k:]


def _gn_direction(J: np.ndarray, grad: np.ndarray) -> np.ndarray | None:
    """Solve (J^T J) d = -grad, escalating Levenberg damping when singular."""
    JtJ = J.T @ J
    mu = 0.0
    for _ in range(9):  # undamped try plus 8 escalations
        try:
            d = np.linalg.solve(JtJ + mu * np.eye(JtJ.shape[0]), -grad)
            if np.isfinite(d).all():
                return d
        except np.linalg.LinAlgError:
            pass
        mu = 1e-6 if mu == 0.0 else mu * 10.0
    return None


def vp_fit(data: BatchDataset, a0, opts: VpOptions | None = None) -> VpSolveReport:
    """Gauss-Newton on the reduced residual with Armijo backtracking.

    ``gradient_tol`` applies to ||J^T r2_vec|| (gradient of r2/2); the
    Armijo test uses the full r2 with sufficient-decrease constant 1e-4 and
    halving steps (at most 20). Singular normal equations fall back to
    Levenberg damping (mu from 1e-6, x10, at most 8 escalations).
    """
    if opts is None:
        opts = VpOptions()
    if opts.jacobian not in ("kaufman", "gp"):
        raise ValueError(f"unknown jacobian variant {opts.jacobian!r}")
    jac_fn = jacobian_kaufman if opts.jacobian == "kaufman" else jacobian_gp
    a = np.asarray(a0, dtype=np.float64).copy()
    r2_vec, r2 = reduced_residual(data, a)
    history = [r2]
    report = VpSolveReport(a_hat=a, c_hat=np.empty(0), iterations=0, residual_history=history)
    for it in range(1, opts.max_iter + 1):
        J = jac_fn(data, a)
        grad = J.T @ r2_vec
        if np.linalg.norm(grad) <= opts.gradient_tol:
            report.converged, report.reason = True, "gradient tolerance reached"
            break
        d = _gn_direction(J, grad)
        if d is None:
            report.converged, report.reason = False, "singular normal equations"
            break
        if np.linalg.norm(d) <= opts.step_tol:
            report.converged, report.reason = True, "step tolerance reached"
            break
        slope = 2.0 * (grad @ d)  # directional derivative of r2
        step = 1.0
        accepted = False
        best_r2 = np.inf
        for _ in range(21):  # full step plus 20 halvings
            a_try = a + step * d
            try:
                r2_vec_try, r2_try = reduced_residual(data, a_try)
            except SingularMatrixError:
                step *= 0.5
                continue
            best_r2 = min(best_r2, r2_try)
            if (not opts.backtracking) or r2_try <= r2 + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # no measurable decrease left at floating-point resolution
            if best_r2 <= r2 * (1.0 + 8.0 * np.finfo(float).eps):
                report.converged, report.reason = True, "no measurable decrease (at numerical optimum)"
            else:
                report.converged, report.reason = False, "line search failed"
            break
        a, r2_vec, r2 = a_try, r2_vec_try, r2_try
        history.append(r2)
        report.iterations = it
        if np.linalg.norm(step * d) <= opts.step_tol:
            report.converged, report.reason = True, "step tolerance reached"
            break
    else:
        report.reason = "max iterations reached"
    report.a_hat = a
    report.c_hat, _ = solve_linear(data, a)
    return report
