"""Separable nonlinear regression models.

A separable model predicts ``f(a, c; x) = sum_j c_j * phi_j(a; x)``: linear
in the coefficients ``c`` (length n) and nonlinear in the parameters ``a``
(length k). Estimators only ever talk to a model through its basis vector
``phi(a; x)`` and the basis Jacobian ``d phi / d a``, so adding a model
family means subclassing :class:`SeparableModel` and implementing those two.

Two families are provided: a three-term complex-exponential regression and
the RBF-AR(X) time-series model whose autoregressive coefficients are
state-dependent Gaussian RBF expansions.
"""

from __future__ import annotations

import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DimensionMismatchError, NumericOverflowError


class NegativeWidthWarning(RuntimeWarning):
    """An RBF width entered the exponent with a negative value.

    Nothing constrains widths to stay positive during estimation; a negative
    width turns the Gaussian bump into an unbounded exponential, which is
    usually a sign the estimator is diverging.
    """


def _as_vector(v, name: str, length: int) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != length:
        raise DimensionMismatchError(name, length, arr.shape[0] if arr.ndim == 1 else -1)
    return arr


@dataclass(frozen=True)
class ParameterState:
    """Partitioned parameter vector theta = (a, c).

    ``a`` holds the k nonlinear parameters, ``c`` the n linear coefficients.
    Both are stored as read-only float64 copies; all entries must be finite.
    """

    a: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=np.float64, copy=True).reshape(-1)
        c = np.array(self.c, dtype=np.float64, copy=True).reshape(-1)
        if a.size < 1 or c.size < 1:
            raise ValueError("ParameterState needs at least one nonlinear and one linear parameter")
        if not (np.isfinite(a).all() and np.isfinite(c).all()):
            raise ValueError("ParameterState entries must be finite")
        a.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "c", c)

    @property
    def k(self) -> int:
        return self.a.shape[0]

    @property
    def n(self) -> int:
        return self.c.shape[0]

    def join(self) -> np.ndarray:
        """Concatenated vector theta = (a, c), length k+n."""
        return np.concatenate([self.a, self.c])

    @staticmethod
    def split(theta, k: int) -> "ParameterState":
        """Inverse of :meth:`join` given the nonlinear dimension k."""
        theta = np.asarray(theta, dtype=np.float64).reshape(-1)
        return ParameterState(a=theta[:k], c=theta[k:])


@dataclass(frozen=True)
class Observation:
    """One time step: target ``y``, explanatory vector ``x``, time index ``t``.

    ``u`` optionally records the exogenous lag block (RBF-ARX only); for such
    models the same values are also packed into ``x``, which always carries
    everything the basis needs.
    """

    y: float
    x: np.ndarray
    t: int
    u: np.ndarray | None = None

    def __post_init__(self):
        x = np.array(self.x, dtype=np.float64, copy=True).reshape(-1)
        x.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", float(self.y))
        if self.u is not None:
            u = np.array(self.u, dtype=np.float64, copy=True).reshape(-1)
            u.flags.writeable = False
            object.__setattr__(self, "u", u)


class SeriesRecord(NamedTuple):
    """Raw time-series sample: time index, target, exogenous channels."""

    t: int
    y: float
    u: tuple[float, ...] = ()


class SeparableModel(ABC):
    """Base class for model families of the form sum_j c_j * phi_j(a; x).

    Subclasses implement :meth:`_basis` and :meth:`_basis_jacobian`; the
    public methods validate dimensions and finiteness. Instances are
    immutable after construction and all methods are pure functions of
    their arguments.
    """

    k: int
    n: int
    state_dim: int
    descriptor: str

    # -- subclass surface -------------------------------------------------

    @abstractmethod
    def _basis(self, a: np.ndarray, x: np.ndarray) -> np.ndarray:
        """phi(a; x), length n."""

    @abstractmethod
    def _basis_jacobian(self, a: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Matrix of partials d phi_j / d a_i, shape (n, k)."""

    # -- validated public operations --------------------------------------

    def basis(self, a, x) -> np.ndarray:
        a = _as_vector(a, "nonlinear parameters a", self.k)
        x = _as_vector(x, "state vector x", self.state_dim)
        phi = np.asarray(self._basis(a, x), dtype=np.float64)
        if not np.isfinite(phi).all():
            bad = int(np.flatnonzero(~np.isfinite(phi))[0])
            raise NumericOverflowError("basis output", index=bad)
        return phi

    def basis_jacobian(self, a, x) -> np.ndarray:
        a = _as_vector(a, "nonlinear parameters a", self.k)
        x = _as_vector(x, "state vector x", self.state_dim)
        jac = np.asarray(self._basis_jacobian(a, x), dtype=np.float64)
        if not np.isfinite(jac).all():
            bad = int(np.flatnonzero(~np.isfinite(jac).all(axis=1))[0])
            raise NumericOverflowError("basis Jacobian row", index=bad)
        return jac

    def predict(self, state: ParameterState, x) -> float:
        """Model output c . phi(a; x)."""
        c = _as_vector(state.c, "linear parameters c", self.n)
        return float(c @ self.basis(state.a, x))

    def residual(self, state: ParameterState, obs: Observation) -> float:
        """v = y - c . phi(a; x)."""
        return obs.y - self.predict(state, obs.x)

    def gradient_full(self, state: ParameterState, obs: Observation) -> np.ndarray:
        """Gradient of the residual w.r.t. theta = (a, c), length k+n.

        Nonlinear block: dv/da_i = -sum_j c_j dphi_j/da_i.
        Linear block:    dv/dc_j = -phi_j.
        """
        jac = self.basis_jacobian(state.a, obs.x)
        phi = self.basis(state.a, obs.x)
        return np.concatenate([-(jac.T @ state.c), -phi])

    def gradient_extended(self, a, c_tilde, obs: Observation) -> np.ndarray:
        """Residual gradient with the linear block forced to zero.

        The nonlinear block equals :meth:`gradient_full`'s nonlinear block
        evaluated at ``(a, c_tilde)``; the last n entries are exactly zero.
        """
        c_tilde = _as_vector(c_tilde, "linear parameters c", self.n)
        jac = self.basis_jacobian(a, obs.x)
        return np.concatenate([-(jac.T @ c_tilde), np.zeros(self.n)])


class ComplexExponential3(SeparableModel):
    """Three-term complex-exponential regression (k=4, n=3, 3-dim inputs).

    phi_1 = exp(-a2 x1^2) cos(a3 x1)
    phi_2 = exp(-a1 x1^2) cos(a2 x2)
    phi_3 = exp(-a4 x1^2) sin(a1 x3)

    The index wiring is deliberate (a2 pairs with x1 in the first exponent,
    the a1 exponent pairs with the a2*x2 cosine, and so on) and must not be
    "straightened out": only x1 feeds the exponents while x2, x3 appear in
    trigonometric arguments.
    """

    k = 4
    n = 3
    state_dim = 3
    descriptor = "complex-exponential-3"

    def _basis(self, a, x):
        a1, a2, a3, a4 = a
        x1, x2, x3 = x
        x1sq = x1 * x1
        return np.array(
            [
                np.exp(-a2 * x1sq) * np.cos(a3 * x1),
                np.exp(-a1 * x1sq) * np.cos(a2 * x2),
                np.exp(-a4 * x1sq) * np.sin(a1 * x3),
            ]
        )

    def _basis_jacobian(self, a, x):
        a1, a2, a3, a4 = a
        x1, x2, x3 = x
        x1sq = x1 * x1
        e2, e1, e4 = np.exp(-a2 * x1sq), np.exp(-a1 * x1sq), np.exp(-a4 * x1sq)
        jac = np.zeros((3, 4))
        # phi_1 = e2 * cos(a3 x1)
        jac[0, 1] = -x1sq * e2 * np.cos(a3 * x1)
        jac[0, 2] = -x1 * e2 * np.sin(a3 * x1)
        # phi_2 = e1 * cos(a2 x2)
        jac[1, 0] = -x1sq * e1 * np.cos(a2 * x2)
        jac[1, 1] = -x2 * e1 * np.sin(a2 * x2)
        # phi_3 = e4 * sin(a1 x3)
        jac[2, 0] = x3 * e4 * np.cos(a1 * x3)
        jac[2, 3] = -x1sq * e4 * np.sin(a1 * x3)
        return jac


@dataclass(frozen=True)
class RbfArxSpec:
    """Structural orders of an RBF-AR(X) model.

    p: AR order, q: exogenous order (0 for RBF-AR), m: number of RBF
    centers, d: state-vector dimension, input_dim: exogenous channels,
    dl: exogenous time delay.
    """

    p: int
    q: int = 0
    m: int = 1
    d: int = 1
    input_dim: int = 0
    dl: int = 0

    def __post_init__(self):
        if self.p < 1 or self.m < 1 or self.d < 1 or self.q < 0 or self.dl < 0:
            raise ValueError(f"invalid RBF-AR(X) orders: {self}")
        if self.q > 0 and self.input_dim < 1:
            raise ValueError("q > 0 requires at least one exogenous channel")

    @property
    def k(self) -> int:
        """Nonlinear parameter count: one width plus one d-dim center per RBF."""
        return self.m * (1 + self.d)

    @property
    def n(self) -> int:
        """Linear parameter count: (p+1)(m+1) AR coefficients plus exogenous blocks."""
        return (self.p + 1) * (self.m + 1) + self.q * self.input_dim * (self.m + 1)

    @property
    def state_dim(self) -> int:
        """Packed explanatory-vector length: state, AR lags, exogenous lags."""
        return self.d + self.p + self.q * self.input_dim


class RbfArx(SeparableModel):
    """RBF-AR(X) model cast into separable form.

    y_t = phi_0(s) + sum_{i=1..p} phi_i(s) y_{t-i}
        + sum_{j=1..q} sum_{ch} phi_{j,ch}(s) u^{ch}_{t-j-dl}
    with every coefficient function an affine RBF expansion
    phi_.(s) = c_0 + sum_{r=1..m} c_r exp(-lambda_r ||s - z_r||^2)
    over the state vector s = (y_{t-1}, ..., y_{t-d}).

    Explanatory vector packing (length d + p + q*input_dim):
    [state s (d) | AR lags y_{t-1}..y_{t-p} (p) | per channel: u_{t-1-dl}..u_{t-q-dl} (q)].
    Nonlinear packing: (lambda_1, z_1[1..d], lambda_2, z_2[1..d], ...).
    Linear packing: AR blocks (c_{i,0}..c_{i,m}) for i = 0..p, then exogenous
    blocks (w_{ch,j,0}..w_{ch,j,m}) ordered by channel, then lag.

    Widths enter the exponent as written, with no positivity constraint;
    a :class:`NegativeWidthWarning` is emitted when any width goes negative.
    """

    def __init__(self, spec: RbfArxSpec):
        self.spec = spec
        self.k = spec.k
        self.n = spec.n
        self.state_dim = spec.state_dim
        self.descriptor = f"rbf-arx({spec.p},{spec.q},{spec.m},{spec.d})"

    def unpack_nonlinear(self, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Split packed a into widths (m,) and centers (m, d)."""
        blocks = np.asarray(a, dtype=np.float64).reshape(self.spec.m, 1 + self.spec.d)
        return blocks[:, 0].copy(), blocks[:, 1:].copy()

    @staticmethod
    def pack_nonlinear(widths, centers) -> np.ndarray:
        """Inverse of :meth:`unpack_nonlinear`."""
        widths = np.asarray(widths, dtype=np.float64).reshape(-1, 1)
        centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
        return np.hstack([widths, centers]).reshape(-1)

    def split_x(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Split packed x into (state, AR lags, exogenous lags)."""
        s = self.spec
        return x[: s.d], x[s.d : s.d + s.p], x[s.d + s.p :]

    def _multipliers(self, x: np.ndarray) -> np.ndarray:
        """Per-block scalar multipliers: 1, the p AR lags, the exogenous lags."""
        _, ar, exog = self.split_x(x)
        return np.concatenate([[1.0], ar, exog])

    def _rbf_values(self, a: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        widths, centers = self.unpack_nonlinear(a)
        if np.any(widths < 0):
            bad = np.flatnonzero(widths < 0)
            warnings.warn(
                f"negative RBF width(s) at index {bad.tolist()}; estimate may be diverging",
                NegativeWidthWarning,
                stacklevel=3,
            )
        state = x[: self.spec.d]
        diff = state[None, :] - centers  # (m, d)
        sq = np.einsum("md,md->m", diff, diff)
        return np.exp(-widths * sq), diff, sq

    def _basis(self, a, x):
        rho, _, _ = self._rbf_values(a, x)
        mult = self._multipliers(x)
        # each block is (mult_b, mult_b * rho_1, ..., mult_b * rho_m)
        return (mult[:, None] * np.concatenate([[1.0], rho])[None, :]).reshape(-1)

    def _basis_jacobian(self, a, x):
        m, d = self.spec.m, self.spec.d
        rho, diff, sq = self._rbf_values(a, x)
        widths, _ = self.unpack_nonlinear(a)
        mult = self._multipliers(x)
        # d rho_r / d lambda_r = -||s - z_r||^2 rho_r
        # d rho_r / d z_{r,l}  = 2 lambda_r (s_l - z_{r,l}) rho_r
        drho = np.zeros((m, self.k))
        for r in range(m):
            col = r * (1 + d)
            drho[r, col] = -sq[r] * rho[r]
            drho[r, col + 1 : col + 1 + d] = 2.0 * widths[r] * diff[r] * rho[r]
        jac = np.zeros((self.n, self.k))
        n_blocks = mult.shape[0]
        for b in range(n_blocks):
            rows = slice(b * (1 + m) + 1, (b + 1) * (1 + m))  # skip the rho-free entry
            jac[rows, :] = mult[b] * drho
        return jac


def build_regressors(
    series: Sequence[SeriesRecord],
    spec: RbfArxSpec,
    holdout_from: int,
) -> tuple[list[Observation], list[Observation]]:
    """Turn a raw series into lagged observations and split train/holdout.

    The observation at positional index t targets y_t and packs
    (y_{t-1}..y_{t-d} | y_{t-1}..y_{t-p} | u lags per channel) into x; the
    split assigns indices < holdout_from to training. Raises ValueError when
    the series is too short for a single regressor or the split index is
    outside [1, len(series)].
    """
    y = np.array([r.y for r in series], dtype=np.float64)
    T = y.shape[0]
    first = max(spec.p, spec.d, (spec.q + spec.dl) if spec.q > 0 else 0)
    if T <= first:
        raise ValueError(f"series of length {T} too short: need more than {first} samples")
    if not (0 < holdout_from <= T):
        raise ValueError(f"holdout_from={holdout_from} outside valid range (0, {T}]")
    if spec.q > 0:
        if any(len(r.u) < spec.input_dim for r in series):
            raise ValueError(f"q={spec.q} requires {spec.input_dim} exogenous channel(s) on every record")
        u = np.array([r.u[: spec.input_dim] for r in series], dtype=np.float64)
    train: list[Observation] = []
    holdout: list[Observation] = []
    for t in range(first, T):
        state = y[t - spec.d : t][::-1]
        ar = y[t - spec.p : t][::-1]
        if spec.q > 0:
            exog = np.concatenate(
                [u[t - spec.q - spec.dl : t - spec.dl, ch][::-1] for ch in range(spec.input_dim)]
            )
        else:
            exog = np.empty(0)
        obs = Observation(y=y[t], x=np.concatenate([state, ar, exog]), t=t, u=exog if spec.q > 0 else None)
        (train if t < holdout_from else holdout).append(obs)
    return train, holdout
