"""Pure numpy reference implementations of the hot per-step kernels.

These are the operations every estimator executes once per observation, so
they dominate stream runtime. The compiled backend in ``_core.pyx`` mirrors
this module exactly; both must keep results symmetric bitwise (the downdates
write the symmetrized matrix).
"""

import numpy as np


def rls_gain(K: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Least-squares gain p = K phi / (1 + phi^T K phi).

    The denominator is >= 1 for PSD K, so this never divides by zero.
    """
    Kphi = K @ phi
    return Kphi / (1.0 + phi @ Kphi)


def sm_downdate(M: np.ndarray, g: np.ndarray) -> tuple[np.ndarray, float]:
    """Rank-one covariance downdate M' = M - (M g)(M g)^T / alpha.

    alpha = 1 + g^T M g. Equivalent to the Sherman-Morrison inverse of
    M^{-1} + g g^T. Returns (symmetrized M', alpha).
    """
    Mg = M @ g
    alpha = 1.0 + g @ Mg
    out = M - np.outer(Mg, Mg) / alpha
    return 0.5 * (out + out.T), float(alpha)


def rls_gain_downdate(K: np.ndarray, phi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gain plus committed covariance: p and (I - p phi^T) K, symmetrized.

    For symmetric K the downdate equals ``sm_downdate(K, phi)[0]``; both are
    computed from a single K phi product.
    """
    Kphi = K @ phi
    denom = 1.0 + phi @ Kphi
    p = Kphi / denom
    out = K - np.outer(Kphi, Kphi) / denom
    return p, 0.5 * (out + out.T)
