"""Dense symmetric linear-algebra kernels.

Everything downstream -- friction matrices, Gaussian propagation, weight
matrices -- funnels through these few routines:

  * ``spd_sqrt``: principal square root of an SPD matrix
  * ``spd_sqrt_directional_derivative``: derivative of that square root along
    a symmetric perturbation (Sylvester equation in the eigenbasis)
  * ``expm``: matrix exponential e^{m t}
  * ``gaussian_quadratic_expectation``: E[x' Q x + l' x + c] under N(mean, cov)

All routines are pure and deterministic.  The square root and its derivative
share a single eigendecomposition; ``expm`` delegates to scipy's
scaling-and-squaring Pade implementation with an eigendecomposition fast path
for comfortably diagonalizable inputs (the drift matrices we care about are
defective exactly at the critical damping point, where Pade is the right
tool).
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import NotPositiveDefinite, NotSymmetric

__all__ = [
    "check_symmetric",
    "sym_eig",
    "spd_sqrt",
    "spd_sqrt_directional_derivative",
    "expm",
    "gaussian_quadratic_expectation",
]

#: relative symmetry slack: |M_ij - M_ji| <= SYM_TOL * max(1, ||M||_F)
SYM_TOL = 1e-12


def check_symmetric(m, name="matrix"):
    """Validate (and symmetrize) a square matrix.

    Parameters
    ----------
    m : array_like, shape (d, d)
    name : str
        Used in error messages.

    Returns
    -------
    ndarray
        ``(m + m.T)/2`` as float64, after checking the asymmetry is within
        ``SYM_TOL * max(1, ||m||_F)``.

    Raises
    ------
    NotSymmetric
        If the asymmetry exceeds tolerance or the matrix is not square.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotSymmetric(f"{name} must be square, got shape {m.shape}")
    scale = max(1.0, float(np.linalg.norm(m, "fro")))
    skew = np.max(np.abs(m - m.T)) if m.size else 0.0
    if skew > SYM_TOL * scale:
        raise NotSymmetric(
            f"{name} is not symmetric: max |M_ij - M_ji| = {skew:.3e} "
            f"exceeds {SYM_TOL:.1e} * max(1, ||M||_F)"
        )
    return 0.5 * (m + m.T)


def sym_eig(m, name="matrix"):
    """Eigendecomposition of a symmetric matrix, ascending eigenvalues.

    Returns
    -------
    (w, u) : (ndarray, ndarray)
        ``u @ diag(w) @ u.T`` reconstructs the symmetrized input.
    """
    m = check_symmetric(m, name)
    w, u = np.linalg.eigh(m)
    return w, u


def _spd_floor(w, tol):
    """Default positive-definiteness floor: 1e-10 * largest |eigenvalue|."""
    if tol is not None:
        return tol
    return 1e-10 * float(np.max(np.abs(w))) if w.size else 0.0


def spd_sqrt(m, tol=None):
    """Principal square root of a symmetric positive definite matrix.

    Parameters
    ----------
    m : array_like, shape (d, d)
        Symmetric with smallest eigenvalue above ``tol``.
    tol : float, optional
        Positive-definiteness floor.  Defaults to ``1e-10 * max |eig|``.

    Returns
    -------
    ndarray
        Symmetric positive definite R with R @ R = m (up to roundoff)

    Raises
    ------
    NotPositiveDefinite
        If any eigenvalue is <= ``tol``.
    """
    w, u = sym_eig(m)
    floor = _spd_floor(w, tol)
    if w.size and w[0] <= floor:
        raise NotPositiveDefinite(
            f"matrix has eigenvalue {w[0]:.6e} <= tolerance {floor:.3e}"
        )
    r = (u * np.sqrt(w)) @ u.T
    return 0.5 * (r + r.T)


def spd_sqrt_directional_derivative(m, dm, tol=None):
    """Directional derivative of the SPD square root.

    Solves the Sylvester equation R X + X R = dm for X, where
    R = spd_sqrt(m); X is the derivative of sqrt at m along dm.  In the
    eigenbasis of m the solution is elementwise:

        X~_kl = (U' dm U)_kl / (sqrt(w_k) + sqrt(w_l))

    Parameters
    ----------
    m : array_like, shape (d, d)
        Symmetric positive definite.
    dm : array_like, shape (d, d)
        Symmetric perturbation direction.

    Returns
    -------
    ndarray
        Symmetric X with spd_sqrt(m) @ X + X @ spd_sqrt(m) = dm.

    Raises
    ------
    NotPositiveDefinite
        Propagated from the square root of ``m``.
    """
    w, u = sym_eig(m)
    floor = _spd_floor(w, tol)
    if w.size and w[0] <= floor:
        raise NotPositiveDefinite(
            f"matrix has eigenvalue {w[0]:.6e} <= tolerance {floor:.3e}"
        )
    dm = check_symmetric(dm, "dm")
    roots = np.sqrt(w)
    dm_tilde = u.T @ dm @ u
    x_tilde = dm_tilde / (roots[:, None] + roots[None, :])
    x = u @ x_tilde @ u.T
    return 0.5 * (x + x.T)


#: eigendecomposition fast path only when the eigenvector basis is this
#: well-conditioned; defective/near-defective matrices fall through to Pade
_EXPM_COND_MAX = 1e8


def expm(m, t=1.0):
    """Matrix exponential e^{m t} for a square real matrix.

    Uses an eigendecomposition when ``m`` is diagonalizable with a
    well-conditioned eigenvector matrix, otherwise scipy's
    scaling-and-squaring Pade routine.  Always defined; no SPD requirement.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expm needs a square matrix, got shape {m.shape}")
    if t == 0.0:
        return np.eye(m.shape[0])
    try:
        vals, vecs = np.linalg.eig(m)
        cond = np.linalg.cond(vecs)
    except np.linalg.LinAlgError:
        cond = np.inf
    if np.isfinite(cond) and cond < _EXPM_COND_MAX:
        out = (vecs * np.exp(vals * t)) @ np.linalg.inv(vecs)
        out = np.real_if_close(out, tol=1000)
        if np.isrealobj(out):
            return np.asarray(out, dtype=float)
    return scipy.linalg.expm(m * t)


def gaussian_quadratic_expectation(mean, cov, quad, lin=None, const=0.0):
    """E[x' quad x + lin' x + const] for x ~ N(mean, cov).

    Closed form: tr(quad @ cov) + mean' quad mean + lin' mean + const.

    Parameters
    ----------
    mean : array_like, shape (d,)
    cov : array_like, shape (d, d)
        Symmetric positive definite.
    quad : array_like, shape (d, d)
        Symmetric quadratic-form matrix (may be indefinite or zero).
    lin : array_like, shape (d,), optional
    const : float, optional

    Raises
    ------
    NotPositiveDefinite
        If ``cov`` is not positive definite.
    """
    mean = np.asarray(mean, dtype=float).ravel()
    cov = check_symmetric(cov, "cov")
    w = np.linalg.eigvalsh(cov)
    if w.size and w[0] <= _spd_floor(w, None):
        raise NotPositiveDefinite(
            f"covariance has eigenvalue {w[0]:.6e} <= tolerance"
        )
    quad = check_symmetric(quad, "quad")
    value = float(np.trace(quad @ cov) + mean @ quad @ mean) + float(const)
    if lin is not None:
        value += float(np.asarray(lin, dtype=float).ravel() @ mean)
    return value
