"""Friction-coefficient providers and their diffusion counterparts.

Three kinds of friction Gamma(q):

  * constant_scalar(lam):   Gamma = lam * I
  * constant_matrix(M):     Gamma = M (SPD, checked at construction)
  * hessian_sqrt(s):        Gamma(q) = s * sqrt(Hess V(q))

The diffusion coefficient is tied to the friction so that the Gibbs measure
stays invariant: sqrt(2 Gamma(q)) for the original dynamics, and
sqrt(2 Gamma(q) / alpha) for the time/momentum-rescaled dynamics.

For constant-Hessian potentials the hessian_sqrt provider decomposes the
Hessian once and memoizes Gamma (and its diffusion); for diagonal-Hessian
families it also exposes a vectorized per-particle diagonal fast path used
by the simulator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NotPositiveDefinite
from .linalg import check_symmetric, spd_sqrt
from .potentials import Potential

__all__ = ["FrictionSpec", "constant_scalar", "constant_matrix", "hessian_sqrt"]


@dataclass(frozen=True)
class FrictionSpec:
    """A friction provider; build via constant_scalar / constant_matrix /
    hessian_sqrt rather than directly."""

    kind: str                       # "constant_scalar" | "constant_matrix" | "hessian_sqrt"
    lam: Optional[float] = None     # constant_scalar
    matrix: Optional[np.ndarray] = None  # constant_matrix
    s: Optional[float] = None       # hessian_sqrt scale
    # memo for constant-Hessian potentials: id(potential) -> (potential, Gamma)
    _gamma_memo: dict = field(default_factory=dict, repr=False, compare=False)
    _diff_memo: dict = field(default_factory=dict, repr=False, compare=False)

    # -- friction coefficient ------------------------------------------------

    def gamma(self, p: Potential, q) -> np.ndarray:
        """Gamma(q) as a (d, d) SPD matrix; constant kinds ignore q."""
        d = p.dim
        if self.kind == "constant_scalar":
            return self.lam * np.eye(d)
        if self.kind == "constant_matrix":
            return self.matrix
        # hessian_sqrt
        if p.constant_hessian:
            memo = self._gamma_memo.get(id(p))
            if memo is not None and memo[0] is p:
                return memo[1]
            g = self.s * spd_sqrt(p.hess(np.zeros(d)))
            self._gamma_memo[id(p)] = (p, g)
            return g
        return self.s * spd_sqrt(p.hess(np.asarray(q, dtype=float)))

    def diffusion(self, p: Potential, q, rescaled: bool = False,
                  alpha: Optional[float] = None) -> np.ndarray:
        """sqrt(2 Gamma(q)), or sqrt(2 Gamma(q)/alpha) when rescaled."""
        scale = self._diffusion_scale(rescaled, alpha)
        if self.kind == "hessian_sqrt" and p.constant_hessian:
            key = (id(p), scale)
            memo = self._diff_memo.get(key)
            if memo is not None and memo[0] is p:
                return memo[1]
            out = spd_sqrt(scale * self.gamma(p, q))
            self._diff_memo[key] = (p, out)
            return out
        return spd_sqrt(scale * self.gamma(p, q))

    @staticmethod
    def _diffusion_scale(rescaled, alpha):
        if not rescaled:
            return 2.0
        if alpha is None or alpha <= 0:
            raise ValueError("rescaled diffusion needs alpha > 0")
        return 2.0 / alpha

    # -- vectorized diagonal fast path ---------------------------------------

    def supports_diagonal(self, p: Potential) -> bool:
        """True when Gamma(q) is diagonal for every q of this potential."""
        if self.kind == "constant_scalar":
            return True
        if self.kind == "constant_matrix":
            return bool(np.count_nonzero(self.matrix - np.diag(np.diagonal(self.matrix))) == 0)
        return p.hess_diag is not None

    def gamma_diag(self, p: Potential, positions) -> np.ndarray:
        """Diagonal entries of Gamma at each row of positions, shape (..., d).

        Only valid when supports_diagonal(p); the simulator uses this to
        avoid per-particle matrix decompositions.
        """
        positions = np.asarray(positions, dtype=float)
        if self.kind == "constant_scalar":
            return np.full_like(positions, self.lam)
        if self.kind == "constant_matrix":
            return np.broadcast_to(np.diagonal(self.matrix), positions.shape).copy()
        return self.s * np.sqrt(p.hess_diag(positions))

    def diffusion_diag(self, p: Potential, positions, rescaled: bool = False,
                       alpha: Optional[float] = None) -> np.ndarray:
        scale = self._diffusion_scale(rescaled, alpha)
        return np.sqrt(scale * self.gamma_diag(p, positions))

    def as_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "constant_scalar":
            out["lam"] = self.lam
        elif self.kind == "constant_matrix":
            out["matrix"] = np.asarray(self.matrix).tolist()
        else:
            out["s"] = self.s
        return out


def constant_scalar(lam: float) -> FrictionSpec:
    """Gamma = lam * I with lam > 0."""
    if lam <= 0:
        raise NotPositiveDefinite(f"constant scalar friction needs lam > 0, got {lam}")
    return FrictionSpec(kind="constant_scalar", lam=float(lam))


def constant_matrix(m) -> FrictionSpec:
    """Gamma = m for a fixed SPD matrix m; indefinite m is rejected here."""
    m = check_symmetric(m, "friction matrix")
    w = np.linalg.eigvalsh(m)
    if w[0] <= 0:
        raise NotPositiveDefinite(
            f"constant friction matrix has eigenvalue {w[0]:.6e} <= 0"
        )
    return FrictionSpec(kind="constant_matrix", matrix=m)


def hessian_sqrt(s: float) -> FrictionSpec:
    """Gamma(q) = s * sqrt(Hess V(q)) with s > 0."""
    if s <= 0:
        raise NotPositiveDefinite(f"hessian_sqrt friction needs s > 0, got {s}")
    return FrictionSpec(kind="hessian_sqrt", s=float(s))
