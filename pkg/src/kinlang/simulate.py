"""Euler-Maruyama ensemble simulation of the kinetic dynamics.

One update per particle and step:

    q+ = q + p dt
    p+ = p - grad V(q) dt - Gamma(q) p dt + diffusion(q) xi sqrt(dt)

with xi ~ N(0, I_d) drawn from a counter-based stream keyed by (seed, step),
so runs are reproducible and enlarging the ensemble extends -- never
reshuffles -- each particle's noise.  The rescaled dynamics form swaps the
diffusion for sqrt(2 Gamma / alpha); the caller supplies the already
rescaled potential and friction.

Plain EM on purpose: the step size is plumbing here, and acceptance tests
control dt explicitly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import NumericalBlowup
from .friction import FrictionSpec
from .gaussian import GaussianMoments, gaussian_chi2
from .linalg import spd_sqrt
from .potentials import Potential

__all__ = [
    "Ensemble",
    "SimConfig",
    "TrajectoryPoint",
    "philox_normals",
    "ensemble_at_point",
    "ensemble_from_moments",
    "step",
    "run",
    "estimate_chi2_gaussian_proxy",
    "write_trajectory_csv",
]

#: any coordinate beyond this magnitude is treated as a blown-up trajectory
BLOWUP_LIMIT = 1e12

#: counter-domain words keeping the init-sampling stream disjoint from the
#: per-step dynamics streams
_DOMAIN_INIT = 0
_DOMAIN_STEP = 1


def philox_normals(seed: int, step_index: int, shape, domain: int = _DOMAIN_STEP) -> np.ndarray:
    """Standard normals from the counter-based stream for (seed, step_index).

    The array fills row-major from one Philox stream, so particle i's draws
    (row i) do not depend on how many rows are requested -- the N-extension
    contract.  Exposed publicly so tests can rebuild or aggregate the exact
    increments a run consumed.
    """
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    bitgen = np.random.Philox(counter=[0, 0, step_index, domain], key=[seed, 0])
    return np.random.Generator(bitgen).standard_normal(shape)


@dataclass(frozen=True)
class Ensemble:
    """N phase-space particles plus the stream metadata that produced them."""

    positions: np.ndarray  # (N, d)
    momenta: np.ndarray    # (N, d)
    time: float
    seed: int
    steps_taken: int
    dt: float

    def __post_init__(self):
        q = np.asarray(self.positions, dtype=float)
        p = np.asarray(self.momenta, dtype=float)
        if q.ndim != 2 or p.shape != q.shape:
            raise ValueError(
                f"positions/momenta must be matching (N, d) arrays, got "
                f"{q.shape} and {p.shape}"
            )
        if q.shape[0] < 1:
            raise ValueError("ensemble needs at least one particle")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        object.__setattr__(self, "positions", q)
        object.__setattr__(self, "momenta", p)

    @property
    def n_particles(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def summary(self):
        """Empirical mean (2d,) and covariance (2d, 2d), q-block first.

        A single particle carries no covariance information; the covariance
        block is NaN in that case rather than raising.
        """
        x = np.hstack([self.positions, self.momenta])
        mean = x.mean(axis=0)
        if self.n_particles < 2:
            cov = np.full((x.shape[1], x.shape[1]), np.nan)
        else:
            cov = np.atleast_2d(np.cov(x, rowvar=False, ddof=1))
        return mean, cov


@dataclass(frozen=True)
class SimConfig:
    dt: float
    n_steps: int
    n_particles: int
    seed: int
    dynamics_form: str = "original"   # "original" | "rescaled"
    alpha: Optional[float] = None     # required for the rescaled form

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.n_steps < 0:
            raise ValueError("n_steps must be >= 0")
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        if self.dynamics_form not in ("original", "rescaled"):
            raise ValueError(f"unknown dynamics_form {self.dynamics_form!r}")
        if self.dynamics_form == "rescaled" and not (self.alpha and self.alpha > 0):
            raise ValueError("rescaled dynamics needs alpha > 0")

    @property
    def rescaled(self) -> bool:
        return self.dynamics_form == "rescaled"


@dataclass(frozen=True)
class TrajectoryPoint:
    time: float
    mean: np.ndarray        # (2d,)
    cov: np.ndarray         # (2d, 2d)
    chi2_proxy: Optional[float] = None


def ensemble_at_point(q0, p0, n: int, seed: int, dt: float) -> Ensemble:
    """All particles at one phase-space point (deterministic init)."""
    q0 = np.atleast_1d(np.asarray(q0, dtype=float))
    p0 = np.atleast_1d(np.asarray(p0, dtype=float))
    return Ensemble(
        positions=np.tile(q0, (n, 1)),
        momenta=np.tile(p0, (n, 1)),
        time=0.0, seed=seed, steps_taken=0, dt=dt,
    )


def ensemble_from_moments(moments: GaussianMoments, n: int, seed: int, dt: float) -> Ensemble:
    """Particles drawn from a phase-space Gaussian, from the init stream."""
    d = moments.dim
    z = philox_normals(seed, 0, (n, 2 * d), domain=_DOMAIN_INIT)
    w, u = np.linalg.eigh(moments.cov)
    root = (u * np.sqrt(np.clip(w, 0.0, None))) @ u.T
    x = moments.mean + z @ root.T
    return Ensemble(
        positions=x[:, :d], momenta=x[:, d:],
        time=0.0, seed=seed, steps_taken=0, dt=dt,
    )


def _check_finite(q, p, step_index):
    bad = (~np.isfinite(q)).any() or (~np.isfinite(p)).any() \
        or np.abs(q).max() > BLOWUP_LIMIT or np.abs(p).max() > BLOWUP_LIMIT
    if bad:
        raise NumericalBlowup(
            f"trajectory left the trusted range at step {step_index} "
            f"(|coordinate| > {BLOWUP_LIMIT:g} or non-finite); "
            "check dt against the stability heuristic",
            step_index=step_index,
        )


def step(ensemble: Ensemble, p: Potential, spec: FrictionSpec, cfg: SimConfig,
         xi: Optional[np.ndarray] = None) -> Ensemble:
    """One Euler-Maruyama update of the whole ensemble.

    xi overrides the (N, d) noise draw -- tests use it for zero-noise and
    common-random-number runs; None draws from the keyed stream for
    step index `ensemble.steps_taken`.
    """
    q = ensemble.positions
    mom = ensemble.momenta
    n, d = q.shape
    if xi is None:
        xi = philox_normals(ensemble.seed, ensemble.steps_taken, (n, d))
    dt = cfg.dt
    root_dt = np.sqrt(dt)

    drift_p = -p.grad(q) * dt
    if spec.kind == "hessian_sqrt" and not p.constant_hessian:
        if spec.supports_diagonal(p):
            gdiag = spec.gamma_diag(p, q)
            fric = gdiag * mom
            kick = np.sqrt((2.0 / cfg.alpha if cfg.rescaled else 2.0) * gdiag) * xi
        else:
            # general position-dependent friction: per-particle decompositions
            fric = np.empty_like(mom)
            kick = np.empty_like(mom)
            for i in range(n):
                g = spec.gamma(p, q[i])
                fric[i] = g @ mom[i]
                kick[i] = spd_sqrt((2.0 / cfg.alpha if cfg.rescaled else 2.0) * g) @ xi[i]
    else:
        g = spec.gamma(p, q[0])
        sig = spec.diffusion(p, q[0], rescaled=cfg.rescaled, alpha=cfg.alpha)
        fric = mom @ g.T
        kick = xi @ sig.T

    new_q = q + mom * dt
    new_p = mom + drift_p - fric * dt + kick * root_dt
    step_index = ensemble.steps_taken + 1
    _check_finite(new_q, new_p, step_index)
    return replace(
        ensemble,
        positions=new_q,
        momenta=new_p,
        time=ensemble.time + dt,
        steps_taken=step_index,
    )


def stability_warning(ensemble: Ensemble, p: Potential, spec: FrictionSpec, cfg: SimConfig):
    """Warn when dt * lambda_max(Gamma) >= 2 at the mean initial position."""
    q_bar = ensemble.positions.mean(axis=0)
    lam_max = float(np.linalg.eigvalsh(spec.gamma(p, q_bar))[-1])
    if cfg.dt * lam_max >= 2.0:
        warnings.warn(
            f"dt * lambda_max(Gamma) = {cfg.dt * lam_max:.3g} >= 2 at the mean "
            "initial position; Euler-Maruyama is likely unstable",
            RuntimeWarning,
            stacklevel=3,
        )


def run(init: Ensemble, p: Potential, spec: FrictionSpec, cfg: SimConfig,
        record_every: int = 1, pi: Optional[GaussianMoments] = None,
        xi_fn: Optional[Callable[[int, tuple], np.ndarray]] = None):
    """Apply cfg.n_steps EM steps, recording moment summaries.

    Returns a list of TrajectoryPoint (initial state included, then every
    record_every steps).  When pi is given each record also carries the
    moment-matched Gaussian chi2 proxy against it.  xi_fn(step_index, shape)
    overrides noise generation for every step (tests only).

    Deterministic given (init, cfg): identical inputs produce bit-identical
    summaries.  Raises NumericalBlowup with the offending step index.
    """
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    stability_warning(init, p, spec, cfg)

    def record(ens):
        mean, cov = ens.summary()
        proxy = None
        if pi is not None:
            proxy = estimate_chi2_gaussian_proxy(ens, pi)
        return TrajectoryPoint(time=ens.time, mean=mean, cov=cov, chi2_proxy=proxy)

    ens = init
    out = [record(ens)]
    for k in range(cfg.n_steps):
        xi = xi_fn(ens.steps_taken, ens.positions.shape) if xi_fn is not None else None
        ens = step(ens, p, spec, cfg, xi=xi)
        if (k + 1) % record_every == 0 or k + 1 == cfg.n_steps:
            out.append(record(ens))
    return out


def estimate_chi2_gaussian_proxy(ensemble: Ensemble, pi: GaussianMoments) -> float:
    """chi2 of the moment-matched Gaussian against pi.

    A proxy: exact only when the ensemble's law is Gaussian (quadratic
    potentials); for other potentials it captures the first-two-moments gap
    only.  Even at the target it carries an O(dim^2 / N) positive bias from
    moment-estimation noise.  Degenerate empirical covariance raises
    NotPositiveDefinite; a divergent divergence returns +inf.
    """
    mean, cov = ensemble.summary()
    fit = GaussianMoments(mean=mean, cov=cov)
    return gaussian_chi2(fit, pi)


def write_trajectory_csv(points, path, dim: int):
    """CSV with columns time, mean_1..mean_2d, cov_11..cov_2d2d, chi2_proxy."""
    twod = 2 * dim
    cols = ["time"]
    cols += [f"mean_{i + 1}" for i in range(twod)]
    cols += [f"cov_{i + 1}{j + 1}" for i in range(twod) for j in range(twod)]
    cols += ["chi2_proxy"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for pt in points:
            row = [repr(float(pt.time))]
            row += [repr(float(x)) for x in pt.mean]
            row += [repr(float(x)) for x in np.asarray(pt.cov).ravel()]
            row.append("" if pt.chi2_proxy is None else repr(float(pt.chi2_proxy)))
            fh.write(",".join(row) + "\n")
