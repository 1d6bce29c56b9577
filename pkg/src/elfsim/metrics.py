"""Closed-form Gaussian divergences and moment-based proxies.

Between Gaussians the KL, Wasserstein-2 and relative Fisher information have
closed forms; sampler output is reduced to a moment-matched Gaussian law and
compared against the target through them.  Matrix square roots use symmetric
eigendecomposition with eigenvalues clipped at zero (tolerance 1e-12) so the
proxies are deterministic and never go complex.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_EIG_TOL = 1e-12
_REG_EPS = 1e-10


@dataclass(frozen=True)
class GaussianLaw:
    """N(mean, cov) with cov symmetric positive semidefinite."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.atleast_1d(np.asarray(self.mean, dtype=float)))
        object.__setattr__(self, "cov", np.atleast_2d(np.asarray(self.cov, dtype=float)))
        d = self.mean.shape[0]
        if self.cov.shape != (d, d):
            raise ValueError("cov must be (d, d) matching mean length")
        if not np.allclose(self.cov, self.cov.T, atol=1e-10):
            raise ValueError("cov must be symmetric")

    @property
    def d(self) -> int:
        return self.mean.shape[0]


def psd_sqrt(mat: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition, clipping at 0."""
    mat = np.asarray(mat, dtype=float)
    vals, vecs = np.linalg.eigh(0.5 * (mat + mat.T))
    scale = max(1.0, float(np.max(np.abs(vals))) if vals.size else 1.0)
    if np.min(vals) < -_EIG_TOL * scale:
        raise ValueError(f"matrix is not PSD (min eigenvalue {vals.min():g})")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def gaussian_kl(a: GaussianLaw, b: GaussianLaw) -> float:
    """KL(a || b) for Gaussians.

    0.5 * ( tr(Sb^-1 Sa) - d + (mb-ma)^T Sb^-1 (mb-ma) + ln det Sb - ln det Sa )
    """
    if a.d != b.d:
        raise ValueError("dimension mismatch")
    d = a.d
    dm = b.mean - a.mean
    sol = np.linalg.solve(b.cov, a.cov)
    quad = float(dm @ np.linalg.solve(b.cov, dm))
    sign_a, logdet_a = np.linalg.slogdet(a.cov)
    sign_b, logdet_b = np.linalg.slogdet(b.cov)
    if sign_a <= 0 or sign_b <= 0:
        raise ValueError("covariances must be positive definite for KL")
    return 0.5 * (float(np.trace(sol)) - d + quad + logdet_b - logdet_a)


def gaussian_w2(a: GaussianLaw, b: GaussianLaw) -> float:
    """Wasserstein-2 distance between Gaussians."""
    if a.d != b.d:
        raise ValueError("dimension mismatch")
    dm = a.mean - b.mean
    rb = psd_sqrt(b.cov)
    cross = psd_sqrt(rb @ a.cov @ rb)
    inner = float(dm @ dm) + float(np.trace(a.cov) + np.trace(b.cov) - 2.0 * np.trace(cross))
    return float(np.sqrt(max(inner, 0.0)))


def gaussian_fisher(a: GaussianLaw, b: GaussianLaw) -> float:
    """Relative Fisher information FI(a || b) = E_a ||grad log a - grad log b||^2."""
    if a.d != b.d:
        raise ValueError("dimension mismatch")
    dm = a.mean - b.mean
    # score difference at x: -(Sa^-1 - Sb^-1)(x - ma) - Sb^-1 (ma - mb)
    diff = np.linalg.inv(a.cov) - np.linalg.inv(b.cov)
    shift = np.linalg.solve(b.cov, dm)
    return float(np.trace(diff @ a.cov @ diff)) + float(shift @ shift)


def pinsker_tv_bound(kl: float) -> float:
    """Total-variation upper bound sqrt(kl / 2)."""
    if kl < 0:
        raise ValueError("kl must be >= 0")
    return float(np.sqrt(kl / 2.0))


def talagrand_w2_bound(kl: float, mu: float) -> float:
    """W2 upper bound sqrt(2 kl / mu) under a log-Sobolev constant mu."""
    if kl < 0:
        raise ValueError("kl must be >= 0")
    if mu <= 0:
        raise ValueError("mu must be > 0")
    return float(np.sqrt(2.0 * kl / mu))


def empirical_moments(samples: np.ndarray) -> tuple[GaussianLaw, bool]:
    """Moment-matched Gaussian law of a sample batch (rows = draws).

    Covariance is the unbiased estimator; if it fails a Cholesky test, a
    1e-10 ridge is added and the second return value flags it.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] < 2:
        raise ValueError("need a 2-d sample batch with at least 2 rows")
    n, d = samples.shape
    mean = np.mean(samples, axis=0)
    centered = samples - mean
    cov = np.einsum("ni,nj->ij", centered, centered) / (n - 1)
    cov = 0.5 * (cov + cov.T)
    regularized = False
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        cov = cov + _REG_EPS * np.eye(d)
        regularized = True
    return GaussianLaw(mean=mean, cov=cov), regularized


@dataclass(frozen=True)
class DivergenceReport:
    kl: float
    w2: float
    fisher: float
    tv_bound: float
    w2_bound: float | None


def divergence_report(law: GaussianLaw, target: GaussianLaw,
                      mu: float | None = None) -> DivergenceReport:
    """All closed-form divergences of law against target, plus KL-derived bounds."""
    kl = gaussian_kl(law, target)
    kl_nonneg = max(kl, 0.0)
    return DivergenceReport(
        kl=kl,
        w2=gaussian_w2(law, target),
        fisher=gaussian_fisher(law, target),
        tv_bound=pinsker_tv_bound(kl_nonneg),
        w2_bound=None if mu is None else talagrand_w2_bound(kl_nonneg, mu),
    )


def lmc_gaussian_propagation(target: GaussianLaw, rho0: GaussianLaw,
                             gamma: float, rounds: int) -> list[GaussianLaw]:
    """Exact law of the unadjusted Langevin chain on a Gaussian target.

    With precision A = target.cov^-1 the iteration map is affine Gaussian:
      m_{k+1} = m* + (I - gamma A)(m_k - m*)
      S_{k+1} = (I - gamma A) S_k (I - gamma A)^T + 2 gamma I
    Returns laws at rounds 0..rounds inclusive.
    """
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    if rounds < 0:
        raise ValueError("rounds must be >= 0")
    d = target.d
    a = np.linalg.inv(target.cov)
    contraction = np.eye(d) - gamma * a
    m = rho0.mean.copy()
    s = rho0.cov.copy()
    laws = [GaussianLaw(mean=m.copy(), cov=s.copy())]
    for _ in range(rounds):
        m = target.mean + contraction @ (m - target.mean)
        s = contraction @ s @ contraction.T + 2.0 * gamma * np.eye(d)
        s = 0.5 * (s + s.T)
        laws.append(GaussianLaw(mean=m.copy(), cov=s.copy()))
    return laws


def lmc_gaussian_stationary(target: GaussianLaw, gamma: float) -> GaussianLaw:
    """Fixed point of the affine propagation map (vectorized Lyapunov solve)."""
    d = target.d
    a = np.linalg.inv(target.cov)
    c = np.eye(d) - gamma * a
    # vec(S) = (C kron C) vec(S) + 2 gamma vec(I)
    k = np.kron(c, c)
    s_vec = np.linalg.solve(np.eye(d * d) - k, 2.0 * gamma * np.eye(d).reshape(-1))
    s = s_vec.reshape(d, d)
    return GaussianLaw(mean=target.mean.copy(), cov=0.5 * (s + s.T))


@dataclass(frozen=True)
class GradMomentReport:
    lhs: float
    rhs: float
    fisher: float
    holds: bool


def grad_second_moment_check(samples: np.ndarray, potential) -> GradMomentReport:
    """Check E_nu ||grad F||^2 <= FI(nu || pi) + 2 d L for a Gaussian target.

    nu is the moment-matched Gaussian law of the samples; the left side is
    evaluated in closed form through the target's precision matrix.
    """
    if potential.target_law is None:
        raise ValueError("check requires a potential with a Gaussian target law")
    law, _ = empirical_moments(samples)
    return grad_second_moment_check_law(law, potential)


def grad_second_moment_check_law(law: GaussianLaw, potential) -> GradMomentReport:
    """Same check with an explicit Gaussian law instead of samples."""
    target = potential.target_law
    if target is None:
        raise ValueError("check requires a potential with a Gaussian target law")
    a = np.linalg.inv(target.cov)
    dm = law.mean - target.mean
    # E ||A (x - m*)||^2 for x ~ law
    lhs = float(np.trace(a @ law.cov @ a)) + float((a @ dm) @ (a @ dm))
    fisher = gaussian_fisher(law, target)
    rhs = fisher + 2.0 * law.d * potential.L
    return GradMomentReport(lhs=lhs, rhs=rhs, fisher=fisher, holds=bool(lhs <= rhs * (1 + 1e-12)))
