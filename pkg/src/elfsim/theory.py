"""Convergence-rate constants and step-size thresholds.

Implements the certified constants for the compressed Langevin samplers:
the one-sided error-feedback rate (dual uplink or primal downlink, same
constant structure) and the bidirectional rate.  The KL bound at round k is

    KL_k <= exp(-mu gamma k) * Psi + tau / mu,

with Psi and tau as produced here.  Throughout, `l_bar_sq` is the mean-square
client smoothness (1/n) sum_i L_i^2 and `L` the smoothness of the average F.

Note on tau: the one-sided constant uses (16 gamma^2 d + 4 d gamma) while the
bidirectional one uses (16 gamma^2 d L + 4 d gamma); the factor-L discrepancy
between the two published constant sets is deliberate here and surfaced via
TAU_CONVENTION_NOTE rather than silently harmonized.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

TAU_CONVENTION_NOTE = (
    "tau quadratic term: one-sided constants use 16*gamma^2*d, bidirectional "
    "constants use 16*gamma^2*d*L; the factor-L difference between the two "
    "stated constant sets is preserved verbatim, not harmonized."
)


def default_s(alpha: float) -> float:
    """Default slack making (1-alpha)(1+s) = 1 - alpha/2, i.e. p = alpha/2."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must be in (0, 1]")
    if alpha == 1.0:
        # degenerate exact-compression case; any s works and p = 1
        return 1.0
    return 0.5 * alpha / (1.0 - alpha)


@dataclass(frozen=True)
class OneSidedConstants:
    """Rate constants for a single contractive compressor of parameter alpha.

    Covers both the dual (uplink gradient deltas) and primal (downlink iterate
    deltas) variants, which share the constant structure.
    """

    alpha: float
    s: float
    p: float
    beta: float
    gamma: float
    gamma_max: float
    C: float
    tau: float
    psi_g0_weight: float
    mu: float
    L: float
    l_bar_sq: float
    d: int

    def psi(self, kl0: float, g0: float = 0.0) -> float:
        return kl0 + self.psi_g0_weight * g0

    def bound(self, kl0: float, k: int, g0: float = 0.0) -> float:
        """KL bound after k rounds from initial KL and Lyapunov gap."""
        return math.exp(-self.mu * self.gamma * k) * self.psi(kl0, g0) + self.tau / self.mu


def _one_sided_p_beta(alpha: float, l_bar_sq: float, s: float | None) -> tuple[float, float, float]:
    if alpha == 1.0:
        # exact compression: the gap vanishes every round
        return 1.0 if s is None else s, 1.0, 0.0
    s_val = default_s(alpha) if s is None else float(s)
    if s_val <= 0:
        raise ValueError("s must be > 0")
    p = 1.0 - (1.0 - alpha) * (1.0 + s_val)
    if p <= 0:
        raise ValueError(f"slack s={s_val:g} is inadmissible for alpha={alpha:g} (p <= 0)")
    beta = (1.0 + 1.0 / s_val) / (1.0 + s_val) * l_bar_sq
    return s_val, p, beta


def one_sided_max_stepsize(alpha: float, l_bar_sq: float, L: float, mu: float,
                           s: float | None = None) -> float:
    """Largest admissible gamma: min of the three stated conditions."""
    if mu is None or mu <= 0:
        raise ValueError("requires a strong convexity constant mu > 0")
    if L <= 0:
        raise ValueError("L must be > 0")
    _, p, beta = _one_sided_p_beta(alpha, l_bar_sq, s)
    return min(
        (1.0 / 14.0) * math.sqrt(p / (1.0 + beta)),
        p / (6.0 * mu),
        1.0 / (2.0 * math.sqrt(2.0) * L),
    )


def one_sided_constants(alpha: float, l_bar_sq: float, L: float, mu: float,
                        gamma: float, d: int, s: float | None = None) -> OneSidedConstants:
    """Constants for the one-sided rate; raises naming any violated condition."""
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    if d < 1:
        raise ValueError("d must be >= 1")
    s_val, p, beta = _one_sided_p_beta(alpha, l_bar_sq, s)
    gamma_max = one_sided_max_stepsize(alpha, l_bar_sq, L, mu, s)
    if gamma > gamma_max * (1 + 1e-12):
        raise ValueError(f"gamma={gamma:g} exceeds gamma_max={gamma_max:.9g}")
    decay = math.exp(-mu * gamma)
    denom = decay - (1.0 - p) * (4.0 * gamma**2 * beta + 1.0)
    if denom <= 0:
        raise ValueError(
            f"contraction margin exp(-mu gamma) - (1-p)(4 gamma^2 beta + 1) = {denom:g} <= 0"
        )
    c = (8.0 * L**2 * gamma**2 + 2.0) / denom
    tau = (2.0 * L**2 + c * (1.0 - p) * beta) * (16.0 * gamma**2 * d + 4.0 * d * gamma)
    psi_w = (1.0 - decay) / mu * c
    return OneSidedConstants(alpha=alpha, s=s_val, p=p, beta=beta, gamma=gamma,
                             gamma_max=gamma_max, C=c, tau=tau, psi_g0_weight=psi_w,
                             mu=mu, L=L, l_bar_sq=l_bar_sq, d=d)


def bidirectional_parameters(alpha_d: float, alpha_p: float) -> tuple[float, float, float, float]:
    """Default slack parameters (s, q, u, w) for the bidirectional recurrence.

    q = s solves (1-alpha_d)(1+q)^2 = 1 - alpha_d/2, u = 1, and
    w = (alpha_p/2)/(1-alpha_p) so that (1-alpha_p)(1+w) = 1 - alpha_p/2.
    Both alphas must lie in (0, 1); at alpha -> 1 the parameters blow up.
    """
    for name, a in (("alpha_d", alpha_d), ("alpha_p", alpha_p)):
        if not 0 < a < 1:
            raise ValueError(
                f"{name} must be in the open interval (0, 1); at {name}={a:g} the "
                "slack parameters q, w diverge (q -> infinity as alpha -> 1)"
            )
    q = math.sqrt((1.0 - 0.5 * alpha_d) / (1.0 - alpha_d)) - 1.0
    w = 0.5 * alpha_p / (1.0 - alpha_p)
    return q, q, 1.0, w


@dataclass(frozen=True)
class BidirectionalConstants:
    """Rate constants for simultaneous uplink and downlink compression."""

    alpha_d: float
    alpha_p: float
    s: float
    q: float
    u: float
    w: float
    lambda1: float
    lambda2: float
    lambda3: float
    gamma: float
    gamma_max: float
    C: float
    D: float
    tau: float
    mu: float
    L: float
    l_bar_sq: float
    d: int

    def psi(self, kl0: float, g0_dual: float = 0.0, g0_primal: float = 0.0) -> float:
        return kl0 + (self.C * g0_dual + self.D * g0_primal) / self.mu

    def bound(self, kl0: float, k: int, g0_dual: float = 0.0, g0_primal: float = 0.0) -> float:
        return (math.exp(-self.mu * self.gamma * k) * self.psi(kl0, g0_dual, g0_primal)
                + self.tau / self.mu)


def bidirectional_lambdas(alpha_d: float, alpha_p: float, l_bar_sq: float,
                          params: tuple[float, float, float, float] | None = None
                          ) -> tuple[float, float, float]:
    """Coefficients of the coupled dual-gap recurrence."""
    s, q, u, w = bidirectional_parameters(alpha_d, alpha_p) if params is None else params
    ad = (1.0 - alpha_d) * (1.0 + s)
    lam1 = ad * (1.0 + q)
    inner = ad * (1.0 + 1.0 / q)
    lam2 = (inner * (1.0 + u) * l_bar_sq
            + (inner * (1.0 + 1.0 / u) + (1.0 + 1.0 / s))
            * (1.0 - alpha_p) * (1.0 + 1.0 / w) * l_bar_sq)
    lam3 = (inner * (1.0 + 1.0 / u) + (1.0 + 1.0 / s)) * (1.0 - alpha_p) * (1.0 + w)
    return lam1, lam2, lam3


def bidirectional_max_stepsize(alpha_d: float, alpha_p: float, l_bar_sq: float,
                               mu: float) -> float:
    if mu is None or mu <= 0:
        raise ValueError("requires a strong convexity constant mu > 0")
    bidirectional_parameters(alpha_d, alpha_p)  # validates the open-interval domain
    return min(
        alpha_d / (4.0 * mu),
        alpha_p / (4.0 * mu),
        alpha_d * alpha_p
        / (495.0 * math.sqrt((1.0 - 0.5 * alpha_d) * (1.0 - 0.5 * alpha_p) * l_bar_sq)),
    )


def bidirectional_constants(alpha_d: float, alpha_p: float, l_bar_sq: float, L: float,
                            mu: float, gamma: float, d: int) -> BidirectionalConstants:
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    if d < 1:
        raise ValueError("d must be >= 1")
    if L <= 0:
        raise ValueError("L must be > 0")
    s, q, u, w = bidirectional_parameters(alpha_d, alpha_p)
    gamma_max = bidirectional_max_stepsize(alpha_d, alpha_p, l_bar_sq, mu)
    if gamma > gamma_max * (1 + 1e-12):
        raise ValueError(f"gamma={gamma:g} exceeds gamma_max={gamma_max:.9g}")
    lam1, lam2, lam3 = bidirectional_lambdas(alpha_d, alpha_p, l_bar_sq, (s, q, u, w))
    decay = math.exp(-mu * gamma)
    denom_c = decay - lam1
    if denom_c <= 0:
        raise ValueError(f"contraction margin exp(-mu gamma) - lambda1 = {denom_c:g} <= 0")
    c = 2.125 / denom_c
    primal_factor = (1.0 - alpha_p) * (1.0 + w)  # = 1 - alpha_p/2 at the default w
    denom_d = decay - primal_factor
    if denom_d <= 0:
        raise ValueError(
            f"contraction margin exp(-mu gamma) - (1-alpha_p)(1+w) = {denom_d:g} <= 0"
        )
    dconst = c * lam3 / denom_d
    tau = (2.0 * L**2 + 5.0 * c * lam2 / alpha_p) * (16.0 * gamma**2 * d * L + 4.0 * d * gamma)
    return BidirectionalConstants(alpha_d=alpha_d, alpha_p=alpha_p, s=s, q=q, u=u, w=w,
                                  lambda1=lam1, lambda2=lam2, lambda3=lam3, gamma=gamma,
                                  gamma_max=gamma_max, C=c, D=dconst, tau=tau, mu=mu,
                                  L=L, l_bar_sq=l_bar_sq, d=d)


@dataclass(frozen=True)
class IterationBudget:
    gamma: float
    rounds: int
    tau_over_mu: float
    psi: float
    certified_bound: float


def _bisect_largest(pred, lo: float, hi: float, iters: int = 200) -> float:
    """Largest x in (lo, hi] with pred(x), assuming pred monotone decreasing."""
    if pred(hi):
        return hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return lo


def iteration_budget_one_sided(epsilon: float, alpha: float, l_bar_sq: float, L: float,
                               mu: float, d: int, kl0: float,
                               s: float | None = None) -> IterationBudget:
    """Certified (gamma, K) achieving KL_K <= epsilon under the one-sided rate.

    gamma is the largest admissible step with tau/mu <= epsilon/2 (found by
    bisection; tau is increasing in gamma), and K the smallest round count
    with exp(-mu gamma K) Psi <= epsilon/2.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    if kl0 < 0:
        raise ValueError("kl0 must be >= 0")
    gamma_max = one_sided_max_stepsize(alpha, l_bar_sq, L, mu, s)

    def ok(g: float) -> bool:
        try:
            cst = one_sided_constants(alpha, l_bar_sq, L, mu, g, d, s)
        except ValueError:
            return False
        return cst.tau / mu <= 0.5 * epsilon

    tiny = gamma_max * 1e-12
    if not ok(tiny):
        raise ValueError("epsilon is unreachable: tau/mu > epsilon/2 even as gamma -> 0")
    gamma = _bisect_largest(ok, tiny, gamma_max)
    cst = one_sided_constants(alpha, l_bar_sq, L, mu, gamma, d, s)
    psi = cst.psi(kl0)
    if psi <= 0.5 * epsilon:
        rounds = 0
    else:
        rounds = math.ceil(math.log(psi / (0.5 * epsilon)) / (mu * gamma))
    bound = cst.bound(kl0, rounds)
    return IterationBudget(gamma=gamma, rounds=rounds, tau_over_mu=cst.tau / mu,
                           psi=psi, certified_bound=bound)


def iteration_budget_bidirectional(epsilon: float, alpha_d: float, alpha_p: float,
                                   l_bar_sq: float, L: float, mu: float, d: int,
                                   kl0: float) -> IterationBudget:
    """Certified (gamma, K) under the bidirectional rate; same scheme."""
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    if kl0 < 0:
        raise ValueError("kl0 must be >= 0")
    gamma_max = bidirectional_max_stepsize(alpha_d, alpha_p, l_bar_sq, mu)

    def ok(g: float) -> bool:
        try:
            cst = bidirectional_constants(alpha_d, alpha_p, l_bar_sq, L, mu, g, d)
        except ValueError:
            return False
        return cst.tau / mu <= 0.5 * epsilon

    tiny = gamma_max * 1e-12
    if not ok(tiny):
        raise ValueError("epsilon is unreachable: tau/mu > epsilon/2 even as gamma -> 0")
    gamma = _bisect_largest(ok, tiny, gamma_max)
    cst = bidirectional_constants(alpha_d, alpha_p, l_bar_sq, L, mu, gamma, d)
    psi = cst.psi(kl0)
    if psi <= 0.5 * epsilon:
        rounds = 0
    else:
        rounds = math.ceil(math.log(psi / (0.5 * epsilon)) / (mu * gamma))
    bound = cst.bound(kl0, rounds)
    return IterationBudget(gamma=gamma, rounds=rounds, tau_over_mu=cst.tau / mu,
                           psi=psi, certified_bound=bound)
