"""Federated potentials F = (1/n) sum_i F_i.

Each client exposes value/gradient plus a smoothness constant; the federated
wrapper carries the constants the samplers and the theory need (per-client
L_i, global L, mean-square smoothness, strong convexity mu when known).

All reductions over clients or coordinates go through fixed-order loops or
np.einsum so results do not depend on batch size or chain sharding; this is
what makes multi-chain runs bitwise reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def client_average(stack: np.ndarray) -> np.ndarray:
    """Average over the client axis (second to last), fixed left-to-right order.

    Server-side aggregation must use this exact routine everywhere so the
    identity g = (1/n) sum_i g_i holds bitwise across code paths.
    """
    n = stack.shape[-2]
    acc = stack[..., 0, :].copy()
    for i in range(1, n):
        acc += stack[..., i, :]
    acc /= n
    return acc


class QuadraticClient:
    """F_i(x) = 0.5 (x - m)^T A (x - m) with A symmetric positive definite."""

    def __init__(self, precision: np.ndarray, mean: np.ndarray):
        self.A = np.asarray(precision, dtype=float)
        self.m = np.asarray(mean, dtype=float)
        if self.A.ndim != 2 or self.A.shape[0] != self.A.shape[1]:
            raise ValueError("precision must be a square matrix")
        if self.m.shape != (self.A.shape[0],):
            raise ValueError("mean length must match precision dimension")
        if not np.allclose(self.A, self.A.T, atol=1e-12):
            raise ValueError("precision must be symmetric")
        eigs = np.linalg.eigvalsh(self.A)
        if eigs[0] <= 0:
            raise ValueError("precision must be positive definite")
        self.d = self.m.shape[0]
        self.L = float(eigs[-1])
        self.mu = float(eigs[0])

    def value(self, x: np.ndarray) -> np.ndarray:
        xm = np.asarray(x, dtype=float) - self.m
        return 0.5 * np.einsum("...i,ij,...j->...", xm, self.A, xm)

    def grad(self, x: np.ndarray) -> np.ndarray:
        xm = np.asarray(x, dtype=float) - self.m
        return np.einsum("ij,...j->...i", self.A, xm)


class LogisticClient:
    """Ridge-regularized logistic loss over one data shard.

    F_i(x) = (tau/2)||x||^2 + sum_j log(1 + exp(-y_j a_j^T x)),
    labels y in {-1, +1}, rows a_j in the shard's feature matrix.
    """

    def __init__(self, features: np.ndarray, labels: np.ndarray, tau: float):
        self.features = np.asarray(features, dtype=float)
        self.labels = np.asarray(labels, dtype=float)
        if self.features.ndim != 2:
            raise ValueError("features must be 2-d")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels must align with feature rows")
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise ValueError("labels must be in {-1, +1}")
        if tau <= 0:
            raise ValueError("tau must be > 0")
        self.tau = float(tau)
        self.d = self.features.shape[1]
        # Hessian = tau I + A^T D A with D <= 1/4 elementwise
        gram = np.einsum("si,sj->ij", self.features, self.features)
        lam = float(np.linalg.eigvalsh(gram)[-1]) if self.d else 0.0
        self.L = self.tau + 0.25 * lam
        self.mu = self.tau

    def _margins(self, x: np.ndarray) -> np.ndarray:
        z = np.einsum("sj,...j->...s", self.features, np.asarray(x, dtype=float))
        return self.labels * z

    def value(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        t = self._margins(x)
        loss = np.sum(np.logaddexp(0.0, -t), axis=-1)
        return 0.5 * self.tau * np.einsum("...j,...j->...", x, x) + loss

    def grad(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        t = self._margins(x)
        # sigmoid(-t) without overflow in either direction
        s = np.exp(-np.logaddexp(0.0, t))
        coeff = self.labels * s
        pull = np.einsum("sj,...s->...j", self.features, coeff)
        return self.tau * x - pull


class MixtureClient:
    """Potential of an isotropic Gaussian mixture, F = -log sum_c w_c N(mu_c, s2 I).

    Nonconvex in general; smoothness bound L = 1/s2 + D^2/(4 s2^2) with D the
    mean-spread diameter.  No strong convexity constant is reported.
    """

    def __init__(self, means: np.ndarray, weights: np.ndarray, sigma2: float):
        self.means = np.asarray(means, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        if self.means.ndim != 2:
            raise ValueError("means must be 2-d (components x dim)")
        if self.weights.shape != (self.means.shape[0],):
            raise ValueError("weights must align with components")
        if np.any(self.weights <= 0) or not np.isclose(self.weights.sum(), 1.0):
            raise ValueError("weights must be positive and sum to 1")
        if sigma2 <= 0:
            raise ValueError("sigma2 must be > 0")
        self.sigma2 = float(sigma2)
        self.d = self.means.shape[1]
        diffs = self.means[:, None, :] - self.means[None, :, :]
        diam = float(np.sqrt(np.max(np.einsum("abi,abi->ab", diffs, diffs))))
        self.L = 1.0 / self.sigma2 + diam**2 / (4.0 * self.sigma2**2)
        self.mu = None
        self._log_w = np.log(self.weights)

    def _logits(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        diffs = x[..., None, :] - self.means
        sq = np.einsum("...ci,...ci->...c", diffs, diffs)
        return self._log_w - 0.5 * sq / self.sigma2

    def value(self, x: np.ndarray) -> np.ndarray:
        logits = self._logits(x)
        m = np.max(logits, axis=-1, keepdims=True)
        return -(m[..., 0] + np.log(np.sum(np.exp(logits - m), axis=-1)))

    def grad(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        logits = self._logits(x)
        m = np.max(logits, axis=-1, keepdims=True)
        e = np.exp(logits - m)
        r = e / np.sum(e, axis=-1, keepdims=True)
        center = np.einsum("...c,cj->...j", r, self.means)
        return (x - center) / self.sigma2


class FederatedPotential:
    """n-client potential with the constants used by samplers and theory.

    Attributes
    ----------
    clients : per-client component objects (value/grad/L)
    L_i : array of per-client smoothness constants
    L : smoothness of the average F (exact for quadratic targets, else the
        mean of L_i as a documented upper bound)
    l_bar_sq : mean-square smoothness (1/n) sum_i L_i^2
    mu : strong convexity of F, None when unknown
    target_law : the Gaussian law of exp(-F) when F is quadratic, else None
    """

    def __init__(self, clients: list, mu: float | None = None,
                 L: float | None = None, target_law=None, kind: str = "custom"):
        if not clients:
            raise ValueError("need at least one client")
        d = clients[0].d
        if any(c.d != d for c in clients):
            raise ValueError("all clients must share the same dimension")
        self.clients = list(clients)
        self.n = len(clients)
        self.d = d
        self.L_i = np.array([c.L for c in clients], dtype=float)
        self.l_bar_sq = float(np.mean(self.L_i**2))
        self.L = float(L) if L is not None else float(np.mean(self.L_i))
        self.mu = None if mu is None else float(mu)
        self.target_law = target_law
        self.kind = kind

    def grad_component(self, i: int, x: np.ndarray) -> np.ndarray:
        return self.clients[i].grad(x)

    def grad_components(self, x: np.ndarray) -> np.ndarray:
        """Stack of per-client gradients along axis -2, shape (..., n, d)."""
        return np.stack([c.grad(x) for c in self.clients], axis=-2)

    def grad_full(self, x: np.ndarray) -> np.ndarray:
        """Gradient of F as the fixed-order client average of component grads."""
        return client_average(self.grad_components(x))

    def value_full(self, x: np.ndarray) -> np.ndarray:
        vals = np.stack([c.value(x) for c in self.clients], axis=-1)
        return np.mean(vals, axis=-1)


@dataclass
class GaussianTarget:
    """A Gaussian target N(mean, precision^-1) split across n clients.

    The split satisfies (1/n) sum_i A_i = A and (1/n) sum_i A_i m_i = A m,
    so the federated potential built from the per-client quadratics has the
    intended global minimizer and curvature.
    """

    mean: np.ndarray
    precision: np.ndarray
    client_means: np.ndarray
    client_precisions: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.precision = np.asarray(self.precision, dtype=float)
        self.client_means = np.asarray(self.client_means, dtype=float)
        self.client_precisions = np.asarray(self.client_precisions, dtype=float)
        n, d = self.client_means.shape
        if self.client_precisions.shape != (n, d, d):
            raise ValueError("client precisions must have shape (n, d, d)")
        avg_a = np.mean(self.client_precisions, axis=0)
        avg_am = np.mean(
            np.einsum("nij,nj->ni", self.client_precisions, self.client_means), axis=0
        )
        if not np.allclose(avg_a, self.precision, atol=1e-8, rtol=1e-8):
            raise ValueError("client precisions do not average to the global precision")
        if not np.allclose(avg_am, self.precision @ self.mean, atol=1e-8, rtol=1e-8):
            raise ValueError("client means are inconsistent with the global mean")

    @property
    def n(self) -> int:
        return self.client_means.shape[0]

    @property
    def d(self) -> int:
        return self.mean.shape[0]

    @classmethod
    def random(cls, n: int, d: int, rng: np.random.Generator,
               eig_range: tuple[float, float] = (0.5, 2.0),
               mean_scale: float = 1.0, heterogeneity: float = 0.5) -> "GaussianTarget":
        """Draw a random admissible split; the global target is defined from it."""
        lo, hi = eig_range
        if not 0 < lo <= hi:
            raise ValueError("eig_range must satisfy 0 < lo <= hi")
        precs = np.empty((n, d, d))
        for i in range(n):
            q, _ = np.linalg.qr(rng.standard_normal((d, d)))
            eigs = rng.uniform(lo, hi, size=d)
            a = (q * eigs) @ q.T
            precs[i] = 0.5 * (a + a.T)
        center = mean_scale * rng.standard_normal(d)
        means = center + heterogeneity * rng.standard_normal((n, d))
        precision = np.mean(precs, axis=0)
        rhs = np.mean(np.einsum("nij,nj->ni", precs, means), axis=0)
        mean = np.linalg.solve(precision, rhs)
        return cls(mean=mean, precision=precision,
                   client_means=means, client_precisions=precs)

    def potential(self) -> FederatedPotential:
        clients = [QuadraticClient(self.client_precisions[i], self.client_means[i])
                   for i in range(self.n)]
        eigs = np.linalg.eigvalsh(self.precision)
        from .metrics import GaussianLaw  # local import avoids a cycle

        law = GaussianLaw(mean=self.mean, cov=np.linalg.inv(self.precision))
        return FederatedPotential(clients, mu=float(eigs[0]), L=float(eigs[-1]),
                                  target_law=law, kind="gaussian")


def _load_labelled_csv(path: str) -> tuple[np.ndarray, np.ndarray]:
    # first column label in {-1,+1}, remaining columns features; optional header
    with open(path) as fh:
        first = fh.readline()
    skip = 0
    try:
        [float(tok) for tok in first.strip().split(",")]
    except ValueError:
        skip = 1
    data = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    if data.shape[1] < 2:
        raise ValueError("labelled CSV needs a label column plus at least one feature")
    return data[:, 0], data[:, 1:]


def make_builtin(config: dict) -> FederatedPotential:
    """Build a potential from a config mapping.

    Supported kinds:
      gaussian          {"kind", "n", "d", "seed", "eig_range"?, "mean_scale"?,
                         "heterogeneity"?} or explicit arrays {"client_means",
                         "client_precisions"}
      bayesian_logistic {"kind", "csv", "n", "tau"}
      gaussian_mixture  {"kind", "means", "weights", "sigma2", "n"}
    """
    if not isinstance(config, dict) or "kind" not in config:
        raise ValueError("potential config must be a mapping with a 'kind' key")
    kind = config["kind"]
    if kind == "gaussian":
        if "client_precisions" in config:
            target = GaussianTarget(
                mean=np.asarray(config["mean"], dtype=float),
                precision=np.asarray(config["precision"], dtype=float),
                client_means=np.asarray(config["client_means"], dtype=float),
                client_precisions=np.asarray(config["client_precisions"], dtype=float),
            )
        else:
            for key in ("n", "d", "seed"):
                if key not in config:
                    raise ValueError(f"gaussian potential config requires {key!r}")
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(config["seed"]))))
            target = GaussianTarget.random(
                int(config["n"]), int(config["d"]), rng,
                eig_range=tuple(config.get("eig_range", (0.5, 2.0))),
                mean_scale=float(config.get("mean_scale", 1.0)),
                heterogeneity=float(config.get("heterogeneity", 0.5)),
            )
        return target.potential()
    if kind == "bayesian_logistic":
        for key in ("csv", "n", "tau"):
            if key not in config:
                raise ValueError(f"bayesian_logistic potential config requires {key!r}")
        labels, features = _load_labelled_csv(str(config["csv"]))
        n = int(config["n"])
        if not 1 <= n <= labels.shape[0]:
            raise ValueError("client count must be between 1 and the number of rows")
        tau = float(config["tau"])
        # contiguous row blocks, nearly equal sizes, fixed order
        idx_blocks = np.array_split(np.arange(labels.shape[0]), n)
        clients = [LogisticClient(features[b], labels[b], tau) for b in idx_blocks]
        return FederatedPotential(clients, mu=tau, kind="bayesian_logistic")
    if kind == "gaussian_mixture":
        for key in ("means", "weights", "sigma2", "n"):
            if key not in config:
                raise ValueError(f"gaussian_mixture potential config requires {key!r}")
        n = int(config["n"])
        client = MixtureClient(np.asarray(config["means"], dtype=float),
                               np.asarray(config["weights"], dtype=float),
                               float(config["sigma2"]))
        # every client holds the full mixture; heterogeneity-free split
        clients = [MixtureClient(client.means, client.weights, client.sigma2)
                   for _ in range(n)]
        return FederatedPotential(clients, mu=None, L=client.L, kind="gaussian_mixture")
    raise ValueError(f"unknown potential kind: {kind!r}")
