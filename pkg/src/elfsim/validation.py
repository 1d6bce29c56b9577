"""Built-in self-check suites behind `elfsim validate`.

Each suite returns quickly and deterministically; the statistical ones use
fixed seeds and conservative margins.  The heavyweight acceptance checks live
in the test suite; these are the desk-check versions.
"""
from __future__ import annotations

import math
import os
import tempfile

import numpy as np

from . import federation, metrics, samplers, streams, theory
from .compressors import KINDS, Compressor
from .ensemble import run_ensemble
from .potentials import FederatedPotential, GaussianTarget, QuadraticClient, client_average, make_builtin
from .runner import RunConfig, run
from .traceio import TraceRecord


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def _unit_quadratic(d: int) -> FederatedPotential:
    pot = FederatedPotential([QuadraticClient(np.eye(d), np.zeros(d))],
                             mu=1.0, L=1.0, kind="gaussian")
    pot.target_law = metrics.GaussianLaw(mean=np.zeros(d), cov=np.eye(d))
    return pot


def check_compressor_examples() -> str | None:
    c = Compressor("top_k", d=3, k=1)
    out = c.compress(np.array([3.0, 1.0, -2.0]))
    if not np.array_equal(out, [3.0, 0.0, 0.0]):
        return f"top_k example gave {out}"
    tie = c.compress(np.array([2.0, -2.0, 1.0]))
    if not np.array_equal(tie, [2.0, 0.0, 0.0]):
        return f"top_k tie-break gave {tie}"
    if c.payload_floats(out) != 2:
        return "top_k payload should be 2k"
    ident = Compressor("identity", d=4)
    v = np.array([1.0, -2.0, 0.5, 0.0])
    if not np.array_equal(ident.compress(v), v) or ident.payload_floats(v) != 4:
        return "identity must return its input and cost d floats"
    wrap0 = Compressor("scaled_unbiased_wrapper", d=4, omega=0.0)
    if not np.array_equal(wrap0.compress(v), v):
        return "wrapper with omega=0 must degenerate to identity"
    if abs(wrap0.alpha - 1.0) > 0:
        return "wrapper alpha at omega=0 must be 1"
    nat = Compressor("scaled_natural", d=4)
    if abs(nat.alpha - 8.0 / 9.0) > 1e-15:
        return "scaled_natural alpha must be 8/9"
    pow2 = nat.compress(np.array([1.0, -2.0, 0.5, 4.0]), _rng(0))
    expect = (8.0 / 9.0) * np.array([1.0, -2.0, 0.5, 4.0])
    if not np.allclose(pow2, expect, rtol=0, atol=0):
        return f"scaled_natural must be deterministic on powers of two, got {pow2}"
    return None


def check_compressor_contractivity(inputs: int = 200, resamples: int = 64) -> str | None:
    rng = _rng(7)
    for d in (1, 5):
        vs = rng.standard_normal((inputs, d)) * np.exp(rng.uniform(-2, 2, (inputs, 1)))
        for kind in KINDS:
            k = max(1, d // 2)
            comp = {"top_k": Compressor("top_k", d=d, k=k),
                    "rand_k": Compressor("rand_k", d=d, k=k),
                    "identity": Compressor("identity", d=d),
                    "scaled_natural": Compressor("scaled_natural", d=d),
                    "scaled_unbiased_wrapper": Compressor("scaled_unbiased_wrapper", d=d, omega=2.0),
                    }[kind]
            allowed = 1.0 - comp.alpha
            norms = np.einsum("ij,ij->i", vs, vs)
            if not comp.requires_rng:
                out = comp.compress(vs)
                errs = np.einsum("ij,ij->i", out - vs, out - vs)
                bad = errs > allowed * norms * (1 + 1e-12) + 1e-300
                if np.any(bad):
                    return f"{kind} d={d}: pointwise contraction violated"
            else:
                # pooled over inputs and resamples, 3 SE margin
                ratios = np.empty((inputs, resamples))
                for r in range(resamples):
                    for i in range(inputs):
                        out = comp.compress(vs[i], rng)
                        diff = out - vs[i]
                        ratios[i, r] = (diff @ diff) / norms[i]
                per_input = ratios.mean(axis=1)
                pooled = per_input.mean()
                se = per_input.std(ddof=1) / math.sqrt(inputs) if inputs > 1 else 0.0
                if pooled > allowed + 3 * se + 1e-12:
                    return (f"{kind} d={d}: pooled ratio {pooled:.4f} > "
                            f"{allowed:.4f} + 3 SE ({se:.2g})")
    return None


def check_gradient_oracle(points: int = 20, h: float = 1e-6) -> str | None:
    rng = _rng(11)
    quad = GaussianTarget.random(3, 4, rng).potential()
    feats = rng.standard_normal((30, 3))
    labels = np.where(rng.random(30) < 0.5, -1.0, 1.0)
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "shards.csv")
        np.savetxt(path, np.column_stack([labels, feats]), delimiter=",")
        logi = make_builtin({"kind": "bayesian_logistic", "csv": path, "n": 2, "tau": 0.3})
    mix = make_builtin({"kind": "gaussian_mixture", "n": 2, "sigma2": 0.8,
                        "weights": [0.4, 0.6], "means": [[1.0, 0.0], [-1.0, 0.5]]})
    for pot in (quad, logi, mix):
        for _ in range(points):
            x = rng.standard_normal(pot.d)
            for i in range(pot.n):
                g = pot.grad_component(i, x)
                fd = np.empty_like(g)
                for j in range(pot.d):
                    e = np.zeros(pot.d)
                    e[j] = h
                    fd[j] = (pot.clients[i].value(x + e) - pot.clients[i].value(x - e)) / (2 * h)
                scale = max(1.0, float(np.linalg.norm(g)))
                if np.linalg.norm(fd - g) / scale > 1e-5:
                    return f"{pot.kind}: finite-difference mismatch {np.linalg.norm(fd - g):g}"
    return None


def check_smoothness_certificate(pairs: int = 50) -> str | None:
    rng = _rng(13)
    quad = GaussianTarget.random(2, 3, rng).potential()
    mix = make_builtin({"kind": "gaussian_mixture", "n": 1, "sigma2": 0.5,
                        "weights": [0.5, 0.5], "means": [[2.0, 0.0], [-2.0, 0.0]]})
    for pot in (quad, mix):
        for _ in range(pairs):
            x = 3.0 * rng.standard_normal(pot.d)
            y = 3.0 * rng.standard_normal(pot.d)
            for i in range(pot.n):
                lhs = np.linalg.norm(pot.grad_component(i, x) - pot.grad_component(i, y))
                rhs = pot.L_i[i] * np.linalg.norm(x - y)
                if lhs > rhs * (1 + 1e-9):
                    return f"{pot.kind} client {i}: gradient growth {lhs:g} > L_i ||x-y|| = {rhs:g}"
    return None


def check_hand_traces() -> str | None:
    d = 2
    pot = _unit_quadratic(d)
    x0 = np.array([1.0, 2.0])
    top1 = Compressor("top_k", d=d, k=1)
    zero = streams.ConstantNoise([np.zeros(d)])
    rs = samplers.RoundStreams(0, [0], 1)

    st = samplers.init_state(pot, 0.1, x0, zero)
    st1, _ = samplers.delf_round(st, pot, top1, rs)
    if not (np.allclose(st1.x, [0.9, 1.8], atol=1e-15)
            and np.allclose(st1.g, [1.0, 1.8], atol=1e-15)):
        return f"delf trace: x={st1.x}, g={st1.g}"

    st = samplers.init_state(pot, 0.1, x0, streams.ConstantNoise([np.zeros(d)]))
    st1, _ = samplers.pelf_round(st, pot, top1, rs)
    if not (np.allclose(st1.x, [0.9, 1.8], atol=1e-15)
            and np.allclose(st1.w, [1.0, 1.8], atol=1e-15)):
        return f"pelf trace: x={st1.x}, w={st1.w}"

    st = samplers.init_state(pot, 0.1, x0, streams.ConstantNoise([np.zeros(d)]))
    st1, _ = samplers.belf_round(st, pot, top1, top1, rs)
    if not (np.allclose(st1.w, [1.0, 1.8], atol=1e-15)
            and np.allclose(st1.g, [1.0, 1.8], atol=1e-15)):
        return f"belf trace: w={st1.w}, g={st1.g}"

    pot1 = _unit_quadratic(1)
    st = samplers.init_state(pot1, 0.1, np.array([1.0]),
                             streams.ConstantNoise([np.array([0.5])]))
    st1, _ = samplers.lmc_round(st, pot1)
    expect = 0.9 + math.sqrt(0.2) * 0.5
    if abs(st1.x[0] - expect) > 1e-15:
        return f"lmc trace: x={st1.x[0]!r} expected {expect!r}"
    return None


def check_identity_reduction() -> str | None:
    rng = _rng(17)
    target = GaussianTarget.random(3, 4, rng)
    pot = target.potential()
    ident = Compressor("identity", d=pot.d)
    base = run_ensemble("lmc", pot, 0.05, 6, 4, master_seed=123)
    for algorithm, up, down in (("delf", ident, None), ("pelf", None, ident),
                                ("belf", ident, ident)):
        other = run_ensemble(algorithm, pot, 0.05, 6, 4, master_seed=123,
                             uplink=up, downlink=down)
        if not np.array_equal(base.x_logged, other.x_logged):
            return f"{algorithm} with identity compressors deviates from lmc"
    return None


def check_aggregation_identity() -> str | None:
    rng = _rng(19)
    pot = GaussianTarget.random(4, 5, rng).potential()
    top2 = Compressor("top_k", d=pot.d, k=2)
    noise = streams.ChainNoise(7, 0, pot.d)
    state = samplers.init_state(pot, 0.05, rng.standard_normal(pot.d), noise)
    for k in range(1, 6):
        rs = samplers.RoundStreams(7, [0], k)
        prev_g = state.g.copy()
        prev_gi = state.g_i.copy()
        state, _ = samplers.delf_round(state, pot, top2, rs)
        if not np.array_equal(state.g, client_average(state.g_i)):
            return "aggregate g is not the exact client average"
        increments = state.g_i - prev_gi
        if not np.allclose(state.g - prev_g, client_average(increments),
                           rtol=1e-12, atol=1e-12):
            return "aggregate increment deviates from averaged updates beyond 1e-12"
    return None


def check_ledger() -> str | None:
    rng = _rng(23)
    for algorithm in samplers.ALGORITHMS:
        n, d, rounds = 3, 6, 4
        pot = GaussianTarget.random(n, d, rng).potential()
        up = Compressor("top_k", d=d, k=2) if algorithm in ("delf", "belf") else None
        down = Compressor("rand_k", d=d, k=3) if algorithm in ("pelf", "belf") else None
        ens = run_ensemble(algorithm, pot, 0.01, rounds, 2, master_seed=1,
                           uplink=up, downlink=down)
        expect_up, expect_down = federation.closed_form_totals(
            algorithm, n, d, rounds,
            uplink_payload=None if up is None else up.payload_floats(np.zeros(d)),
            downlink_payload=None if down is None else down.payload_floats(np.zeros(d)),
        )
        if (ens.ledger.uplink_floats, ens.ledger.downlink_floats) != (expect_up, expect_down):
            return (f"{algorithm}: ledger ({ens.ledger.uplink_floats}, "
                    f"{ens.ledger.downlink_floats}) != closed form "
                    f"({expect_up}, {expect_down})")
    return None


def check_metrics_oracles() -> str | None:
    one = metrics.GaussianLaw(mean=[0.0], cov=[[1.0]])
    two = metrics.GaussianLaw(mean=[0.0], cov=[[2.0]])
    kl = metrics.gaussian_kl(one, two)
    expect = 0.5 * (0.5 - 1.0 + math.log(2.0))
    if abs(kl - expect) > 1e-12:
        return f"KL oracle {kl!r} != {expect!r}"
    shifted = metrics.GaussianLaw(mean=[1.0], cov=[[4.0]])
    w2 = metrics.gaussian_w2(one, shifted)
    if abs(w2 - math.sqrt(1.0 + 1.0)) > 1e-12:
        return f"W2 oracle {w2!r}"
    fi = metrics.gaussian_fisher(two, one)
    if abs(fi - 0.5) > 1e-12:
        return f"Fisher oracle {fi!r}"
    if abs(metrics.pinsker_tv_bound(0.08) - math.sqrt(0.04)) > 1e-15:
        return "Pinsker bound wrong"
    if abs(metrics.talagrand_w2_bound(0.08, 2.0) - math.sqrt(0.08)) > 1e-15:
        return "Talagrand bound wrong"

    target = metrics.GaussianLaw(mean=[0.0], cov=[[1.0]])
    rho0 = metrics.GaussianLaw(mean=[0.0], cov=[[1.0]])
    laws = metrics.lmc_gaussian_propagation(target, rho0, 0.1, 600)
    stat = metrics.lmc_gaussian_stationary(target, 0.1)
    if abs(stat.cov[0, 0] - 1.0 / 0.95) > 1e-14:
        return f"stationary variance {stat.cov[0, 0]!r} != 1/0.95"
    if abs(laws[-1].cov[0, 0] - stat.cov[0, 0]) > 1e-12:
        return "propagation does not reach the stationary fixed point"
    kl_stat = metrics.gaussian_kl(stat, target)
    expect_stat = 0.5 * (1.0 / 0.95 - 1.0 - math.log(1.0 / 0.95))
    if abs(kl_stat - expect_stat) > 1e-14:
        return "stationary KL mismatch"
    return None


def check_grad_moment_inequality(trials: int = 200) -> str | None:
    rng = _rng(29)
    d = 3
    cov = np.diag(np.linspace(1.0, 2.0, d))
    pot = FederatedPotential([QuadraticClient(np.linalg.inv(cov), np.zeros(d))],
                             mu=0.5, L=1.0, kind="gaussian")
    pot.target_law = metrics.GaussianLaw(mean=np.zeros(d), cov=cov)
    for _ in range(trials):
        q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        eigs = rng.uniform(0.2, 3.0, d)
        law = metrics.GaussianLaw(mean=rng.standard_normal(d), cov=(q * eigs) @ q.T)
        report = metrics.grad_second_moment_check_law(law, pot)
        if not report.holds:
            return f"inequality violated: lhs={report.lhs:g} rhs={report.rhs:g}"
    return None


def check_theory_regression() -> str | None:
    g1 = theory.one_sided_max_stepsize(0.5, 1.0, 1.0, 1.0)
    if abs(g1 - 0.020619652471058062) > 1e-9:
        return f"one-sided gamma_max {g1!r}"
    g2 = theory.bidirectional_max_stepsize(0.5, 0.5, 1.0, 1.0)
    if abs(g2 - 6.734006734006734e-4) > 1e-9:
        return f"bidirectional gamma_max {g2!r}"
    rng = _rng(31)
    for _ in range(100):
        ad, ap = rng.uniform(0.01, 0.99, 2)
        q, _, _, w = theory.bidirectional_parameters(ad, ap)
        lower = ad * ap / (24.0 * (1.0 - ap) * (1.0 - ad))
        if q * w < lower:
            return f"slack product q*w={q * w:g} < {lower:g} at alphas ({ad:g}, {ap:g})"
    return None


def check_output_determinism() -> str | None:
    cfg = {
        "algorithm": "belf",
        "potential": {"kind": "gaussian", "n": 2, "d": 3, "seed": 5},
        "uplink": {"kind": "rand_k", "k": 1},
        "downlink": {"kind": "top_k", "k": 2},
        "gamma": 0.001,
        "K": 8,
        "chains": 6,
        "master_seed": 99,
    }
    blobs = []
    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, "out")
        for threads in ("1", "3"):
            os.environ["ELF_THREADS"] = threads
            try:
                run(RunConfig.from_dict({**cfg, "output": out}))
            finally:
                os.environ.pop("ELF_THREADS", None)
            with open(os.path.join(out, "trace.csv"), "rb") as fh:
                trace = fh.read()
            with open(os.path.join(out, "summary.json"), "rb") as fh:
                blob = fh.read()
            blobs.append((trace, blob))
    if blobs[0][0] != blobs[1][0]:
        return "trace.csv differs across thread counts"
    if blobs[0][1] != blobs[1][1]:
        return "summary.json differs across thread counts"
    return None


def check_cost_to_reach() -> str | None:
    recs = [TraceRecord(k, kl, float("nan"), float("nan"), 0.0, 0.0, 0.0,
                        10 * k, 4 * k, float("nan"))
            for k, kl in ((1, float("nan")), (2, 0.5), (3, 0.2), (4, 0.05))]
    hit = federation.cost_to_reach(recs, 0.2)
    if hit != (3, 30, 12):
        return f"cost_to_reach gave {hit}"
    if federation.cost_to_reach(recs, 0.01) is not None:
        return "unreachable threshold must give None"
    return None


SUITES = [
    ("compressor_examples", check_compressor_examples, True),
    ("compressor_contractivity", check_compressor_contractivity, False),
    ("gradient_oracle", check_gradient_oracle, True),
    ("smoothness_certificate", check_smoothness_certificate, True),
    ("hand_traces", check_hand_traces, True),
    ("identity_reduction", check_identity_reduction, True),
    ("aggregation_identity", check_aggregation_identity, True),
    ("ledger_closed_form", check_ledger, True),
    ("metrics_oracles", check_metrics_oracles, True),
    ("grad_moment_inequality", check_grad_moment_inequality, True),
    ("theory_regression", check_theory_regression, True),
    ("output_determinism", check_output_determinism, True),
    ("cost_to_reach", check_cost_to_reach, True),
]


def run_suites(fast: bool = False) -> list[tuple[str, bool, str]]:
    results = []
    for name, fn, in_fast in SUITES:
        if fast and not in_fast:
            continue
        try:
            detail = fn()
        except Exception as err:  # a crash is a failure, not an abort
            detail = f"{type(err).__name__}: {err}"
        results.append((name, detail is None, detail or ""))
    return results
