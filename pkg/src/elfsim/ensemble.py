"""Multi-chain ensemble driver.

Runs many independent chains of one algorithm, pools cross-chain moments at
logged rounds into trace records, and accounts communication.  Chains are
sharded across worker threads (capped by the ELF_THREADS environment
variable); because every chain draws from its own streams and all reductions
are batch-shape independent, results are bitwise identical for any thread
count.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import streams
from .compressors import Compressor
from .federation import CommLedger
from .metrics import GaussianLaw, empirical_moments, gaussian_fisher, gaussian_kl, gaussian_w2
from .potentials import FederatedPotential
from .samplers import DivergenceError, RoundStreams, init_state, make_round_fn
from .traceio import TraceRecord


def thread_count(chains: int, threads: int | None = None) -> int:
    """Effective worker count: explicit arg, else ELF_THREADS, else 1."""
    if threads is None:
        env = os.environ.get("ELF_THREADS", "").strip()
        threads = int(env) if env else 1
    if threads < 1:
        raise ValueError("thread count must be >= 1")
    return max(1, min(threads, chains))


def logged_rounds(rounds: int, log_every: int | None = None) -> np.ndarray:
    """Logged round indices: 0, every stride-th round, and the final round.

    Default stride is 1 up to 1000 rounds, then ceil(rounds / 1000).
    """
    if rounds < 0:
        raise ValueError("rounds must be >= 0")
    if log_every is None:
        stride = 1 if rounds <= 1000 else -(-rounds // 1000)
    else:
        stride = int(log_every)
        if stride < 1:
            raise ValueError("log_every must be >= 1")
    ks = set(range(0, rounds + 1, stride))
    ks.add(0)
    ks.add(rounds)
    return np.array(sorted(ks), dtype=int)


def init_law(d: int, init: dict | None) -> GaussianLaw | None:
    """The initial law rho_0 when it is Gaussian, else None.

    init specs: None or {"kind": "gaussian", "mean"?: vec|scalar, "cov"?: matrix
    or scalar multiple of I} (default standard normal), or
    {"kind": "point", "x": vec}.
    """
    if init is None:
        init = {"kind": "gaussian"}
    kind = init.get("kind")
    if kind == "gaussian":
        mean = np.asarray(init.get("mean", np.zeros(d)), dtype=float)
        if mean.ndim == 0:
            mean = np.full(d, float(mean))
        cov = np.asarray(init.get("cov", 1.0), dtype=float)
        if cov.ndim == 0:
            cov = float(cov) * np.eye(d)
        if mean.shape != (d,) or cov.shape != (d, d):
            raise ValueError("init mean/cov dimensions do not match the potential")
        return GaussianLaw(mean=mean, cov=cov)
    if kind == "point":
        x = np.asarray(init["x"], dtype=float)
        if x.shape != (d,):
            raise ValueError("init point dimension does not match the potential")
        return None
    raise ValueError(f"unknown init kind: {kind!r}")


def initial_points(master_seed: int, chain_ids, potential: FederatedPotential,
                   init: dict | None) -> tuple[np.ndarray, GaussianLaw | None]:
    """Per-chain x0 draws plus the initial law when it is Gaussian."""
    d = potential.d
    law = init_law(d, init)
    if law is not None:
        chol = np.linalg.cholesky(law.cov)
        draws = np.stack([
            law.mean + np.einsum("ij,j->i", chol,
                                 streams.init_rng(master_seed, c).standard_normal(d))
            for c in chain_ids
        ])
        return draws, law
    x = np.asarray(init["x"], dtype=float)
    return np.tile(x, (len(chain_ids), 1)), None


@dataclass
class EnsembleResult:
    """Pooled ensemble output; per-chain arrays align with `logged`."""

    algorithm: str
    gamma: float
    rounds: int
    chains: int
    logged: np.ndarray          # (L,) round indices, starting at 0
    records: list[TraceRecord]  # logged rounds >= 1, in order
    dual: np.ndarray            # (C, L) Lyapunov dual realizations
    primal: np.ndarray          # (C, L)
    step_sq: np.ndarray         # (C, L); round-0 slot is NaN
    x_logged: np.ndarray        # (C, L, d) iterates at logged rounds
    x_final: np.ndarray         # (C, d)
    ledger: CommLedger
    rho0: GaussianLaw | None
    kl0: float | None
    diverged: int | None


def _shard_worker(algorithm, potential, gamma, rounds, master_seed, chain_ids,
                  uplink, downlink, init, logged):
    round_fn = make_round_fn(algorithm, uplink, downlink)
    d = potential.d
    x0, _ = initial_points(master_seed, chain_ids, potential, init)
    noise = streams.NoiseBlock(master_seed, chain_ids, d,
                               block=min(256, max(1, rounds)))
    state = init_state(potential, gamma, x0, noise)
    c = len(chain_ids)
    el = len(logged)
    dual = np.full((c, el), np.nan)
    primal = np.full((c, el), np.nan)
    step = np.full((c, el), np.nan)
    xs = np.full((c, el, d), np.nan)
    log_pos = {int(k): j for j, k in enumerate(logged)}
    if 0 in log_pos:
        # both gaps vanish at round 0 by the init convention
        dual[:, 0] = 0.0
        primal[:, 0] = 0.0 if algorithm in ("pelf", "belf") else np.nan
        xs[:, 0, :] = state.x
    messages = []  # per round list; identical across shards, shard 0's is used
    diverged = None
    for k in range(1, rounds + 1):
        rs = RoundStreams(master_seed, chain_ids, k)
        try:
            state, diag = round_fn(state, potential, rs)
        except DivergenceError as err:
            diverged = err.round_index
            break
        messages.append(diag.messages)
        j = log_pos.get(k)
        if j is not None:
            dual[:, j] = diag.lyapunov_dual
            primal[:, j] = diag.lyapunov_primal
            step[:, j] = diag.step_sq
            xs[:, j, :] = state.x
    return {
        "dual": dual, "primal": primal, "step": step, "xs": xs,
        "x_final": state.x, "messages": messages, "diverged": diverged,
    }


def run_ensemble(algorithm: str, potential: FederatedPotential, gamma: float,
                 rounds: int, chains: int, master_seed: int,
                 uplink: Compressor | None = None, downlink: Compressor | None = None,
                 init: dict | None = None, log_every: int | None = None,
                 threads: int | None = None, bound_fn=None) -> EnsembleResult:
    """Run `chains` independent chains and pool logged-round statistics.

    bound_fn, when given, maps a round index to the theory KL bound written
    into the trace; otherwise the column is NaN.
    """
    if chains < 1:
        raise ValueError("chains must be >= 1")
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    logged = logged_rounds(rounds, log_every)
    nthreads = thread_count(chains, threads)
    shards = [ids for ids in np.array_split(np.arange(chains), nthreads) if len(ids)]

    args = [(algorithm, potential, gamma, rounds, master_seed, list(ids),
             uplink, downlink, init, logged) for ids in shards]
    if len(shards) == 1:
        outs = [_shard_worker(*args[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(shards)) as pool:
            outs = list(pool.map(lambda a: _shard_worker(*a), args))

    diverged_rounds = [o["diverged"] for o in outs if o["diverged"] is not None]
    diverged = min(diverged_rounds) if diverged_rounds else None
    if diverged is not None:
        logged = logged[logged < diverged]

    el = len(logged)
    dual = np.concatenate([o["dual"][:, :el] for o in outs], axis=0)
    primal = np.concatenate([o["primal"][:, :el] for o in outs], axis=0)
    step = np.concatenate([o["step"][:, :el] for o in outs], axis=0)
    xs = np.concatenate([o["xs"][:, :el] for o in outs], axis=0)
    x_final = np.concatenate([o["x_final"] for o in outs], axis=0)

    # initial law / KL(rho0 || pi), when both laws are Gaussian
    _, rho0 = initial_points(master_seed, [0], potential, init)
    kl0 = None
    if rho0 is not None and potential.target_law is not None:
        kl0 = gaussian_kl(rho0, potential.target_law)

    ledger = CommLedger()
    completed = rounds if diverged is None else diverged - 1
    for round_msgs in outs[0]["messages"][:completed]:
        for msg in round_msgs:
            ledger.record(msg)

    # cumulative float counts per round, from the actually emitted messages
    cum_up = [0]
    cum_down = [0]
    for round_msgs in outs[0]["messages"][:completed]:
        cum_up.append(cum_up[-1] + sum(m.payload_floats for m in round_msgs
                                       if m.direction == "uplink"))
        cum_down.append(cum_down[-1] + sum(m.payload_floats for m in round_msgs
                                           if m.direction == "downlink"))

    target = potential.target_law
    records: list[TraceRecord] = []
    for j, k in enumerate(logged):
        if k == 0:
            continue
        kl = w2 = fi = float("nan")
        if target is not None and chains >= potential.d + 2:
            law, _ = empirical_moments(xs[:, j, :])
            try:
                kl = gaussian_kl(law, target)
                w2 = gaussian_w2(law, target)
                fi = gaussian_fisher(law, target)
            except (np.linalg.LinAlgError, ValueError):
                kl = w2 = fi = float("nan")
        bound = float("nan")
        if bound_fn is not None:
            bound = float(bound_fn(int(k)))
        records.append(TraceRecord(
            round=int(k),
            kl_proxy=float(kl),
            w2_proxy=float(w2),
            fisher_proxy=float(fi),
            lyapunov_dual_mean=float(np.mean(dual[:, j])),
            lyapunov_primal_mean=float(np.mean(primal[:, j])),
            step_sq_mean=float(np.mean(step[:, j])),
            uplink_floats_cum=int(cum_up[int(k)]),
            downlink_floats_cum=int(cum_down[int(k)]),
            theory_bound=bound,
        ))

    return EnsembleResult(
        algorithm=algorithm, gamma=float(gamma), rounds=rounds, chains=chains,
        logged=logged, records=records, dual=dual, primal=primal, step_sq=step,
        x_logged=xs, x_final=x_final, ledger=ledger, rho0=rho0, kl0=kl0,
        diverged=diverged,
    )
