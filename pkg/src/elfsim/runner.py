"""Run configuration and orchestration.

A RunConfig is a plain JSON-able mapping; `run` resolves it into a potential,
compressors, a step size (possibly "auto" from the theory threshold), theory
constants when admissible, drives the ensemble, and writes trace.csv plus
summary.json.  Outputs are byte-stable for a fixed (config, master_seed).
"""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass

import numpy as np

from . import theory
from .compressors import Compressor
from .ensemble import EnsembleResult, init_law, run_ensemble
from .metrics import gaussian_kl
from .potentials import FederatedPotential, make_builtin
from .samplers import ALGORITHMS
from .traceio import (TraceRecord, write_summary_json, write_sweep_csv, write_trace_csv)

_CONFIG_KEYS = {"algorithm", "potential", "K", "chains", "master_seed", "gamma",
                "gamma_safety", "uplink", "downlink", "init", "log_every", "output"}


@dataclass
class RunConfig:
    """One simulation run; field names double as the JSON config keys."""

    algorithm: str
    potential: dict
    K: int
    chains: int = 1
    master_seed: int = 0
    gamma: float | str = "auto"
    gamma_safety: float = 0.9
    uplink: dict | None = None
    downlink: dict | None = None
    init: dict | None = None
    log_every: int | None = None
    output: str | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if not isinstance(self.potential, dict):
            raise ValueError("potential must be a config mapping")
        if self.K < 0:
            raise ValueError("K must be >= 0")
        if self.chains < 1:
            raise ValueError("chains must be >= 1")
        if self.master_seed < 0:
            raise ValueError("master_seed must be >= 0")
        if isinstance(self.gamma, str):
            if self.gamma != "auto":
                raise ValueError("gamma must be a positive number or \"auto\"")
        elif self.gamma <= 0:
            raise ValueError("gamma must be a positive number or \"auto\"")
        if not 0 < self.gamma_safety <= 1:
            raise ValueError("gamma_safety must be in (0, 1]")
        needs = {"lmc": (False, False), "delf": (True, False),
                 "pelf": (False, True), "belf": (True, True)}[self.algorithm]
        if needs[0] != (self.uplink is not None):
            raise ValueError(f"{self.algorithm} {'requires' if needs[0] else 'takes no'} uplink compressor")
        if needs[1] != (self.downlink is not None):
            raise ValueError(f"{self.algorithm} {'requires' if needs[1] else 'takes no'} downlink compressor")

    @classmethod
    def from_dict(cls, cfg: dict) -> "RunConfig":
        if not isinstance(cfg, dict):
            raise ValueError("config must be a mapping")
        unknown = set(cfg) - _CONFIG_KEYS
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for key in ("algorithm", "potential", "K"):
            if key not in cfg:
                raise ValueError(f"config requires {key!r}")
        kwargs = dict(cfg)
        for int_key in ("K", "chains", "master_seed"):
            if int_key in kwargs:
                kwargs[int_key] = int(kwargs[int_key])
        if "log_every" in kwargs and kwargs["log_every"] is not None:
            kwargs["log_every"] = int(kwargs["log_every"])
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def apply_overrides(cfg: dict, overrides: list[str]) -> dict:
    """Apply --set key=value pairs; dotted keys descend into sub-mappings.

    Values are parsed as JSON when possible, else taken as strings.
    """
    import json

    out = json.loads(json.dumps(cfg))  # deep copy
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override must look like key=value, got {item!r}")
        key, _, raw = item.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                node[part] = {}
            node = node[part]
        node[parts[-1]] = value
    return out


def build_compressors(config: RunConfig, d: int) -> tuple[Compressor | None, Compressor | None]:
    up = Compressor.from_config(config.uplink, d) if config.uplink is not None else None
    down = Compressor.from_config(config.downlink, d) if config.downlink is not None else None
    return up, down


def max_stepsize(config: RunConfig, potential: FederatedPotential,
                 up: Compressor | None, down: Compressor | None) -> float:
    """Theory step-size threshold for the configured algorithm."""
    if potential.mu is None:
        raise ValueError("step-size threshold requires a strong convexity constant")
    if config.algorithm == "lmc":
        return theory.one_sided_max_stepsize(1.0, potential.l_bar_sq, potential.L, potential.mu)
    if config.algorithm == "delf":
        return theory.one_sided_max_stepsize(up.alpha, potential.l_bar_sq,
                                             potential.L, potential.mu)
    if config.algorithm == "pelf":
        return theory.one_sided_max_stepsize(down.alpha, potential.l_bar_sq,
                                             potential.L, potential.mu)
    return theory.bidirectional_max_stepsize(up.alpha, down.alpha,
                                             potential.l_bar_sq, potential.mu)


def resolve_gamma(config: RunConfig, potential: FederatedPotential,
                  up: Compressor | None, down: Compressor | None) -> float:
    if config.gamma == "auto":
        return config.gamma_safety * max_stepsize(config, potential, up, down)
    return float(config.gamma)


def theory_constants(config: RunConfig, potential: FederatedPotential,
                     up: Compressor | None, down: Compressor | None, gamma: float):
    """Constants object for the run, or (None, reason) when unavailable."""
    if potential.mu is None:
        return None, "no strong convexity constant for this potential"
    try:
        if config.algorithm == "lmc":
            cst = theory.one_sided_constants(1.0, potential.l_bar_sq, potential.L,
                                             potential.mu, gamma, potential.d)
        elif config.algorithm == "delf":
            cst = theory.one_sided_constants(up.alpha, potential.l_bar_sq, potential.L,
                                             potential.mu, gamma, potential.d)
        elif config.algorithm == "pelf":
            cst = theory.one_sided_constants(down.alpha, potential.l_bar_sq, potential.L,
                                             potential.mu, gamma, potential.d)
        else:
            cst = theory.bidirectional_constants(up.alpha, down.alpha, potential.l_bar_sq,
                                                 potential.L, potential.mu, gamma,
                                                 potential.d)
    except ValueError as err:
        return None, str(err)
    return cst, None


@dataclass
class RunResult:
    config: RunConfig
    gamma: float
    ensemble: EnsembleResult
    records: list[TraceRecord]
    summary: dict
    trace_path: str | None
    summary_path: str | None


def _potential_summary(potential: FederatedPotential) -> dict:
    return {
        "kind": potential.kind,
        "n": potential.n,
        "d": potential.d,
        "mu": potential.mu,
        "L": potential.L,
        "l_bar_sq": potential.l_bar_sq,
    }


def run(config: RunConfig) -> RunResult:
    potential = make_builtin(config.potential)
    up, down = build_compressors(config, potential.d)
    gamma = resolve_gamma(config, potential, up, down)
    cst, reason = theory_constants(config, potential, up, down, gamma)

    kl0 = None
    rho0 = init_law(potential.d, config.init)
    if rho0 is not None and potential.target_law is not None:
        kl0 = gaussian_kl(rho0, potential.target_law)

    bound_fn = None
    if cst is not None and kl0 is not None:
        bound_fn = lambda k: cst.bound(kl0, k)

    ens = run_ensemble(config.algorithm, potential, gamma, config.K, config.chains,
                       config.master_seed, uplink=up, downlink=down, init=config.init,
                       log_every=config.log_every, bound_fn=bound_fn)

    final = ens.records[-1] if ens.records else None
    theory_block: dict | None
    if cst is None:
        theory_block = {"admissible": False, "reason": reason}
    else:
        theory_block = {
            "admissible": True,
            "constants": dataclasses.asdict(cst),
            "tau_convention": theory.TAU_CONVENTION_NOTE,
            "bound_final": cst.bound(kl0, config.K) if kl0 is not None else None,
        }
    summary = {
        "algorithm": config.algorithm,
        "gamma": gamma,
        "rounds": config.K,
        "chains": config.chains,
        "master_seed": config.master_seed,
        "potential": _potential_summary(potential),
        "kl0": kl0,
        "final": None if final is None else {
            "round": final.round,
            "kl_proxy": final.kl_proxy,
            "w2_proxy": final.w2_proxy,
            "fisher_proxy": final.fisher_proxy,
            "lyapunov_dual_mean": final.lyapunov_dual_mean,
            "lyapunov_primal_mean": final.lyapunov_primal_mean,
        },
        "comm": {
            "uplink_floats": ens.ledger.uplink_floats,
            "downlink_floats": ens.ledger.downlink_floats,
            "messages": ens.ledger.messages,
            "rounds_recorded": ens.ledger.last_round,
        },
        "theory": theory_block,
        "diverged": ens.diverged,
        "config": config.to_dict(),
    }

    trace_path = summary_path = None
    if config.output:
        os.makedirs(config.output, exist_ok=True)
        trace_path = os.path.join(config.output, "trace.csv")
        summary_path = os.path.join(config.output, "summary.json")
        write_trace_csv(trace_path, ens.records)
        write_summary_json(summary_path, summary)

    return RunResult(config=config, gamma=gamma, ensemble=ens, records=ens.records,
                     summary=summary, trace_path=trace_path, summary_path=summary_path)


def plateau_kl(records: list[TraceRecord], rounds: int) -> float:
    """Mean KL proxy over logged rounds in the last quarter of the run."""
    tail = [r.kl_proxy for r in records
            if r.round > 0.75 * rounds and r.kl_proxy == r.kl_proxy]
    if not tail:
        return float("nan")
    return float(np.mean(tail))


def sweep(config: RunConfig, gammas: list[float]) -> tuple[list[dict], str | None]:
    """Run the same config at several step sizes; writes sweep.csv when output set."""
    if not gammas:
        raise ValueError("sweep needs at least one gamma")
    rows = []
    for idx, gamma in enumerate(gammas):
        sub = dataclasses.replace(config, gamma=float(gamma), output=None)
        res = run(sub)
        final = res.records[-1] if res.records else None
        rows.append({
            "gamma": float(gamma),
            "plateau_kl": plateau_kl(res.records, config.K),
            "final_kl": float("nan") if final is None else final.kl_proxy,
            "final_w2": float("nan") if final is None else final.w2_proxy,
            "rounds": config.K,
            "uplink_floats_cum": 0 if final is None else final.uplink_floats_cum,
            "downlink_floats_cum": 0 if final is None else final.downlink_floats_cum,
        })
        if config.output:
            os.makedirs(config.output, exist_ok=True)
            write_trace_csv(os.path.join(config.output, f"trace_g{idx}.csv"), res.records)
    sweep_path = None
    if config.output:
        sweep_path = os.path.join(config.output, "sweep.csv")
        write_sweep_csv(sweep_path, rows)
    return rows, sweep_path


def check_theory(config: RunConfig) -> dict:
    """Report step-size thresholds and constants for a config without running it."""
    potential = make_builtin(config.potential)
    up, down = build_compressors(config, potential.d)
    report: dict = {
        "algorithm": config.algorithm,
        "potential": _potential_summary(potential),
        "tau_convention": theory.TAU_CONVENTION_NOTE,
    }
    if potential.mu is None:
        report["gamma_max"] = None
        report["admissible"] = False
        report["reason"] = "no strong convexity constant for this potential"
        return report
    try:
        gamma_max = max_stepsize(config, potential, up, down)
    except ValueError as err:
        report["gamma_max"] = None
        report["admissible"] = False
        report["reason"] = str(err)
        return report
    report["gamma_max"] = gamma_max
    gamma = resolve_gamma(config, potential, up, down)
    report["gamma"] = gamma
    cst, reason = theory_constants(config, potential, up, down, gamma)
    if cst is None:
        report["admissible"] = False
        report["reason"] = reason
    else:
        report["admissible"] = True
        report["constants"] = dataclasses.asdict(cst)
    if config.algorithm == "belf" and up is not None and down is not None:
        q, _, _, w = theory.bidirectional_parameters(up.alpha, down.alpha)
        lower = (up.alpha * down.alpha
                 / (24.0 * (1.0 - down.alpha) * (1.0 - up.alpha)))
        report["slack_product"] = {
            "q": q, "w": w, "q_times_w": q * w,
            "lower_bound": lower, "holds": bool(q * w >= lower),
        }
    return report
