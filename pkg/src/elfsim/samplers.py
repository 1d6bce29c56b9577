"""Langevin sampling rounds with error-feedback compression.

Four round kernels share one state layout and one update discipline:

  lmc   uncompressed: dense broadcast of the iterate, dense gradient uplink
  delf  uplink compression of gradient deltas against per-client estimators
  pelf  downlink compression of iterate deltas against a mirrored iterate
  belf  both directions at once

Estimator updates use the residual form  new = fresh - ((fresh - old) - c)
instead of  old + c:  when the compressor returns the delta exactly (identity,
or top-k with k = d) the residual is exactly zero bitwise, so compressed runs
collapse to the uncompressed chain bit for bit.  Server aggregates are always
recomputed as the fixed-order client average, which keeps g = (1/n) sum g_i
an exact identity.

All kernels accept states with leading batch axes (chains), and every
reduction is einsum- or loop-based so per-chain results never depend on how
chains are batched or sharded.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import streams
from .compressors import Compressor
from .federation import Message
from .potentials import FederatedPotential, client_average

ALGORITHMS = ("lmc", "delf", "pelf", "belf")


class DivergenceError(RuntimeError):
    """Raised when the sampler state stops being finite."""

    def __init__(self, round_index: int):
        super().__init__(f"non-finite sampler state at round {round_index}")
        self.round_index = round_index


@dataclass
class SamplerState:
    """Full per-chain state; leading axes of x are batch axes.

    g is the server-side drift estimate, g_i the per-client estimators
    (axis -2 indexes clients) and w the server/client mirrored iterate.
    lmc keeps them alongside for uniformity, which is what makes the
    identity-compression reduction exact.
    """

    k: int
    x: np.ndarray
    g: np.ndarray
    g_i: np.ndarray
    w: np.ndarray
    gamma: float
    noise: object  # draw_round() -> array shaped like x


@dataclass
class RoundDiagnostics:
    """Per-round realizations; array-valued entries align with batch axes."""

    lyapunov_dual: np.ndarray
    lyapunov_primal: np.ndarray
    step_sq: np.ndarray
    uplink_floats: int
    downlink_floats: int
    messages: list


class RoundStreams:
    """Per-round compressor randomness, one stream per (chain, endpoint)."""

    def __init__(self, master_seed: int, chain_ids, round_index: int):
        self.master_seed = master_seed
        self.chain_ids = list(chain_ids)
        self.round_index = round_index

    def client(self, i: int) -> list[np.random.Generator]:
        return [streams.client_rng(self.master_seed, c, i, self.round_index)
                for c in self.chain_ids]

    def server(self) -> list[np.random.Generator]:
        return [streams.server_rng(self.master_seed, c, self.round_index)
                for c in self.chain_ids]


def sq_norm(v: np.ndarray) -> np.ndarray:
    return np.einsum("...i,...i->...", v, v)


def langevin_step(x: np.ndarray, drift: np.ndarray, gamma: float, z: np.ndarray) -> np.ndarray:
    """One Euler step x - gamma drift + sqrt(2 gamma) z."""
    return x - gamma * drift + np.sqrt(2.0 * gamma) * z


def _check_finite(x: np.ndarray, round_index: int):
    if not np.all(np.isfinite(x)):
        raise DivergenceError(round_index)


def _compress_rows(comp: Compressor, arr: np.ndarray, gens_factory) -> np.ndarray:
    """Compress (d,) or (C, d) rows, one stream per row for stochastic kinds."""
    if not comp.requires_rng:
        return comp.compress(arr)
    gens = gens_factory()
    if arr.ndim == 1:
        return comp.compress(arr, gens[0])
    out = np.empty_like(arr)
    for r in range(arr.shape[0]):
        out[r] = comp.compress(arr[r], gens[r])
    return out


def _dual_gap(est: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """(1/n) sum_i ||est_i - ref_i||^2 along the client axis."""
    n = est.shape[-2]
    acc = sq_norm(est[..., 0, :] - ref[..., 0, :])
    for i in range(1, n):
        acc = acc + sq_norm(est[..., i, :] - ref[..., i, :])
    return acc / n


def init_state(potential: FederatedPotential, gamma: float, x0: np.ndarray,
               noise) -> SamplerState:
    """Round-0 state: g_i = per-client gradients at x0, w = x0.

    With this initialization both Lyapunov gaps start at exactly zero.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape[-1] != potential.d:
        raise ValueError("x0 dimension does not match the potential")
    g_i = potential.grad_components(x0)
    g = client_average(g_i)
    return SamplerState(k=0, x=x0.copy(), g=g, g_i=g_i, w=x0.copy(),
                        gamma=float(gamma), noise=noise)


def lmc_round(state: SamplerState, potential: FederatedPotential,
              rs: RoundStreams | None = None) -> tuple[SamplerState, RoundDiagnostics]:
    """Uncompressed round: dense uplink gradients, dense broadcast."""
    k1 = state.k + 1
    z = state.noise.draw_round()
    x1 = langevin_step(state.x, state.g, state.gamma, z)
    _check_finite(x1, k1)
    g_i1 = potential.grad_components(x1)
    g1 = client_average(g_i1)
    n, d = potential.n, potential.d
    diag = RoundDiagnostics(
        lyapunov_dual=np.zeros(x1.shape[:-1]),
        lyapunov_primal=np.full(x1.shape[:-1], np.nan),
        step_sq=sq_norm(x1 - state.x),
        uplink_floats=n * d,
        downlink_floats=d,
        messages=[Message("downlink", None, d, k1, "iterate")]
        + [Message("uplink", i, d, k1, "gradient") for i in range(n)],
    )
    return replace(state, k=k1, x=x1, g=g1, g_i=g_i1, w=x1.copy()), diag


def delf_round(state: SamplerState, potential: FederatedPotential,
               uplink: Compressor, rs: RoundStreams) -> tuple[SamplerState, RoundDiagnostics]:
    """Uplink-compressed round: clients send compressed gradient deltas."""
    k1 = state.k + 1
    z = state.noise.draw_round()
    x1 = langevin_step(state.x, state.g, state.gamma, z)
    _check_finite(x1, k1)
    f_i = potential.grad_components(x1)
    g_i1 = np.empty_like(f_i)
    n, d = potential.n, potential.d
    up = 0
    messages = [Message("downlink", None, d, k1, "iterate")]
    for i in range(n):
        delta = f_i[..., i, :] - state.g_i[..., i, :]
        c_i = _compress_rows(uplink, delta, lambda: rs.client(i))
        g_i1[..., i, :] = f_i[..., i, :] - (delta - c_i)
        payload = uplink.payload_floats(c_i)
        up += payload
        messages.append(Message("uplink", i, payload, k1, "gradient_delta"))
    g1 = client_average(g_i1)
    diag = RoundDiagnostics(
        lyapunov_dual=_dual_gap(g_i1, f_i),
        lyapunov_primal=np.full(x1.shape[:-1], np.nan),
        step_sq=sq_norm(x1 - state.x),
        uplink_floats=up,
        downlink_floats=d,
        messages=messages,
    )
    return replace(state, k=k1, x=x1, g=g1, g_i=g_i1, w=x1.copy()), diag


def pelf_round(state: SamplerState, potential: FederatedPotential,
               downlink: Compressor, rs: RoundStreams) -> tuple[SamplerState, RoundDiagnostics]:
    """Downlink-compressed round: server broadcasts compressed iterate deltas.

    Clients evaluate dense gradients at the mirrored iterate w, so the drift
    is (1/n) sum_i grad F_i(w_k), carried in state.g.
    """
    k1 = state.k + 1
    z = state.noise.draw_round()
    x1 = langevin_step(state.x, state.g, state.gamma, z)
    _check_finite(x1, k1)
    delta = x1 - state.w
    v = _compress_rows(downlink, delta, rs.server)
    w1 = x1 - (delta - v)
    f_w = potential.grad_components(w1)
    g1 = client_average(f_w)
    f_x = potential.grad_components(x1)
    n, d = potential.n, potential.d
    down = downlink.payload_floats(v)
    diag = RoundDiagnostics(
        lyapunov_dual=_dual_gap(f_w, f_x),
        lyapunov_primal=potential.l_bar_sq * sq_norm(w1 - x1),
        step_sq=sq_norm(x1 - state.x),
        uplink_floats=n * d,
        downlink_floats=down,
        messages=[Message("downlink", None, down, k1, "iterate_delta")]
        + [Message("uplink", i, d, k1, "gradient") for i in range(n)],
    )
    return replace(state, k=k1, x=x1, g=g1, g_i=f_w, w=w1), diag


def belf_round(state: SamplerState, potential: FederatedPotential,
               uplink: Compressor, downlink: Compressor,
               rs: RoundStreams) -> tuple[SamplerState, RoundDiagnostics]:
    """Bidirectionally compressed round.

    Downlink: compressed iterate delta updates the mirrored w on both sides.
    Uplink: compressed gradient deltas against per-client estimators taken
    at the mirrored iterate.
    """
    k1 = state.k + 1
    z = state.noise.draw_round()
    x1 = langevin_step(state.x, state.g, state.gamma, z)
    _check_finite(x1, k1)
    delta_w = x1 - state.w
    v = _compress_rows(downlink, delta_w, rs.server)
    w1 = x1 - (delta_w - v)
    f_w = potential.grad_components(w1)
    g_i1 = np.empty_like(f_w)
    n, d = potential.n, potential.d
    down = downlink.payload_floats(v)
    up = 0
    messages = [Message("downlink", None, down, k1, "iterate_delta")]
    for i in range(n):
        delta = f_w[..., i, :] - state.g_i[..., i, :]
        h_i = _compress_rows(uplink, delta, lambda: rs.client(i))
        g_i1[..., i, :] = f_w[..., i, :] - (delta - h_i)
        payload = uplink.payload_floats(h_i)
        up += payload
        messages.append(Message("uplink", i, payload, k1, "gradient_delta"))
    g1 = client_average(g_i1)
    diag = RoundDiagnostics(
        lyapunov_dual=_dual_gap(g_i1, f_w),
        lyapunov_primal=potential.l_bar_sq * sq_norm(w1 - x1),
        step_sq=sq_norm(x1 - state.x),
        uplink_floats=up,
        downlink_floats=down,
        messages=messages,
    )
    return replace(state, k=k1, x=x1, g=g1, g_i=g_i1, w=w1), diag


def make_round_fn(algorithm: str, uplink: Compressor | None, downlink: Compressor | None):
    """Bind an algorithm name and its compressors to a (state, rs) kernel."""
    if algorithm == "lmc":
        if uplink is not None or downlink is not None:
            raise ValueError("lmc takes no compressors")
        return lambda state, potential, rs: lmc_round(state, potential, rs)
    if algorithm == "delf":
        if uplink is None:
            raise ValueError("delf requires an uplink compressor")
        if downlink is not None:
            raise ValueError("delf takes no downlink compressor")
        return lambda state, potential, rs: delf_round(state, potential, uplink, rs)
    if algorithm == "pelf":
        if downlink is None:
            raise ValueError("pelf requires a downlink compressor")
        if uplink is not None:
            raise ValueError("pelf takes no uplink compressor")
        return lambda state, potential, rs: pelf_round(state, potential, downlink, rs)
    if algorithm == "belf":
        if uplink is None or downlink is None:
            raise ValueError("belf requires both uplink and downlink compressors")
        return lambda state, potential, rs: belf_round(state, potential, uplink, downlink, rs)
    raise ValueError(f"unknown algorithm: {algorithm!r}")


def run_chain(algorithm: str, potential: FederatedPotential, gamma: float, rounds: int,
              master_seed: int = 0, chain: int = 0,
              uplink: Compressor | None = None, downlink: Compressor | None = None,
              x0: np.ndarray | None = None,
              ) -> tuple[list[RoundDiagnostics], SamplerState]:
    """Drive one chain for `rounds` rounds; returns per-round diagnostics.

    Raises DivergenceError (with the round index) if the state goes
    non-finite.
    """
    if rounds < 0:
        raise ValueError("rounds must be >= 0")
    round_fn = make_round_fn(algorithm, uplink, downlink)
    if x0 is None:
        x0 = streams.init_rng(master_seed, chain).standard_normal(potential.d)
    noise = streams.ChainNoise(master_seed, chain, potential.d)
    state = init_state(potential, gamma, x0, noise)
    trace: list[RoundDiagnostics] = []
    for k in range(1, rounds + 1):
        rs = RoundStreams(master_seed, [chain], k)
        state, diag = round_fn(state, potential, rs)
        trace.append(diag)
    return trace, state
