"""Deterministic random-stream derivation.

Every source of randomness in a run is a dedicated PCG64 stream derived from
the master seed and a structured key, so results are reproducible bitwise
regardless of execution order or chain-level parallelism.  Noise streams are
separate from compressor streams: a round consumes Langevin noise from the
chain's noise stream and compressor randomness (if any) from per-(chain,
client, round) streams, so runs that differ only in compressor kind see
identical noise.
"""
from __future__ import annotations

import numpy as np

# key domains, fixed so stream identities never collide across purposes
_NOISE = 0
_CLIENT = 1
_SERVER = 2
_INIT = 3


def _generator(master_seed: int, *key: int) -> np.random.Generator:
    if master_seed < 0:
        raise ValueError("master_seed must be non-negative")
    seq = np.random.SeedSequence([int(master_seed), *map(int, key)])
    return np.random.Generator(np.random.PCG64(seq))


def init_rng(master_seed: int, chain: int) -> np.random.Generator:
    """Stream used to draw the chain's initial state x_0 ~ rho_0."""
    return _generator(master_seed, _INIT, chain)


def noise_rng(master_seed: int, chain: int) -> np.random.Generator:
    """Stream supplying the chain's Langevin noise, one (d,) draw per round."""
    return _generator(master_seed, _NOISE, chain)


def client_rng(master_seed: int, chain: int, client: int, round_index: int) -> np.random.Generator:
    """Stream for client-side (uplink) compressor randomness in one round."""
    return _generator(master_seed, _CLIENT, chain, client, round_index)


def server_rng(master_seed: int, chain: int, round_index: int) -> np.random.Generator:
    """Stream for server-side (downlink) compressor randomness in one round."""
    return _generator(master_seed, _SERVER, chain, round_index)


class NoiseBlock:
    """Buffered per-round noise for a batch of chains.

    Draws standard normal blocks from each chain's noise stream and serves
    them one round at a time.  Block buffering is bitwise identical to
    drawing (d,) per round because Generator.standard_normal fills arrays
    in draw order.
    """

    def __init__(self, master_seed: int, chains: range | list[int], d: int, block: int = 256):
        self._gens = [noise_rng(master_seed, c) for c in chains]
        self._d = d
        self._block = max(1, int(block))
        self._buf: np.ndarray | None = None
        self._pos = 0

    def draw_round(self) -> np.ndarray:
        """Return the next (C, d) noise slab, one row per chain."""
        if self._buf is None or self._pos == self._buf.shape[1]:
            self._buf = np.stack(
                [g.standard_normal((self._block, self._d)) for g in self._gens]
            )
            self._pos = 0
        out = self._buf[:, self._pos, :]
        self._pos += 1
        return out


class ChainNoise:
    """Single-chain view with the same stream semantics as NoiseBlock."""

    def __init__(self, master_seed: int, chain: int, d: int):
        self._gen = noise_rng(master_seed, chain)
        self._d = d

    def draw_round(self) -> np.ndarray:
        return self._gen.standard_normal(self._d)


class ConstantNoise:
    """Deterministic noise source for hand-traced tests; repeats given draws."""

    def __init__(self, draws):
        self._draws = [np.asarray(z, dtype=float) for z in draws]
        self._pos = 0

    def draw_round(self) -> np.ndarray:
        z = self._draws[min(self._pos, len(self._draws) - 1)]
        self._pos += 1
        return z
