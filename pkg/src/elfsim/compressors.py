"""Contractive compression operators.

All operators Q here satisfy the contraction property

    E ||Q(v) - v||^2 <= (1 - alpha) ||v||^2,   alpha in (0, 1],

with alpha reported by :attr:`Compressor.alpha`.  Deterministic kinds
(identity, top_k) satisfy it pointwise; stochastic kinds in expectation over
their own randomness.  One ``compress`` call is one compression event and
consumes from the supplied generator only if the kind is randomized.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("identity", "top_k", "rand_k", "scaled_natural", "scaled_unbiased_wrapper")

# kinds that draw from an rng during compress()
_STOCHASTIC = ("rand_k", "scaled_natural", "scaled_unbiased_wrapper")

# variance bound of the unscaled natural rounding, E||C(v)-v||^2 <= omega ||v||^2
_NATURAL_OMEGA = 1.0 / 8.0


@dataclass(frozen=True)
class Compressor:
    """A contractive compressor configured for vectors of length d.

    Parameters
    ----------
    kind : one of KINDS
    d : vector dimension the operator is bound to
    k : kept coordinates, required for top_k / rand_k
    omega : variance bound of the wrapped unbiased operator, required for
        scaled_unbiased_wrapper (omega >= 0; omega = 0 degenerates to identity)
    """

    kind: str
    d: int
    k: int | None = None
    omega: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown compressor kind: {self.kind!r}")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.kind in ("top_k", "rand_k"):
            if self.k is None:
                raise ValueError(f"{self.kind} requires k")
            if not 1 <= self.k <= self.d:
                raise ValueError(f"k must satisfy 1 <= k <= d, got k={self.k}, d={self.d}")
        if self.kind == "scaled_unbiased_wrapper":
            if self.omega is None:
                raise ValueError("scaled_unbiased_wrapper requires omega")
            if self.omega < 0:
                raise ValueError("omega must be >= 0")

    @property
    def alpha(self) -> float:
        """Contraction parameter of the operator."""
        if self.kind == "identity":
            return 1.0
        if self.kind in ("top_k", "rand_k"):
            return self.k / self.d
        if self.kind == "scaled_natural":
            return 1.0 / (_NATURAL_OMEGA + 1.0)  # = 8/9
        return 1.0 / (self.omega + 1.0)

    @property
    def requires_rng(self) -> bool:
        if self.kind == "scaled_unbiased_wrapper":
            return self.omega > 0
        return self.kind in ("rand_k", "scaled_natural")

    def compress(self, v: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
        """Apply the operator to v with trailing axis of length d.

        Deterministic kinds accept arbitrary leading batch axes.  Stochastic
        kinds also accept batches but then consume a single stream for the
        whole call; callers that need per-row streams must call per row.
        """
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.d:
            raise ValueError(f"vector length {v.shape[-1]} does not match configured d={self.d}")
        if self.requires_rng and rng is None:
            raise ValueError(f"{self.kind} requires an rng")

        if self.kind == "identity":
            return v.copy()
        if self.kind == "top_k":
            return self._top_k(v)
        if self.kind == "rand_k":
            return self._rand_k(v, rng)
        if self.kind == "scaled_natural":
            return self._scaled_natural(v, rng)
        return self._scaled_wrapper(v, rng)

    def _top_k(self, v: np.ndarray) -> np.ndarray:
        # stable sort on -|v|: ties keep original order, so lowest index wins
        order = np.argsort(-np.abs(v), axis=-1, kind="stable")
        keep = order[..., : self.k]
        out = np.zeros_like(v)
        np.put_along_axis(out, keep, np.take_along_axis(v, keep, axis=-1), axis=-1)
        return out

    def _rand_k(self, v: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        # uniform k-subset selection without scaling: E||Q(v)-v||^2 = (1-k/d)||v||^2
        out = np.zeros_like(v)
        flat_v = v.reshape(-1, self.d)
        flat_o = out.reshape(-1, self.d)
        for row_v, row_o in zip(flat_v, flat_o):
            idx = rng.choice(self.d, size=self.k, replace=False)
            row_o[idx] = row_v[idx]
        return out

    def _scaled_natural(self, v: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        # randomized power-of-two rounding of |v|, scaled by 8/9 to be contractive.
        # |v| = m 2^e with m in [0.5, 1): round up to 2^e w.p. 2m-1, else to 2^(e-1).
        m, e = np.frexp(np.abs(v))
        up = rng.random(v.shape) < (2.0 * m - 1.0)
        mag = np.ldexp(1.0, e - 1 + up)
        out = (8.0 / 9.0) * np.sign(v) * mag
        return np.where(v == 0.0, 0.0, out)

    def _scaled_wrapper(self, v: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        # wrapped unbiased op: random dilation (1 + sqrt(omega) R) v, R = +/-1.
        # E||.-v||^2 = omega ||v||^2 exactly, so the 1/(omega+1) scaling attains
        # the contraction bound with equality for every input.
        if self.omega == 0.0:
            return v.copy()
        shape = v.shape[:-1] + (1,)
        r = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
        return (1.0 + np.sqrt(self.omega) * r) * v / (self.omega + 1.0)

    def payload_floats(self, output: np.ndarray) -> int:
        """Float-equivalent payload of one compressed vector.

        Sparse kinds ship k (value, index) pairs; dense kinds ship d floats.
        scaled_natural is counted as d as a documented convention (a bit-packed
        implementation would ship sign+exponent bits only).
        """
        output = np.asarray(output)
        if output.shape[-1] != self.d:
            raise ValueError(f"output length {output.shape[-1]} does not match configured d={self.d}")
        if self.kind in ("top_k", "rand_k"):
            return 2 * self.k
        return self.d

    def to_config(self) -> dict:
        cfg: dict = {"kind": self.kind}
        if self.k is not None:
            cfg["k"] = self.k
        if self.omega is not None:
            cfg["omega"] = self.omega
        return cfg

    @classmethod
    def from_config(cls, cfg: dict, d: int) -> "Compressor":
        """Build from a {"kind": ..., "k": ..., "omega": ...} mapping."""
        if not isinstance(cfg, dict) or "kind" not in cfg:
            raise ValueError("compressor config must be a mapping with a 'kind' key")
        extra = set(cfg) - {"kind", "k", "omega"}
        if extra:
            raise ValueError(f"unknown compressor config keys: {sorted(extra)}")
        k = cfg.get("k")
        omega = cfg.get("omega")
        return cls(kind=cfg["kind"], d=d, k=None if k is None else int(k),
                   omega=None if omega is None else float(omega))
