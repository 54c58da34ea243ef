"""Sparse user-to-RE structure and the uplink superposition model.

Indices are 0-based: user ``k`` is column ``k`` of the indicator matrix and
RE ``n`` is row ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from math import comb

import numpy as np

from .constellation import MultiDimConstellation, apply_rotation
from .errors import DimensionMismatch, InvalidConfig, InvariantViolation

# user-to-RE indicator used throughout the reference experiments (K=6, N=4)
CANONICAL_S = (
    (0, 1, 1, 0, 1, 0),
    (1, 0, 1, 0, 0, 1),
    (0, 1, 0, 1, 0, 1),
    (1, 0, 0, 1, 1, 0),
)


@dataclass(frozen=True, eq=False)
class MappingMatrix:
    """Binary ``N x dv`` matrix placing a user's ``dv`` dimensions onto REs."""

    rows: np.ndarray

    def __post_init__(self):
        F = np.array(self.rows, dtype=np.int8)
        if F.ndim != 2:
            raise InvariantViolation("shape", "mapping matrix must be 2-D")
        if not np.isin(F, (0, 1)).all():
            raise InvariantViolation("binary", "entries must be 0 or 1")
        if not (F.sum(axis=0) == 1).all():
            raise InvariantViolation("column_weight", "each column needs exactly one 1")
        if not (F.sum(axis=1) <= 1).all():
            raise InvariantViolation("row_weight", "each row may hold at most one 1")
        F.setflags(write=False)
        object.__setattr__(self, "rows", F)

    @property
    def N(self) -> int:
        return self.rows.shape[0]

    @property
    def dv(self) -> int:
        return self.rows.shape[1]

    @property
    def res(self) -> np.ndarray:
        """RE index of each dimension, in dimension order."""
        return np.argmax(self.rows, axis=0)

    def indicator(self) -> np.ndarray:
        """``diag(F F^T)`` as an integer vector of length ``N``."""
        return np.diag(self.rows @ self.rows.T).astype(np.int8)

    def __eq__(self, other):
        return isinstance(other, MappingMatrix) and np.array_equal(self.rows, other.rows)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class IndicatorMatrix:
    """Binary ``N x K`` user-to-RE indicator with regular column and row weights."""

    entries: np.ndarray

    def __post_init__(self):
        S = np.array(self.entries, dtype=np.int8)
        if S.ndim != 2 or S.size == 0:
            raise InvariantViolation("shape", "indicator must be a non-empty 2-D matrix")
        if not np.isin(S, (0, 1)).all():
            raise InvariantViolation("binary", "entries must be 0 or 1")
        cols = S.sum(axis=0)
        rows = S.sum(axis=1)
        if cols.min() < 1 or len(set(cols.tolist())) != 1:
            raise InvariantViolation("column_weight", f"column sums must be equal and positive, got {cols.tolist()}")
        if len(set(rows.tolist())) != 1:
            raise InvariantViolation("row_weight", f"row sums must be equal, got {rows.tolist()}")
        if len({tuple(c) for c in S.T.tolist()}) != S.shape[1]:
            raise InvariantViolation("distinct_columns", "two users share the same REs")
        S.setflags(write=False)
        object.__setattr__(self, "entries", S)

    @property
    def N(self) -> int:
        return self.entries.shape[0]

    @property
    def K(self) -> int:
        return self.entries.shape[1]

    @property
    def dv(self) -> int:
        return int(self.entries[:, 0].sum())

    @property
    def dc(self) -> int:
        return int(self.entries[0].sum())

    @property
    def is_fully_loaded(self) -> bool:
        return self.K == comb(self.N, self.dv)

    def users_of(self, n: int) -> np.ndarray:
        return np.flatnonzero(self.entries[n])

    def res_of(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.entries[:, k])

    def __eq__(self, other):
        return isinstance(other, IndicatorMatrix) and np.array_equal(self.entries, other.entries)

    __hash__ = None


def canonical_indicator() -> IndicatorMatrix:
    return IndicatorMatrix(np.array(CANONICAL_S))


def full_load_indicator(N: int, dv: int) -> IndicatorMatrix:
    """All ``C(N, dv)`` RE subsets as columns, in lexicographic order."""
    if not 1 <= dv <= N:
        raise InvalidConfig(f"need 1 <= dv <= N, got dv={dv}, N={N}")
    subsets = list(combinations(range(N), dv))
    S = np.zeros((N, len(subsets)), dtype=np.int8)
    for k, sub in enumerate(subsets):
        S[list(sub), k] = 1
    return IndicatorMatrix(S)


def mapping_from_column(S: IndicatorMatrix, k: int) -> MappingMatrix:
    res = S.res_of(k)
    F = np.zeros((S.N, len(res)), dtype=np.int8)
    F[res, np.arange(len(res))] = 1
    return MappingMatrix(F)


def spread(F: MappingMatrix, x) -> np.ndarray:
    """Place a ``dv``-dimensional point onto its REs, giving a sparse N-vector."""
    x = np.asarray(x, dtype=np.complex128)
    if x.shape[-1] != F.dv:
        raise DimensionMismatch(f"point has {x.shape[-1]} dimensions, mapping expects {F.dv}")
    return x @ F.rows.T.astype(np.complex128)


@dataclass(frozen=True, eq=False)
class SystemConfig:
    """Indicator matrix plus one constellation per user."""

    indicator: IndicatorMatrix
    constellations: tuple[MultiDimConstellation, ...]
    _codebooks: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        cs = tuple(self.constellations)
        S = self.indicator
        if len(cs) != S.K:
            raise InvalidConfig(f"{len(cs)} constellations for {S.K} users")
        Ms = {c.M for c in cs}
        if len(Ms) != 1:
            raise InvalidConfig("all users must use the same constellation size")
        for c in cs:
            if c.dv != S.dv:
                raise InvalidConfig(f"constellation {c.name!r} has dv={c.dv}, indicator has dv={S.dv}")
        if (S.K * S.dv) % S.N:
            raise InvalidConfig("K*dv must be divisible by N")
        # codebooks[k, label, n]: user k's sparse codeword for label on RE n
        V = np.zeros((S.K, cs[0].M, S.N), dtype=np.complex128)
        for k, c in enumerate(cs):
            V[k][:, S.res_of(k)] = c.table
        V.setflags(write=False)
        object.__setattr__(self, "constellations", cs)
        object.__setattr__(self, "_codebooks", V)

    @classmethod
    def uniform(cls, indicator: IndicatorMatrix, constellation: MultiDimConstellation) -> SystemConfig:
        """Every user transmits the mother constellation unrotated."""
        return cls(indicator, (constellation,) * indicator.K)

    @classmethod
    def canonical(cls, constellation: MultiDimConstellation) -> SystemConfig:
        return cls.uniform(canonical_indicator(), constellation)

    def with_rotations(self, rotations) -> SystemConfig:
        """Apply a user-specific rotation to each user's constellation."""
        rotations = list(rotations)
        if len(rotations) != self.K:
            raise InvalidConfig(f"{len(rotations)} rotations for {self.K} users")
        return SystemConfig(
            self.indicator,
            tuple(apply_rotation(c, r) for c, r in zip(self.constellations, rotations)),
        )

    @property
    def K(self) -> int:
        return self.indicator.K

    @property
    def N(self) -> int:
        return self.indicator.N

    @property
    def dv(self) -> int:
        return self.indicator.dv

    @property
    def dc(self) -> int:
        return self.indicator.dc

    @property
    def M(self) -> int:
        return self.constellations[0].M

    @property
    def bits_per_symbol(self) -> int:
        return self.constellations[0].bits_per_symbol

    @cached_property
    def mappings(self) -> tuple[MappingMatrix, ...]:
        return tuple(mapping_from_column(self.indicator, k) for k in range(self.K))

    @property
    def codebooks(self) -> np.ndarray:
        """``(K, M, N)`` sparse codewords indexed by label."""
        return self._codebooks

    def codewords(self, labels) -> np.ndarray:
        """Sparse N-vectors for per-user ``labels`` of shape ``(..., K)``."""
        labels = np.asarray(labels)
        return self._codebooks[np.arange(self.K), labels]

    def to_dict(self) -> dict:
        names = [c.name for c in self.constellations]
        return {
            "indicator": self.indicator.entries.tolist(),
            "constellations": names,
            "K": self.K,
            "N": self.N,
            "dv": self.dv,
            "dc": self.dc,
            "M": self.M,
        }


def superimpose(system: SystemConfig, symbols, channel, noise=None) -> np.ndarray:
    """Received N-vector(s) ``sum_k diag(h_k) F_k x_k + w``.

    ``symbols`` holds per-user points, shape ``(..., K, dv)``; ``channel`` is
    ``(..., K, N)``; ``noise`` broadcasts against ``(..., N)``.
    """
    x = np.asarray(symbols, dtype=np.complex128)
    h = np.asarray(channel, dtype=np.complex128)
    K, N, dv = system.K, system.N, system.dv
    if x.shape[-2:] != (K, dv):
        raise DimensionMismatch(f"symbols must end in ({K}, {dv}), got {x.shape}")
    if h.shape[-2:] != (K, N):
        raise DimensionMismatch(f"channel must end in ({K}, {N}), got {h.shape}")
    v = np.zeros(x.shape[:-2] + (K, N), dtype=np.complex128)
    for k, F in enumerate(system.mappings):
        v[..., k, F.res] = x[..., k, :]
    y = (h * v).sum(axis=-2)
    if noise is not None:
        noise = np.asarray(noise, dtype=np.complex128)
        if noise.shape[-1] != N:
            raise DimensionMismatch(f"noise must end in {N}, got {noise.shape}")
        y = y + noise
    return y


def transmit(system: SystemConfig, labels, channel, noise=None) -> np.ndarray:
    """Like :func:`superimpose` but takes per-user labels, shape ``(..., K)``."""
    v = system.codewords(labels)
    y = (np.asarray(channel) * v).sum(axis=-2)
    if noise is not None:
        y = y + noise
    return y
