"""Rayleigh fading under the six RE/time correlation cases, plus complex AWGN.

Coefficients are CN(0, 1) and independent across users in every case. What
changes between cases is which coefficients of one user are shared:

====  =========================================  ======================
case  shared across                               independent across
====  =========================================  ======================
fsc   all REs (one channel use)                   users
fic   nothing (one channel use)                   users, REs
ffsc  all REs of a channel use                    users, channel uses
ffic  nothing                                     users, REs, uses
sfsc  all REs and all channel uses                users
sfic  all channel uses of one RE                  users, REs
====  =========================================  ======================

``awgn`` sets every coefficient to 1 and exists for testing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidConfig, InvalidN0
from .rng import stream


class ChannelCase(str, Enum):
    FSC = "fsc"
    FIC = "fic"
    FFSC = "ffsc"
    FFIC = "ffic"
    SFSC = "sfsc"
    SFIC = "sfic"
    AWGN = "awgn"

    @property
    def uncoded(self) -> bool:
        return self in (ChannelCase.FSC, ChannelCase.FIC)

    @property
    def same_across_res(self) -> bool:
        return self in (ChannelCase.FSC, ChannelCase.FFSC, ChannelCase.SFSC)

    @property
    def static_over_uses(self) -> bool:
        return self in (ChannelCase.FSC, ChannelCase.FIC, ChannelCase.SFSC, ChannelCase.SFIC)


def as_case(case) -> ChannelCase:
    try:
        return ChannelCase(case.lower() if isinstance(case, str) else case)
    except ValueError:
        raise InvalidConfig(f"unknown channel case {case!r}") from None


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """``h[k, n, i]``: coefficient of user ``k`` on RE ``n`` at channel use ``i``."""

    h: np.ndarray
    case: ChannelCase
    seed: int | None


def cn(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly symmetric CN(0, 1) samples."""
    z = rng.standard_normal((2,) + tuple(shape))
    return (z[0] + 1j * z[1]) * math.sqrt(0.5)


def fading(case, rng: np.random.Generator, K: int, N: int, n_cu: int = 1, batch=()) -> np.ndarray:
    """Vectorized draw of shape ``batch + (K, N, n_cu)``; see :func:`draw`."""
    case = as_case(case)
    batch = tuple(batch)
    if min(K, N, n_cu) < 1:
        raise InvalidConfig("K, N and n_cu must all be >= 1")
    if case.uncoded and n_cu != 1:
        raise InvalidConfig(f"{case.value} is an uncoded case and has a single channel use")
    full = batch + (K, N, n_cu)
    if case is ChannelCase.AWGN:
        return np.ones(full, dtype=np.complex128)
    n_dim = 1 if case.same_across_res else N
    i_dim = 1 if case.static_over_uses else n_cu
    g = cn(rng, batch + (K, n_dim, i_dim))
    return np.broadcast_to(g, full).copy()


def draw(case, K: int, N: int, n_cu: int = 1, seed=None) -> ChannelRealization:
    """One realization, fully determined by ``seed``."""
    h = fading(case, stream(seed), K, N, n_cu)
    return ChannelRealization(h, as_case(case), seed if not isinstance(seed, np.random.Generator) else None)


def noise(N: int, n_cu: int, n0: float, seed=None, batch=()) -> np.ndarray:
    """i.i.d. CN(0, n0) samples of shape ``batch + (N, n_cu)``."""
    if not n0 > 0 or not math.isfinite(n0):
        raise InvalidN0(f"noise variance must be positive and finite, got {n0}")
    return cn(stream(seed), tuple(batch) + (N, n_cu)) * math.sqrt(n0)


def n0_from_snr(snr_db: float, bits_per_symbol: int, rate: float = 1.0) -> float:
    """Noise variance for a unit-energy constellation at the given Eb/N0 (or Emb/N0 when coded)."""
    if not 0 < rate <= 1:
        raise InvalidConfig(f"code rate must lie in (0, 1], got {rate}")
    return 1.0 / (rate * bits_per_symbol * 10.0 ** (snr_db / 10.0))
