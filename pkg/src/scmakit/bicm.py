"""Bit-interleaved coded modulation around the SCMA detector.

The chain per user is encode -> interleave -> split into ``L_M``-bit labels
-> spread and superimpose over ``N_cu`` channel uses -> Log-MPA per use ->
bit LLRs -> deinterleave -> decode. Codecs are pluggable; the identity and
repetition codecs here are stand-ins for a real channel code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import channel as ch
from .detector import detect
from .errors import InvalidConfig, LengthMismatch
from .rng import stream
from .scma import SystemConfig, transmit


class Codec:
    """Binary code with ``rate = K_c / N_c``.

    ``encode`` maps message bits ``(..., K_c)`` to code bits ``(..., N_c)``
    and ``decode`` maps code-bit LLRs ``(..., N_c)`` (positive favours 0) to
    message bit estimates ``(..., K_c)``.
    """

    rate: float = 1.0

    def message_length(self, n_c: int) -> int:
        k_c = n_c * self.rate
        if abs(k_c - round(k_c)) > 1e-9 or round(k_c) < 1:
            raise InvalidConfig(f"codeword length {n_c} does not fit rate {self.rate}")
        return int(round(k_c))

    def encode(self, bits: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def decode(self, llrs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def spec(self) -> dict:
        raise NotImplementedError


class IdentityCodec(Codec):
    rate = 1.0

    def encode(self, bits):
        return np.asarray(bits, dtype=np.int8).copy()

    def decode(self, llrs):
        return (np.asarray(llrs) < 0).astype(np.int8)

    def spec(self):
        return {"type": "identity"}


class RepetitionCodec(Codec):
    """Each message bit sent ``n`` times in a row; decoding sums the copies."""

    def __init__(self, n: int):
        if n < 1:
            raise InvalidConfig("repetition factor must be >= 1")
        self.n = int(n)
        self.rate = 1.0 / self.n

    def encode(self, bits):
        return np.repeat(np.asarray(bits, dtype=np.int8), self.n, axis=-1)

    def decode(self, llrs):
        llrs = np.asarray(llrs)
        if llrs.shape[-1] % self.n:
            raise LengthMismatch(f"{llrs.shape[-1]} LLRs is not a multiple of {self.n}")
        s = llrs.reshape(llrs.shape[:-1] + (-1, self.n)).sum(axis=-1)
        return (s < 0).astype(np.int8)

    def spec(self):
        return {"type": "repetition", "n": self.n}


def identity_codec() -> IdentityCodec:
    return IdentityCodec()


def repetition_codec(n: int) -> RepetitionCodec:
    return RepetitionCodec(n)


def codec_from_spec(spec) -> Codec:
    if isinstance(spec, Codec):
        return spec
    kind = spec.get("type")
    if kind == "identity":
        return IdentityCodec()
    if kind == "repetition":
        return RepetitionCodec(int(spec.get("n", 3)))
    raise InvalidConfig(f"unknown codec {spec!r}")


@dataclass(frozen=True, eq=False)
class FramePlan:
    """Codeword length, bits per symbol and the bit interleaver.

    ``permutation[i]`` is the code-bit position sent in slot ``i``.
    """

    n_c: int
    bits_per_symbol: int
    permutation: np.ndarray

    def __post_init__(self):
        perm = np.asarray(self.permutation, dtype=np.intp)
        if self.n_c % self.bits_per_symbol:
            raise LengthMismatch(f"L_M={self.bits_per_symbol} does not divide N_c={self.n_c}")
        if perm.shape != (self.n_c,) or not np.array_equal(np.sort(perm), np.arange(self.n_c)):
            raise InvalidConfig("interleaver must be a permutation of range(N_c)")
        perm.setflags(write=False)
        object.__setattr__(self, "permutation", perm)

    @property
    def n_cu(self) -> int:
        return self.n_c // self.bits_per_symbol


def make_plan(n_c: int, bits_per_symbol: int, seed: int | None = None) -> FramePlan:
    """Uniform random interleaver drawn from ``seed``; ``None`` means no interleaving."""
    if seed is None:
        perm = np.arange(n_c)
    else:
        perm = stream(seed).permutation(n_c)
    return FramePlan(n_c, bits_per_symbol, perm)


def interleave(bits, plan: FramePlan) -> np.ndarray:
    bits = np.asarray(bits)
    if bits.shape[-1] != plan.n_c:
        raise LengthMismatch(f"expected {plan.n_c} bits, got {bits.shape[-1]}")
    return bits[..., plan.permutation]


def deinterleave(llrs, plan: FramePlan) -> np.ndarray:
    llrs = np.asarray(llrs)
    if llrs.shape[-1] != plan.n_c:
        raise LengthMismatch(f"expected {plan.n_c} values, got {llrs.shape[-1]}")
    out = np.empty_like(llrs)
    out[..., plan.permutation] = llrs
    return out


def segment(bits, bits_per_symbol: int) -> np.ndarray:
    """Group bits MSB-first into labels: ``[1,1,0,1]`` with 2 bits/symbol gives ``[3, 1]``."""
    bits = np.asarray(bits, dtype=np.int64)
    if bits.shape[-1] % bits_per_symbol:
        raise LengthMismatch(f"{bits.shape[-1]} bits is not a multiple of {bits_per_symbol}")
    groups = bits.reshape(bits.shape[:-1] + (-1, bits_per_symbol))
    weights = 1 << np.arange(bits_per_symbol - 1, -1, -1)
    return groups @ weights


def assemble(llr_blocks) -> np.ndarray:
    """Flatten per-symbol LLR blocks ``(..., N_cu, L_M)`` into ``(..., N_c)``."""
    llr_blocks = np.asarray(llr_blocks)
    return llr_blocks.reshape(llr_blocks.shape[:-2] + (-1,))


def detect_chunked(y, h, system: SystemConfig, n0: float, iterations=None, chunk: int = 4096):
    """Hard decisions and LLRs for ``(T, N)`` received vectors, ``chunk`` at a time.

    Detection is per channel use, so chunking only bounds memory. Projections
    are collapsed, which leaves max-log decisions unchanged.
    """
    T = y.shape[0]
    hard = np.empty((T, system.K), dtype=np.int64)
    llr = np.empty((T, system.K, system.bits_per_symbol))
    for s in range(0, T, chunk):
        r = detect(y[s:s + chunk], h[s:s + chunk], system, n0, iterations, collapse=True)
        hard[s:s + chunk] = r.hard
        llr[s:s + chunk] = r.llr
    return hard, llr


@dataclass(frozen=True, eq=False)
class FrameOutcome:
    """Per-frame, per-user counts; arrays are ``(n_frames, K)``."""

    bit_errors: np.ndarray
    frame_errors: np.ndarray
    symbol_errors: np.ndarray
    message_length: int
    n_cu: int


def run_coded_frames(
    codec: Codec,
    plan: FramePlan,
    system: SystemConfig,
    case,
    snr_db: float,
    rng: np.random.Generator,
    n_frames: int = 1,
    iterations: int | None = None,
) -> FrameOutcome:
    """Simulate ``n_frames`` independent frames for all users at once.

    ``snr_db`` is energy per message bit over N0; ``math.inf`` removes the
    noise entirely.
    """
    case = ch.as_case(case)
    if case.uncoded:
        raise InvalidConfig(f"{case.value} is an uncoded channel case")
    if plan.bits_per_symbol != system.bits_per_symbol:
        raise InvalidConfig("frame plan and constellation disagree on bits per symbol")
    K, N = system.K, system.N
    k_c = codec.message_length(plan.n_c)
    n_cu = plan.n_cu

    msg = rng.integers(0, 2, size=(n_frames, K, k_c), dtype=np.int8)
    coded = codec.encode(msg)
    labels = segment(interleave(coded, plan), plan.bits_per_symbol)  # (F, K, n_cu)
    h = ch.fading(case, rng, K, N, n_cu, batch=(n_frames,))  # (F, K, N, n_cu)
    h = np.moveaxis(h, -1, 1)  # (F, n_cu, K, N)
    lab_t = np.moveaxis(labels, -1, 1)  # (F, n_cu, K)
    y = transmit(system, lab_t, h)
    n0 = ch.n0_from_snr(snr_db, plan.bits_per_symbol, codec.rate)
    if n0 > 0:
        y = y + ch.cn(rng, y.shape) * math.sqrt(n0)
    else:
        n0 = 1.0  # noiseless: any positive value leaves max-log decisions unchanged
    hard, llr = detect_chunked(y.reshape(-1, N), h.reshape(-1, K, N), system, n0, iterations)
    hard = hard.reshape(n_frames, n_cu, K)
    llr = llr.reshape(n_frames, n_cu, K, -1)
    sym_err = (hard != lab_t).sum(axis=1)  # (F, K)
    llr = assemble(np.moveaxis(llr, 1, 2))  # (F, K, N_c)
    est = codec.decode(deinterleave(llr, plan))
    bit_err = (est != msg).sum(axis=-1)
    return FrameOutcome(bit_err, bit_err > 0, sym_err, k_c, n_cu)


def run_coded_frame(codec, plan, system, case, snr_db, seed, iterations=None) -> FrameOutcome:
    """One frame for every user, fully determined by ``seed``."""
    return run_coded_frames(codec, plan, system, case, snr_db, stream(seed), 1, iterations)
