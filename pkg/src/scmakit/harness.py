"""Seeded Monte Carlo sweeps over SNR.

Trials are grouped in fixed-size blocks. Block ``b`` of grid point ``i`` draws
everything from ``stream(seed, i, b)``, so its counts depend on nothing but
its key. A point stops at the shortest prefix of blocks that reaches
``min_errors`` error events or ``max_trials`` trials. Workers only decide
which blocks get computed early; the kept prefix, and so every reported
number, is the same for any worker count.

A trial is one channel use (all ``K`` users) in the uncoded modes and one
frame per user in ``coded-frame`` mode.
"""

from __future__ import annotations

import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import bicm
from . import channel as ch
from .constellation import MultiDimConstellation, phase_rotation, resolve
from .errors import ConfigError, GridMismatch, ScmaError
from .rng import stream
from .scma import IndicatorMatrix, SystemConfig, canonical_indicator, transmit

MODES = ("uncoded-symbol", "uncoded-bit", "coded-frame")
UNCODED_CASES = ("fsc", "fic", "awgn")
CODED_CASES = ("ffsc", "ffic", "sfsc", "sfic", "awgn")
Z95 = 1.959963984540054
# channel uses handed to the detector at once; bounds memory for M = 16
DETECT_CHUNK = 4096
CSV_COLUMNS = ("snr_db", "trials", "sym_err", "bit_err", "frame_err", "ser", "ber", "fer", "ser_ci", "ber_ci", "fer_ci")


@dataclass(frozen=True, eq=False)
class SweepConfig:
    """Everything that determines a sweep.

    ``constellation`` is a builtin name, a file path or a constellation
    object. ``rotations`` optionally gives one list of ``dv`` phases (radians)
    per user. ``block_size`` of ``None`` picks a size from the system.
    """

    constellation: object
    case: str
    snr_db: tuple = ()
    mode: str = "uncoded-symbol"
    codec: dict = field(default_factory=lambda: {"type": "identity"})
    min_errors: int = 200
    max_trials: int = 10**7
    seed: int = 0
    workers: int = 1
    block_size: int | None = None
    iterations: int | None = None
    n_c: int = 120
    interleaver_seed: int | None = 0
    rotations: tuple | None = None
    indicator: tuple | None = None

    def __post_init__(self):
        snr = tuple(float(s) for s in self.snr_db)
        object.__setattr__(self, "snr_db", snr)
        if any(not math.isfinite(s) for s in snr):
            raise ConfigError("snr grid must be finite")
        if any(b <= a for a, b in zip(snr, snr[1:])):
            raise ConfigError("snr grid must be strictly increasing")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        case = str(self.case).lower()
        allowed = CODED_CASES if self.mode == "coded-frame" else UNCODED_CASES
        if case not in allowed:
            raise ConfigError(f"channel case {self.case!r} not allowed in {self.mode} mode; use one of {allowed}")
        object.__setattr__(self, "case", case)
        if self.min_errors < 1:
            raise ConfigError("min_errors must be >= 1")
        if self.max_trials < 1:
            raise ConfigError("max_trials must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.block_size is not None and self.block_size < 1:
            raise ConfigError("block_size must be >= 1")
        if self.iterations is not None and self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        try:
            bicm.codec_from_spec(self.codec)
        except ScmaError as e:
            raise ConfigError(str(e)) from e

    def build_system(self) -> SystemConfig:
        try:
            c = self.constellation if isinstance(self.constellation, MultiDimConstellation) else resolve(self.constellation)
            S = canonical_indicator() if self.indicator is None else IndicatorMatrix(np.array(self.indicator))
            system = SystemConfig.uniform(S, c)
            if self.rotations is not None:
                system = system.with_rotations([phase_rotation(*r) for r in self.rotations])
        except ScmaError as e:
            raise ConfigError(f"cannot build system: {e}") from e
        return system

    def trials_per_block(self, system: SystemConfig, plan: bicm.FramePlan | None = None) -> int:
        if self.block_size is not None:
            return self.block_size
        if plan is not None:
            return max(1, DETECT_CHUNK // plan.n_cu)
        return DETECT_CHUNK

    def to_dict(self) -> dict:
        c = self.constellation
        out = {
            "constellation": c.name if isinstance(c, MultiDimConstellation) else str(c),
            "case": self.case,
            "snr_db": list(self.snr_db),
            "mode": self.mode,
            "codec": dict(self.codec),
            "min_errors": self.min_errors,
            "max_trials": self.max_trials,
            "seed": self.seed,
            "block_size": self.block_size,
            "iterations": self.iterations,
            "n_c": self.n_c,
            "interleaver_seed": self.interleaver_seed,
        }
        if self.rotations is not None:
            out["rotations"] = [list(r) for r in self.rotations]
        if self.indicator is not None:
            out["indicator"] = [list(r) for r in self.indicator]
        return out


@dataclass(frozen=True)
class PointResult:
    """Counts at one SNR point; ``*_total`` are the rate denominators.

    Symbols are counted per user per channel use, bits are message bits and
    frames are per-user frames (a single symbol in the uncoded modes).
    """

    snr_db: float
    trials: int
    sym_err: int
    bit_err: int
    frame_err: int
    sym_total: int
    bit_total: int
    frame_total: int
    wall_time: float
    per_user_sym_err: tuple
    per_user_bit_err: tuple
    per_user_frame_err: tuple

    @property
    def ser(self) -> float:
        return self.sym_err / self.sym_total if self.sym_total else math.nan

    @property
    def ber(self) -> float:
        return self.bit_err / self.bit_total if self.bit_total else math.nan

    @property
    def fer(self) -> float:
        return self.frame_err / self.frame_total if self.frame_total else math.nan

    def interval(self, metric: str) -> tuple[float, float]:
        k, n = self._counts(metric)
        return wilson_interval(k, n)

    def half_width(self, metric: str) -> float:
        k, n = self._counts(metric)
        return wilson_half_width(k, n)

    def rate(self, metric: str) -> float:
        return getattr(self, metric)

    def _counts(self, metric):
        if metric == "ser":
            return self.sym_err, self.sym_total
        if metric == "ber":
            return self.bit_err, self.bit_total
        if metric == "fer":
            return self.frame_err, self.frame_total
        raise ConfigError(f"unknown metric {metric!r}")


@dataclass(frozen=True, eq=False)
class SweepResult:
    config: SweepConfig
    points: tuple
    label: str = ""

    @property
    def snr_db(self) -> tuple:
        return tuple(p.snr_db for p in self.points)

    def rates(self, metric: str) -> np.ndarray:
        return np.array([p.rate(metric) for p in self.points])

    def point(self, snr_db: float) -> PointResult:
        for p in self.points:
            if abs(p.snr_db - snr_db) < 1e-9:
                return p
        raise GridMismatch(f"{snr_db} dB is not on the grid {self.snr_db}")

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(",".join(CSV_COLUMNS) + "\n")
        for p in self.points:
            row = [
                repr(p.snr_db), p.trials, p.sym_err, p.bit_err, p.frame_err,
                repr(p.ser), repr(p.ber), repr(p.fer),
                repr(p.half_width("ser")), repr(p.half_width("ber")), repr(p.half_width("fer")),
            ]
            out.write(",".join(str(v) for v in row) + "\n")
        return out.getvalue()

    def to_json(self, config_document: dict | None = None) -> str:
        doc = {
            "config": config_document if config_document is not None else self.config.to_dict(),
            "points": [
                {
                    "snr_db": p.snr_db,
                    "trials": p.trials,
                    "sym_err": p.sym_err,
                    "bit_err": p.bit_err,
                    "frame_err": p.frame_err,
                    "sym_total": p.sym_total,
                    "bit_total": p.bit_total,
                    "frame_total": p.frame_total,
                    "ser": p.ser,
                    "ber": p.ber,
                    "fer": p.fer,
                    "ser_ci": p.half_width("ser"),
                    "ber_ci": p.half_width("ber"),
                    "fer_ci": p.half_width("fer"),
                    "wall_time": p.wall_time,
                    "per_user": {
                        "sym_err": list(p.per_user_sym_err),
                        "bit_err": list(p.per_user_bit_err),
                        "frame_err": list(p.per_user_frame_err),
                    },
                }
                for p in self.points
            ],
        }
        return json.dumps(doc, indent=2) + "\n"


def wilson_interval(k: int, n: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for ``k`` successes in ``n`` trials."""
    if n <= 0:
        return 0.0, 1.0
    p = k / n
    z2 = z * z
    denom = 1.0 + z2 / n
    centre = (p + z2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def wilson_half_width(k: int, n: int, z: float = Z95) -> float:
    lo, hi = wilson_interval(k, n, z)
    return (hi - lo) / 2


# per-process cache so pool workers build the system and plan once
_CONTEXT: dict = {}


def _cache_key(cfg: SweepConfig):
    c = cfg.constellation
    pts = (c.points.tobytes(), c.labels.tobytes()) if isinstance(c, MultiDimConstellation) else None
    return json.dumps(cfg.to_dict(), sort_keys=True), pts


def _context(cfg: SweepConfig):
    key = _cache_key(cfg)
    ctx = _CONTEXT.get(key)
    if ctx is None:
        system = cfg.build_system()
        codec = plan = None
        if cfg.mode == "coded-frame":
            codec = bicm.codec_from_spec(cfg.codec)
            try:
                plan = bicm.make_plan(cfg.n_c, system.bits_per_symbol, cfg.interleaver_seed)
                codec.message_length(cfg.n_c)
            except ScmaError as e:
                raise ConfigError(str(e)) from e
        ctx = (system, codec, plan)
        _CONTEXT.clear()
        _CONTEXT[key] = ctx
    return ctx


def _popcount(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.uint32)
    c = np.zeros(x.shape, dtype=np.int64)
    while x.any():
        c += x & 1
        x >>= 1
    return c


def _uncoded_block(cfg, system, snr_db, rng, n):
    K, N = system.K, system.N
    labels = rng.integers(0, system.M, size=(n, K))
    h = ch.fading(cfg.case, rng, K, N, 1, batch=(n,))[..., 0]
    y = transmit(system, labels, h)
    n0 = ch.n0_from_snr(snr_db, system.bits_per_symbol)
    y = y + ch.cn(rng, y.shape) * math.sqrt(n0)
    hard, _ = bicm.detect_chunked(y, h, system, n0, cfg.iterations, DETECT_CHUNK)
    wrong = hard != labels
    sym = wrong.sum(axis=0)
    bits = _popcount(np.bitwise_xor(hard, labels)).sum(axis=0)
    L = system.bits_per_symbol
    return sym, bits, sym, (n * K, n * K * L, n * K)


def run_block(cfg: SweepConfig, snr_idx: int, block_idx: int, n: int):
    """Per-user error counts for one block; depends only on its key and ``n``."""
    system, codec, plan = _context(cfg)
    snr_db = cfg.snr_db[snr_idx]
    rng = stream(cfg.seed, snr_idx, block_idx)
    if cfg.mode == "coded-frame":
        o = bicm.run_coded_frames(codec, plan, system, cfg.case, snr_db, rng, n, cfg.iterations)
        K = system.K
        totals = (n * K * plan.n_cu, n * K * o.message_length, n * K)
        return o.symbol_errors.sum(axis=0), o.bit_errors.sum(axis=0), o.frame_errors.sum(axis=0), totals
    return _uncoded_block(cfg, system, snr_db, rng, n)


def _event_count(cfg, acc):
    sym, bit, frame = acc
    if cfg.mode == "uncoded-symbol":
        return int(sym.sum())
    if cfg.mode == "uncoded-bit":
        return int(bit.sum())
    return int(frame.sum())


def _run_point(cfg, snr_idx, block, pool, workers) -> PointResult:
    t0 = time.perf_counter()
    system, _, _ = _context(cfg)
    K = system.K
    acc = [np.zeros(K, dtype=np.int64) for _ in range(3)]
    totals = np.zeros(3, dtype=np.int64)
    trials = 0
    b = 0
    done = False
    while not done:
        # size the next wave from the current rate estimate; only the kept
        # prefix matters, so this affects speed but never the result
        events = _event_count(cfg, acc)
        if workers == 1:
            wave = 1
        elif events == 0:
            wave = workers
        else:
            need = (cfg.min_errors - events) * trials / events
            wave = int(min(4 * workers, max(workers, math.ceil(need / block))))
        keys = []
        t = trials
        for i in range(wave):
            if t >= cfg.max_trials:
                break
            n = min(block, cfg.max_trials - t)
            keys.append((b + i, n))
            t += n
        if pool is None:
            outs = [run_block(cfg, snr_idx, bi, n) for bi, n in keys]
        else:
            futs = [pool.submit(run_block, cfg, snr_idx, bi, n) for bi, n in keys]
            outs = [f.result() for f in futs]
        for (bi, n), (sym, bit, frame, tot) in zip(keys, outs):
            acc[0] += sym
            acc[1] += bit
            acc[2] += frame
            totals += tot
            trials += n
            b = bi + 1
            if _event_count(cfg, acc) >= cfg.min_errors or trials >= cfg.max_trials:
                done = True
                break
    return PointResult(
        snr_db=cfg.snr_db[snr_idx],
        trials=trials,
        sym_err=int(acc[0].sum()),
        bit_err=int(acc[1].sum()),
        frame_err=int(acc[2].sum()),
        sym_total=int(totals[0]),
        bit_total=int(totals[1]),
        frame_total=int(totals[2]),
        wall_time=time.perf_counter() - t0,
        per_user_sym_err=tuple(int(v) for v in acc[0]),
        per_user_bit_err=tuple(int(v) for v in acc[1]),
        per_user_frame_err=tuple(int(v) for v in acc[2]),
    )


def run_sweep(cfg: SweepConfig, workers: int | None = None, progress=None, label: str = "") -> SweepResult:
    """Run every grid point of ``cfg``; ``workers`` overrides ``cfg.workers``.

    ``progress`` is called with each finished :class:`PointResult`.
    """
    workers = cfg.workers if workers is None else workers
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    system, _, plan = _context(cfg)
    block = cfg.trials_per_block(system, plan)
    points = []
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 and cfg.snr_db else None
    try:
        for i in range(len(cfg.snr_db)):
            p = _run_point(cfg, i, block, pool, workers)
            points.append(p)
            if progress is not None:
                progress(p)
    finally:
        if pool is not None:
            pool.shutdown()
    return SweepResult(cfg, tuple(points), label or system.constellations[0].name)


@dataclass(frozen=True)
class Ranked:
    label: str
    rate: float
    interval: tuple


@dataclass(frozen=True)
class Comparison:
    """Results ordered best (lowest rate) first, with pairwise significance."""

    metric: str
    snr_db: float
    ranking: tuple
    significant: dict

    def is_significant(self, a: str, b: str) -> bool:
        return self.significant[frozenset((a, b))]

    @property
    def best(self) -> str:
        return self.ranking[0].label


def compare(results, metric: str, snr_db: float) -> Comparison:
    """Order ``results`` by ``metric`` at ``snr_db``.

    Two results are significantly different when their Wilson 95% intervals
    do not overlap.
    """
    results = list(results)
    if not results:
        raise GridMismatch("nothing to compare")
    grid = results[0].snr_db
    for r in results[1:]:
        if len(r.snr_db) != len(grid) or any(abs(a - b) > 1e-9 for a, b in zip(r.snr_db, grid)):
            raise GridMismatch("results were run on different SNR grids")
    labels = [r.label or f"result{i}" for i, r in enumerate(results)]
    if len(set(labels)) != len(labels):
        labels = [f"{lab}#{i}" for i, lab in enumerate(labels)]
    ranked = []
    for lab, r in zip(labels, results):
        p = r.point(snr_db)
        ranked.append(Ranked(lab, p.rate(metric), p.interval(metric)))
    ranked.sort(key=lambda x: x.rate)
    sig = {}
    for i, a in enumerate(ranked):
        for b in ranked[i + 1:]:
            overlap = a.interval[0] <= b.interval[1] and b.interval[0] <= a.interval[1]
            sig[frozenset((a.label, b.label))] = not overlap
    return Comparison(metric, snr_db, tuple(ranked), sig)


def fit_slope(result: SweepResult, metric: str = "ser", lo: float | None = None, hi: float | None = None) -> float:
    """Least-squares slope of ``log10(rate)`` vs SNR, in dB per decade.

    Uses the grid points in ``[lo, hi]``; a diversity-``d`` curve gives about
    ``10/d``.
    """
    snr = np.array(result.snr_db)
    rates = result.rates(metric)
    keep = np.ones(len(snr), dtype=bool)
    if lo is not None:
        keep &= snr >= lo - 1e-9
    if hi is not None:
        keep &= snr <= hi + 1e-9
    keep &= rates > 0
    if keep.sum() < 2:
        raise ConfigError("need at least two points with errors to fit a slope")
    b = np.polyfit(snr[keep], np.log10(rates[keep]), 1)[0]
    return -1.0 / b


@dataclass(frozen=True)
class OracleReport:
    """Agreement of Log-MPA hard decisions with exhaustive max-log MAP.

    ``agreement`` pools all ``K * trials`` per-user decisions;
    ``per_user`` splits it by user.
    """

    trials: int
    agreement: float
    per_user: tuple


def oracle_agreement(system: SystemConfig, case, snr_db: float, trials: int, seed=0, iterations=None) -> OracleReport:
    """Run ``detect`` and ``joint_map`` on the same uncoded channel uses."""
    from .detector import detect, joint_map

    case = ch.as_case(case)
    if not case.uncoded and case is not ch.ChannelCase.AWGN:
        raise ConfigError(f"oracle check needs an uncoded case, got {case.value}")
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    K, N = system.K, system.N
    rng = stream(seed)
    labels = rng.integers(0, system.M, size=(trials, K))
    h = ch.fading(case, rng, K, N, 1, batch=(trials,))[..., 0]
    n0 = ch.n0_from_snr(snr_db, system.bits_per_symbol)
    y = transmit(system, labels, h) + ch.cn(rng, (trials, N)) * math.sqrt(n0)
    ref = joint_map(y, h, system, n0)
    mpa = detect(y, h, system, n0, iterations)
    same = mpa.hard == ref.maxlog_hard
    return OracleReport(trials, float(same.mean()), tuple(float(v) for v in same.mean(axis=0)))
