"""Log-domain message passing detection (Log-MPA) and an exhaustive oracle.

Everything here is vectorized over a leading batch axis of independent
received vectors, so one call can detect thousands of channel uses.

Symbols are indexed by label throughout: index ``m`` of a message or a
marginal refers to the point carrying bit label ``m``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .constellation import MultiDimConstellation
from .errors import InvalidConfig, NonFinite, TooLarge
from .kpi import PROJECTION_TOL
from .scma import MappingMatrix, SystemConfig

MESSAGE_FLOOR = -700.0
LLR_CLIP = 50.0
JOINT_MAP_LIMIT = 2**20


def default_iterations(M: int) -> int:
    return 3 if M <= 4 else 5


@dataclass(frozen=True, eq=False)
class DetectionResult:
    """Per-user outputs; leading axes follow the batch shape of the input.

    ``log_marginals`` is ``(..., K, M)`` with the maximum of each row at 0.
    ``llr`` is ``(..., K, L_M)``, MSB first, positive meaning bit 0 is more
    likely, clipped to ``+-LLR_CLIP``.
    """

    log_marginals: np.ndarray
    hard: np.ndarray
    llr: np.ndarray


@dataclass(frozen=True, eq=False)
class Projection:
    """Distinct values one user places on one RE.

    ``values[index[label]]`` is the component transmitted on RE ``re`` for
    that label.
    """

    re: int
    values: np.ndarray
    index: np.ndarray

    @property
    def size(self) -> int:
        return len(self.values)


def collapse_projections(c: MultiDimConstellation, F: MappingMatrix) -> list[Projection]:
    """One :class:`Projection` per occupied RE, in dimension order."""
    if F.dv != c.dv:
        raise InvalidConfig(f"mapping has dv={F.dv}, constellation has dv={c.dv}")
    out = []
    for j, n in enumerate(F.res):
        col = c.table[:, j]
        values: list[complex] = []
        index = np.empty(c.M, dtype=np.intp)
        for m, z in enumerate(col):
            for v, u in enumerate(values):
                if abs(z - u) <= PROJECTION_TOL:
                    index[m] = v
                    break
            else:
                index[m] = len(values)
                values.append(z)
        out.append(Projection(int(n), np.array(values, dtype=np.complex128), index))
    return out


@dataclass(frozen=True, eq=False)
class _Graph:
    """Edge bookkeeping for one system.

    For RE ``n``, ``users[n]`` lists the connected users; ``values[n][p]`` and
    ``index[n][p]`` give the per-RE alphabet of the ``p``-th of them (index is
    ``None`` when uncollapsed). ``edges[k]`` lists ``(n, p)`` for user ``k``.
    """

    users: tuple
    values: tuple
    index: tuple
    edges: tuple


@lru_cache(maxsize=64)
def _graph(system: SystemConfig, collapse: bool) -> _Graph:
    S = system.indicator
    users, values, index = [], [], []
    edges = [[] for _ in range(system.K)]
    proj = None
    if collapse:
        proj = [collapse_projections(c, F) for c, F in zip(system.constellations, system.mappings)]
    for n in range(system.N):
        us = S.users_of(n)
        vals, idx = [], []
        for p, k in enumerate(us):
            edges[k].append((n, p))
            if collapse:
                pr = next(q for q in proj[k] if q.re == n)
                vals.append(pr.values)
                idx.append(pr.index)
            else:
                vals.append(system.codebooks[k, :, n])
                idx.append(None)
        users.append(tuple(int(k) for k in us))
        values.append(tuple(vals))
        index.append(tuple(idx))
    return _Graph(tuple(users), tuple(values), tuple(index), tuple(tuple(e) for e in edges))


def _lse(a: np.ndarray, axis) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis)


def _reduce(a, axis, exact):
    return _lse(a, axis) if exact else np.max(a, axis=axis)


def _group(msg: np.ndarray, index: np.ndarray, size: int, exact: bool) -> np.ndarray:
    """Fold a ``(T, M)`` symbol message onto ``size`` distinct values."""
    mask = index[None, :] == np.arange(size)[:, None]  # (size, M)
    g = np.where(mask[None], msg[:, None, :], -np.inf)
    if exact:
        with np.errstate(divide="ignore"):
            return _lse(g, -1)
    return g.max(axis=-1)


def _normalize(msg: np.ndarray, floor) -> np.ndarray:
    out = msg - msg.max(axis=-1, keepdims=True)
    if floor is not None:
        np.maximum(out, floor, out=out)
    return out


def _prepare(y, h, system):
    y = np.asarray(y, dtype=np.complex128)
    h = np.asarray(h, dtype=np.complex128)
    K, N = system.K, system.N
    if y.shape[-1] != N or h.shape[-2:] != (K, N):
        raise InvalidConfig(f"expected y (..., {N}) and h (..., {K}, {N}); got {y.shape}, {h.shape}")
    batch = np.broadcast_shapes(y.shape[:-1], h.shape[:-2])
    y = np.broadcast_to(y, batch + (N,)).reshape(-1, N)
    h = np.broadcast_to(h, batch + (K, N)).reshape(-1, K, N)
    if not (np.isfinite(y).all() and np.isfinite(h).all()):
        raise NonFinite("received vector or channel contains non-finite values")
    return y, h, batch


def re_metrics(y: np.ndarray, h: np.ndarray, system: SystemConfig, n0: float, collapse: bool = False):
    """Per-RE log-likelihood tensors ``-|y_n - sum_p h v_p|^2 / n0``.

    Entry ``n`` has shape ``(T, A_1, ..., A_dc)`` where ``A_p`` is the
    alphabet size of the ``p``-th user on that RE.
    """
    g = _graph(system, collapse)
    T = y.shape[0]
    out = []
    for n, (us, vals) in enumerate(zip(g.users, g.values)):
        dc = len(us)
        res = y[:, n].reshape((T,) + (1,) * dc)
        for p, (k, v) in enumerate(zip(us, vals)):
            shape = [T] + [1] * dc
            shape[1 + p] = len(v)
            res = res - (h[:, k, n][:, None] * v[None, :]).reshape(shape)
        out.append(-(res.real * res.real + res.imag * res.imag) / n0)
    return out


def detect(
    y,
    h,
    system: SystemConfig,
    n0: float,
    iterations: int | None = None,
    *,
    exact: bool = False,
    collapse: bool = False,
    floor: float | None = MESSAGE_FLOOR,
) -> DetectionResult:
    """Flooding Log-MPA on the factor graph of ``system``.

    ``y`` is ``(..., N)`` and ``h`` is ``(..., K, N)`` with broadcastable
    batch shapes. Messages start uniform; each iteration updates every
    function node and then every variable node. With ``exact`` the max
    operations become log-sum-exp. With ``collapse`` each RE works on the
    distinct projected values of each user instead of all ``M`` labels, which
    for max-log leaves the marginals unchanged bit for bit.
    """
    if iterations is None:
        iterations = default_iterations(system.M)
    if iterations < 1:
        raise InvalidConfig("iterations must be >= 1")
    if not n0 > 0:
        raise InvalidConfig(f"n0 must be positive, got {n0}")
    y, h, batch = _prepare(y, h, system)
    T, K, M, N = y.shape[0], system.K, system.M, system.N
    g = _graph(system, collapse)
    metrics = re_metrics(y, h, system, n0, collapse)

    vf = [[np.zeros((T, M)) for _ in us] for us in g.users]
    fv = [[None for _ in us] for us in g.users]
    for _ in range(iterations):
        for n, us in enumerate(g.users):
            idx = g.index[n]
            sizes = [len(v) for v in g.values[n]]
            ins = [vf[n][q] if idx[q] is None else _group(vf[n][q], idx[q], sizes[q], exact) for q in range(len(us))]
            for p in range(len(us)):
                tot = metrics[n]
                for q in range(len(us)):
                    if q == p:
                        continue
                    shape = [T] + [1] * len(us)
                    shape[1 + q] = sizes[q]
                    tot = tot + ins[q].reshape(shape)
                axes = tuple(1 + q for q in range(len(us)) if q != p)
                out = _reduce(tot, axes, exact) if axes else tot
                if idx[p] is not None:
                    out = out[:, idx[p]]
                fv[n][p] = _normalize(out, floor)
        for k in range(K):
            edges = g.edges[k]
            for i, (n, p) in enumerate(edges):
                acc = np.zeros((T, M))
                for i2, (n2, p2) in enumerate(edges):
                    if i2 != i:
                        acc = acc + fv[n2][p2]
                vf[n][p] = _normalize(acc, floor)

    marg = np.empty((T, K, M))
    for k in range(K):
        acc = np.zeros((T, M))
        for n, p in g.edges[k]:
            acc = acc + fv[n][p]
        marg[:, k] = acc
    marg -= marg.max(axis=-1, keepdims=True)
    if not np.isfinite(marg).all():
        raise NonFinite("message passing produced non-finite marginals")
    return _result(marg, system, batch, exact)


def bit_llrs(log_marginals: np.ndarray, bits: np.ndarray, exact: bool = False) -> np.ndarray:
    """Bit LLRs from label-indexed symbol log-marginals, clipped to ``+-LLR_CLIP``."""
    L = bits.shape[1]
    out = np.empty(log_marginals.shape[:-1] + (L,))
    for b in range(L):
        zero = bits[:, b] == 0
        out[..., b] = _reduce(log_marginals[..., zero], -1, exact) - _reduce(log_marginals[..., ~zero], -1, exact)
    return np.clip(out, -LLR_CLIP, LLR_CLIP)


def _result(marg, system, batch, exact) -> DetectionResult:
    K, M = system.K, system.M
    bits = system.constellations[0].label_bits()
    llr = bit_llrs(marg, bits, exact)
    marg = marg.reshape(batch + (K, M))
    hard = np.argmax(marg, axis=-1)
    return DetectionResult(marg, hard, llr.reshape(batch + (K, bits.shape[1])))


@dataclass(frozen=True, eq=False)
class JointMapResult:
    """Exact and max-log per-user marginals from full enumeration (max 0 per row)."""

    log_marginals: np.ndarray
    maxlog_marginals: np.ndarray
    hard: np.ndarray
    maxlog_hard: np.ndarray
    n_hypotheses: int


def joint_map(y, h, system: SystemConfig, n0: float, chunk: int = 64) -> JointMapResult:
    """Enumerate all ``M**K`` label tuples and marginalize per user."""
    K, M, N = system.K, system.M, system.N
    H = M**K
    if H > JOINT_MAP_LIMIT:
        raise TooLarge(f"M^K = {M}^{K} exceeds the enumeration limit {JOINT_MAP_LIMIT}")
    if not n0 > 0:
        raise InvalidConfig(f"n0 must be positive, got {n0}")
    y, h, batch = _prepare(y, h, system)
    T = y.shape[0]
    tuples = np.indices((M,) * K).reshape(K, -1)  # (K, H), user 0 is the slowest axis
    V = system.codebooks
    exact = np.empty((T, K, M))
    maxlog = np.empty((T, K, M))
    for s in range(0, T, chunk):
        yc, hc = y[s : s + chunk], h[s : s + chunk]
        c = hc[:, :, None, :] * V[None]  # (t, K, M, N)
        hyp = np.zeros((yc.shape[0], H, N), dtype=np.complex128)
        for k in range(K):
            hyp += c[:, k, tuples[k], :]
        r = yc[:, None, :] - hyp
        ll = -(r.real * r.real + r.imag * r.imag).sum(axis=-1) / n0
        ll = ll.reshape((yc.shape[0],) + (M,) * K)
        for k in range(K):
            axes = tuple(1 + q for q in range(K) if q != k)
            if axes:
                exact[s : s + chunk, k] = _lse(ll, axes)
                maxlog[s : s + chunk, k] = ll.max(axis=axes)
            else:
                exact[s : s + chunk, k] = ll
                maxlog[s : s + chunk, k] = ll
    exact -= exact.max(axis=-1, keepdims=True)
    maxlog -= maxlog.max(axis=-1, keepdims=True)
    exact = exact.reshape(batch + (K, M))
    maxlog = maxlog.reshape(batch + (K, M))
    return JointMapResult(exact, maxlog, exact.argmax(-1), maxlog.argmax(-1), H)
