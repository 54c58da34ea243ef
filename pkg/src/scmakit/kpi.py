"""Key performance indicators of multidimensional constellations.

Distances are computed on squared magnitudes throughout so no square roots
enter the comparisons. Ties at the minimum use a relative tolerance of
``TIE_RTOL``; two complex components count as equal when they are closer
than ``COMPONENT_TOL`` (product distance and diversity) or
``PROJECTION_TOL`` (distinct projections).
"""

from __future__ import annotations

import io
from dataclasses import astuple, dataclass, fields

import numpy as np

from .constellation import MultiDimConstellation
from .errors import DegeneratePair

TIE_RTOL = 1e-9
COMPONENT_TOL = 1e-9
PROJECTION_TOL = 1e-6


@dataclass(frozen=True)
class KpiReport:
    d2_e_min: float
    tau_e: float
    d2_p_min: float
    tau_p: float
    L: int
    Nd: float
    gray: bool

    def as_tuple(self):
        return astuple(self)


def _pairs(M: int):
    return np.triu_indices(M, 1)


def _component_dist2(c: MultiDimConstellation) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-pair, per-dimension squared component distances, shape ``(P, dv)``."""
    i, j = _pairs(c.M)
    d = c.points[i] - c.points[j]
    return i, j, d.real * d.real + d.imag * d.imag


def _ties(values: np.ndarray) -> tuple[float, np.ndarray]:
    vmin = float(values.min())
    return vmin, np.flatnonzero(values <= vmin * (1.0 + TIE_RTOL))


def euclidean_min(c: MultiDimConstellation) -> tuple[float, list[tuple[int, int]]]:
    """Squared minimum Euclidean distance and every pair of point indices achieving it."""
    i, j, comp = _component_dist2(c)
    d2 = comp.sum(axis=1)
    vmin, hit = _ties(d2)
    return vmin, [(int(i[k]), int(j[k])) for k in hit]


def kissing_e(c: MultiDimConstellation) -> float:
    _, pairs = euclidean_min(c)
    return 2.0 * len(pairs) / c.M


def _product_d2(c: MultiDimConstellation):
    i, j, comp = _component_dist2(c)
    differs = comp > COMPONENT_TOL**2
    if not np.all(differs.any(axis=1)):
        k = int(np.flatnonzero(~differs.any(axis=1))[0])
        raise DegeneratePair(f"points {i[k]} and {j[k]} coincide in every dimension")
    prod = np.where(differs, comp, 1.0).prod(axis=1)
    return i, j, prod, differs


def product_min(c: MultiDimConstellation) -> tuple[float, list[tuple[int, int]]]:
    """Squared minimum product distance over the dimensions in which each pair differs."""
    i, j, prod, _ = _product_d2(c)
    vmin, hit = _ties(prod)
    return vmin, [(int(i[k]), int(j[k])) for k in hit]


def kissing_p(c: MultiDimConstellation) -> float:
    _, pairs = product_min(c)
    return 2.0 * len(pairs) / c.M


def diversity_order(c: MultiDimConstellation) -> int:
    """Minimum number of differing complex components between two points."""
    _, _, comp = _component_dist2(c)
    return int((comp > COMPONENT_TOL**2).sum(axis=1).min())


def distinct_points(c: MultiDimConstellation) -> float:
    """Distinct projected values per complex dimension, averaged over dimensions.

    A point contributes to the count of dimension ``j`` when no earlier point
    lies within ``PROJECTION_TOL`` of it in that dimension.
    """
    total = 0
    for j in range(c.dv):
        col = c.points[:, j]
        close = np.abs(col[:, None] - col[None, :]) <= PROJECTION_TOL
        earlier = np.tril(close, -1).any(axis=1)
        total += int((~earlier).sum())
    return total / c.dv


def gray_check(c: MultiDimConstellation) -> bool:
    """True when every minimum-distance pair differs in exactly one label bit."""
    _, pairs = euclidean_min(c)
    lab = c.labels
    return all(bin(int(lab[a]) ^ int(lab[b])).count("1") == 1 for a, b in pairs)


def report(c: MultiDimConstellation) -> KpiReport:
    d2e, epairs = euclidean_min(c)
    d2p, ppairs = product_min(c)
    return KpiReport(
        d2_e_min=d2e,
        tau_e=2.0 * len(epairs) / c.M,
        d2_p_min=d2p,
        tau_p=2.0 * len(ppairs) / c.M,
        L=diversity_order(c),
        Nd=distinct_points(c),
        gray=gray_check(c),
    )


TABLE_COLUMNS = ["name"] + [f.name for f in fields(KpiReport)]


def format_row(name: str, r: KpiReport) -> str:
    vals = [name]
    for f in fields(KpiReport):
        v = getattr(r, f.name)
        if isinstance(v, bool):
            vals.append("yes" if v else "no")
        elif isinstance(v, int):
            vals.append(str(v))
        else:
            vals.append(format(v, ".6g"))
    return ",".join(vals)


def table(cs) -> str:
    """CSV with a header and one row per constellation; empty input gives ``""``."""
    cs = list(cs)
    if not cs:
        return ""
    out = io.StringIO()
    out.write(",".join(TABLE_COLUMNS) + "\n")
    for c in cs:
        out.write(format_row(c.name, report(c)) + "\n")
    return out.getvalue()
