"""Multidimensional constellations: construction, normalization and file I/O.

A constellation holds ``M`` points in ``dv`` complex dimensions together with
a bit label per point. Labels are integers in ``[0, M)`` read as big-endian
``log2(M)``-bit strings, so label ``0b01`` of a 4-point constellation is the
bit string ``01``.

All generators return unit-energy constellations.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    InvariantViolation,
    NotUnitary,
    ParseError,
    UnknownName,
    UnsupportedSize,
    ZeroEnergy,
)

DISTINCT_TOL = 1e-9
ENERGY_TOL = 1e-12
UNITARY_TOL = 1e-9

DATA_DIR = Path(__file__).parent / "data"
DATA_ENV = "SCMAKIT_DATA"


@dataclass(frozen=True, eq=False)
class MultiDimConstellation:
    """``M`` labeled points in ``dv`` complex dimensions.

    ``points[m]`` is the point carrying label ``labels[m]``. Arrays are made
    read-only on construction.
    """

    name: str
    points: np.ndarray
    labels: np.ndarray
    _table: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.complex128)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise InvariantViolation("shape", f"points must be (M, dv), got {pts.shape}")
        labels = np.array(self.labels, dtype=np.int64).reshape(-1)
        M = pts.shape[0]
        if M < 1 or M & (M - 1):
            raise InvariantViolation("power_of_two", f"M={M} is not a power of two")
        if labels.shape != (M,) or not np.array_equal(np.sort(labels), np.arange(M)):
            raise InvariantViolation("label_permutation", "labels must be a permutation of 0..M-1")
        if not np.all(np.isfinite(pts.real)) or not np.all(np.isfinite(pts.imag)):
            raise InvariantViolation("finite", "non-finite coordinate")
        table = np.empty_like(pts)
        table[labels] = pts
        for arr in (pts, labels, table):
            arr.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_table", table)

    @property
    def M(self) -> int:
        return self.points.shape[0]

    @property
    def dv(self) -> int:
        return self.points.shape[1]

    @property
    def bits_per_symbol(self) -> int:
        return self.M.bit_length() - 1

    @property
    def table(self) -> np.ndarray:
        """Points indexed by label: ``table[label]`` is a length-``dv`` vector."""
        return self._table

    def label_bits(self) -> np.ndarray:
        """``(M, L_M)`` 0/1 array; row ``l`` holds the bits of label ``l``, MSB first."""
        L = self.bits_per_symbol
        shifts = np.arange(L - 1, -1, -1)
        return (np.arange(self.M)[:, None] >> shifts) & 1

    def point_of(self, label: int) -> np.ndarray:
        return self._table[label]

    def label_of(self, point, tol: float = DISTINCT_TOL) -> int:
        d = np.abs(self.points - np.asarray(point, dtype=np.complex128)).max(axis=1)
        m = int(np.argmin(d))
        if d[m] > tol:
            raise KeyError("point is not in the constellation")
        return int(self.labels[m])

    def scaled(self, factor: float) -> MultiDimConstellation:
        return MultiDimConstellation(self.name, self.points * factor, self.labels)

    def renamed(self, name: str) -> MultiDimConstellation:
        return MultiDimConstellation(name, self.points, self.labels)

    def __repr__(self):
        return f"MultiDimConstellation(name={self.name!r}, M={self.M}, dv={self.dv})"


def average_energy(c: MultiDimConstellation) -> float:
    """Mean squared norm of the points, summed over all complex dimensions."""
    p = c.points
    return float(np.mean(np.sum(p.real**2 + p.imag**2, axis=1)))


def normalize_energy(c: MultiDimConstellation) -> MultiDimConstellation:
    es = average_energy(c)
    if es == 0.0:
        raise ZeroEnergy(f"constellation {c.name!r} has zero average energy")
    return c.scaled(1.0 / math.sqrt(es))


def validate(c: MultiDimConstellation, *, require_unit_energy: bool = True) -> None:
    """Check the invariants that construction alone does not enforce."""
    p = c.points
    if c.M > 1:
        d = p[:, None, :] - p[None, :, :]
        dist2 = np.sum(d.real**2 + d.imag**2, axis=2)
        iu = np.triu_indices(c.M, 1)
        if np.min(dist2[iu]) <= DISTINCT_TOL**2:
            raise InvariantViolation("distinct_points", "two points coincide")
    if require_unit_energy and abs(average_energy(c) - 1.0) > ENERGY_TOL:
        raise InvariantViolation("unit_energy", f"average energy {average_energy(c)!r} != 1")


# --------------------------------------------------------------------------
# generators
# --------------------------------------------------------------------------


def _gray_pam(bits: int) -> np.ndarray:
    """Gray-labeled PAM levels indexed by label, bit 0 mapping to the positive side."""
    n = 1 << bits
    levels = np.arange(n - 1, -n, -2, dtype=float)  # +max ... -max
    gray = np.arange(n) ^ (np.arange(n) >> 1)
    out = np.empty(n)
    out[gray] = levels
    return out


def _gray_qam(M: int) -> np.ndarray:
    """Unnormalized Gray square M-QAM indexed by label (first half of bits on I)."""
    L = M.bit_length() - 1
    if M < 4 or M & (M - 1) or L % 2:
        raise UnsupportedSize(f"square QAM needs M = 4^k, got M={M}")
    h = L // 2
    pam = _gray_pam(h)
    lab = np.arange(M)
    return pam[lab >> h] + 1j * pam[lab & ((1 << h) - 1)]


def generate_lds(M: int, dv: int) -> MultiDimConstellation:
    """Gray M-QAM repeated identically on each of ``dv`` dimensions (M-LDS)."""
    if dv < 1:
        raise UnsupportedSize("dv must be >= 1")
    qam = _gray_qam(M)
    pts = np.repeat(qam[:, None], dv, axis=1)
    return normalize_energy(MultiDimConstellation(f"{M}-LDS", pts, np.arange(M)))


def generate_hypercube(M: int, dv: int) -> MultiDimConstellation:
    """Independent Gray QPSK per dimension; label bits 2j, 2j+1 drive dimension j.

    With ``M=16, dv=2`` this is the 16-corner four-dimensional hypercube
    (16HQAM).
    """
    if dv < 1 or M != 4**dv:
        raise UnsupportedSize(f"hypercube needs M = 4^dv, got M={M}, dv={dv}")
    qpsk = _gray_qam(4)
    lab = np.arange(M)
    pts = np.empty((M, dv), dtype=np.complex128)
    for j in range(dv):
        shift = 2 * (dv - 1 - j)
        pts[:, j] = qpsk[(lab >> shift) & 3]
    name = "16HQAM" if (M, dv) == (16, 2) else f"{M}HQAM{dv}"
    return normalize_energy(MultiDimConstellation(name, pts, lab))


def _t4qam() -> MultiDimConstellation:
    s = 1 / math.sqrt(10)
    pts = np.array([[3, 1], [1, -3], [-1, 3], [-3, -1]], dtype=float) * s
    return MultiDimConstellation("T4QAM", pts.astype(np.complex128), [0b00, 0b10, 0b01, 0b11])


def _4lqam() -> MultiDimConstellation:
    a = math.sqrt(2) / 2
    lab = np.arange(4)
    b1 = lab >> 1
    b2 = lab & 1
    pts = np.stack([np.where(b1, a, -a) + 0j, 1j * np.where(b2, a, -a)], axis=1)
    return MultiDimConstellation("4LQAM", pts, lab)


def _4cqam() -> MultiDimConstellation:
    pts = np.array([[1, 0], [0, 1j], [0, -1j], [-1, 0]], dtype=np.complex128)
    return MultiDimConstellation("4CQAM", pts, [0b00, 0b01, 0b10, 0b11])


_BUILTINS = {
    "T4QAM": _t4qam,
    "4LQAM": _4lqam,
    "4CQAM": _4cqam,
    "4-LDS": lambda: generate_lds(4, 2),
    "16-LDS": lambda: generate_lds(16, 2),
    "16HQAM": lambda: generate_hypercube(16, 2),
}

BUILTIN_NAMES = tuple(_BUILTINS)


def builtin(name: str) -> MultiDimConstellation:
    """Return one of the fully specified catalog constellations by name."""
    try:
        c = _BUILTINS[name]()
    except KeyError:
        raise UnknownName(f"unknown builtin constellation {name!r}; known: {', '.join(_BUILTINS)}") from None
    validate(c)
    return c


# --------------------------------------------------------------------------
# rotations
# --------------------------------------------------------------------------


def apply_rotation(c: MultiDimConstellation, rot) -> MultiDimConstellation:
    """Apply a unitary ``dv x dv`` matrix (or ``dv`` unit phases) to every point."""
    r = np.asarray(rot, dtype=np.complex128)
    if r.ndim == 1:
        if r.shape != (c.dv,):
            raise NotUnitary(f"expected {c.dv} phases, got {r.shape}")
        r = np.diag(r)
    if r.shape != (c.dv, c.dv):
        raise NotUnitary(f"rotation must be {c.dv}x{c.dv}, got {r.shape}")
    if np.max(np.abs(r.conj().T @ r - np.eye(c.dv))) > UNITARY_TOL:
        raise NotUnitary("rotation matrix is not unitary")
    return MultiDimConstellation(c.name, c.points @ r.T, c.labels)


def phase_rotation(*angles: float) -> np.ndarray:
    """Unit phases ``exp(i*angle)`` for use with :func:`apply_rotation`."""
    return np.exp(1j * np.asarray(angles, dtype=float))


# --------------------------------------------------------------------------
# file format
# --------------------------------------------------------------------------


def _reject_constant(token):
    raise ParseError(f"non-finite number {token!r} in constellation file")


def from_dict(doc: dict) -> MultiDimConstellation:
    try:
        name = str(doc["name"])
        M = int(doc["M"])
        dv = int(doc["dv"])
        labels = [int(v) for v in doc["labels"]]
        raw = doc["points"]
        normalized = bool(doc.get("normalized", False))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed constellation document: {exc}") from exc
    if len(raw) != M or len(labels) != M:
        raise InvariantViolation("point_count", f"expected {M} points and labels")
    pts = np.empty((M, dv), dtype=np.complex128)
    try:
        for m, point in enumerate(raw):
            if len(point) != dv:
                raise InvariantViolation("dimension", f"point {m} has {len(point)} components, expected {dv}")
            for j, comp in enumerate(point):
                re, im = comp
                pts[m, j] = complex(float(re), float(im))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvariantViolation):
            raise
        raise ParseError(f"bad coordinate: {exc}") from exc
    if any(not 0 <= v < M for v in labels):
        raise InvariantViolation("label_range", "labels must lie in [0, M)")
    c = MultiDimConstellation(name, pts, labels)
    if not normalized:
        c = normalize_energy(c)
    validate(c)
    return c


def to_dict(c: MultiDimConstellation) -> dict:
    return {
        "name": c.name,
        "M": c.M,
        "dv": c.dv,
        "labels": [int(v) for v in c.labels],
        "points": [[[z.real, z.imag] for z in row] for row in c.points],
        "normalized": abs(average_energy(c) - 1.0) <= ENERGY_TOL,
    }


def dumps(c: MultiDimConstellation) -> str:
    """Serialize with every coordinate written to 17 significant digits."""
    doc = to_dict(c)

    def num(x: float) -> str:
        return format(float(x) + 0.0, ".17g")  # + 0.0 turns -0 into 0

    rows = [
        "    [" + ", ".join(f"[{num(re)}, {num(im)}]" for re, im in point) + "]"
        for point in doc["points"]
    ]
    return (
        "{\n"
        f'  "name": {json.dumps(doc["name"])},\n'
        f'  "M": {doc["M"]},\n'
        f'  "dv": {doc["dv"]},\n'
        f'  "labels": {json.dumps(doc["labels"])},\n'
        '  "points": [\n' + ",\n".join(rows) + "\n  ],\n"
        f'  "normalized": {json.dumps(doc["normalized"])}\n'
        "}\n"
    )


def loads(text: str) -> MultiDimConstellation:
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("constellation document must be a JSON object")
    return from_dict(doc)


def save(c: MultiDimConstellation, path) -> None:
    Path(path).write_text(dumps(c), encoding="utf-8")


def load(path) -> MultiDimConstellation:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return loads(text)


def data_dirs() -> list[Path]:
    """Directories searched for constellation files, in priority order."""
    dirs = []
    env = os.environ.get(DATA_ENV)
    if env:
        dirs.extend(Path(p) for p in env.split(os.pathsep) if p)
    dirs.append(DATA_DIR)
    return dirs


def find_data_file(filename: str) -> Path | None:
    for d in data_dirs():
        p = d / filename
        if p.is_file():
            return p
    return None


def resolve(spec: str) -> MultiDimConstellation:
    """Builtin name, path to a JSON file, or file name inside a data directory."""
    if spec in _BUILTINS:
        return builtin(spec)
    p = Path(spec)
    if p.suffix == ".json" and not p.is_file() and p.parent == Path("."):
        found = find_data_file(p.name)
        if found is not None:
            p = found
    if p.is_file() or p.suffix == ".json":
        return load(p)
    raise UnknownName(f"{spec!r} is neither a builtin constellation nor a file")
