"""Plain-text instance and mechanism files, and CSV number formatting.

Instance file::

    # comments start with '#'
    sizes 2 2 4          # |U| |S| |X|
    0 0 0 0.25           # u s x p(u,s,x); omitted triples have probability 0

Mechanism file::

    kind mechanism
    version 0.1.0
    epsilon 0.9
    tolerance 1e-09
    sizes 4 2            # |X| |Z|
    gain 0 1.0
    predicted 0.405 0.405 0.0
    direction 0 0.5 -0.5 0.5 -0.5
    note free text
    0 0.5                # z p_Z(z)
    0 1 0.25             # z x P(X=x | Z=z)

Floats in mechanism files are written with ``repr`` so they round-trip
exactly.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable

import numpy as np

from . import __version__
from .designer import InfoTriple, ObfuscationMechanism, bayes_invert
from .errors import DimensionMismatch, MassMismatch, NegativeMass, ParseError
from .local_geometry import PerturbationDirection
from .prob_core import FILE_TOL, JointUSX, Kernel, Pmf, validate_pmf


def fmt(v: float) -> str:
    """Fixed 12-significant-digit rendering used by every report and CSV."""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    s = f"{v:.12g}"
    return "0" if s == "-0" else s


def csv_line(values: Iterable) -> str:
    return ",".join(v if isinstance(v, str) else fmt(v) for v in values) + "\n"


def _lines(text: str):
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield no, line.split()


def _float(tok: str, no: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"line {no}: {tok!r} is not a number") from None
    if not math.isfinite(v):
        raise ParseError(f"line {no}: non-finite value {tok!r}")
    return v


def _int(tok: str, no: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"line {no}: {tok!r} is not an integer") from None


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None


def parse_instance(text: str) -> tuple[JointUSX, list[str]]:
    """Parse instance text; returns the joint and a list of notices."""
    sizes = None
    rows: dict[tuple[int, int, int], float] = {}
    for no, tok in _lines(text):
        if tok[0] == "sizes":
            if sizes is not None or len(tok) != 4:
                raise ParseError(f"line {no}: expected a single 'sizes <U> <S> <X>' line")
            sizes = tuple(_int(t, no) for t in tok[1:])
            if min(sizes) < 1:
                raise ParseError(f"line {no}: alphabet sizes must be positive")
            continue
        if sizes is None:
            raise ParseError(f"line {no}: 'sizes' must precede the probability rows")
        if len(tok) != 4:
            raise ParseError(f"line {no}: expected 'u s x p', got {len(tok)} fields")
        key = tuple(_int(t, no) for t in tok[:3])
        if any(not 0 <= k < n for k, n in zip(key, sizes)):
            raise ParseError(f"line {no}: index {key} outside alphabet sizes {sizes}")
        if key in rows:
            raise ParseError(f"line {no}: duplicate triple {key}")
        rows[key] = _float(tok[3], no)
    if sizes is None:
        raise ParseError("missing 'sizes' line")
    t = np.zeros(sizes)
    for key, p in rows.items():
        t[key] = p
    if np.any(t < 0):
        raise NegativeMass(f"negative probability {t.min():g}")
    total = t.sum()
    if abs(total - 1.0) > FILE_TOL:
        raise MassMismatch(f"total mass {total!r} deviates from 1 by more than {FILE_TOL:g}")
    notes = []
    if total != 1.0:
        notes.append(f"renormalised input mass {fmt(total)} to 1")
    return JointUSX.from_tensor(t, tol=FILE_TOL), notes


def read_instance(path) -> tuple[JointUSX, list[str]]:
    return parse_instance(_read(path))


def format_instance(joint: JointUSX) -> str:
    nu, ns, nx = joint.sizes
    out = [f"sizes {nu} {ns} {nx}\n"]
    for (u, s, x), p in np.ndenumerate(joint.tensor):
        if p > 0:
            out.append(f"{u} {s} {x} {float(p)!r}\n")
    return "".join(out)


def is_mechanism_text(text: str) -> bool:
    return any(tok[:2] == ["kind", "mechanism"] for _, tok in _lines(text))


def format_mechanism(mech: ObfuscationMechanism) -> str:
    nx, nz = mech.P_X_given_Z.shape
    out = [
        "# obfuskit release mechanism\n",
        "kind mechanism\n",
        f"version {__version__}\n",
        f"epsilon {mech.epsilon!r}\n",
        f"tolerance {mech.tolerance!r}\n",
        f"sizes {nx} {nz}\n",
    ]
    out += [f"gain {i} {float(g)!r}\n" for i, g in enumerate(mech.gains)]
    out.append("predicted " + " ".join(repr(float(v)) for v in mech.predicted) + "\n")
    for z, d in enumerate(mech.directions):
        out.append(f"direction {z} " + " ".join(repr(float(v)) for v in d.k) + "\n")
    out += [f"note {n}\n" for n in mech.notes]
    out.append("# z p_Z(z)\n")
    out += [f"{z} {float(p)!r}\n" for z, p in enumerate(mech.p_Z.values)]
    out.append("# z x P(X=x|Z=z)\n")
    for z in range(nz):
        for x in range(nx):
            out.append(f"{z} {x} {float(mech.P_X_given_Z.matrix[x, z])!r}\n")
    return "".join(out)


def write_mechanism(mech: ObfuscationMechanism, path) -> None:
    Path(path).write_text(format_mechanism(mech))


def parse_mechanism(text: str) -> ObfuscationMechanism:
    meta: dict[str, float] = {}
    sizes = None
    gains: dict[int, float] = {}
    dirs: dict[int, list[float]] = {}
    predicted = None
    notes = []
    pz_rows: dict[int, float] = {}
    k_rows: dict[tuple[int, int], float] = {}
    for no, tok in _lines(text):
        head = tok[0]
        if head == "kind" or head == "version":
            continue
        if head == "note":
            notes.append(" ".join(tok[1:]))
        elif head in ("epsilon", "tolerance"):
            if len(tok) != 2:
                raise ParseError(f"line {no}: expected '{head} <value>'")
            meta[head] = _float(tok[1], no)
        elif head == "sizes":
            if len(tok) != 3:
                raise ParseError(f"line {no}: expected 'sizes <X> <Z>'")
            sizes = (_int(tok[1], no), _int(tok[2], no))
        elif head == "gain":
            gains[_int(tok[1], no)] = _float(tok[2], no)
        elif head == "predicted":
            if len(tok) != 4:
                raise ParseError(f"line {no}: expected three predicted values")
            predicted = InfoTriple(*(_float(t, no) for t in tok[1:]))
        elif head == "direction":
            dirs[_int(tok[1], no)] = [_float(t, no) for t in tok[2:]]
        elif len(tok) == 2:
            z = _int(tok[0], no)
            if z in pz_rows:
                raise ParseError(f"line {no}: duplicate p_Z row for z={z}")
            pz_rows[z] = _float(tok[1], no)
        elif len(tok) == 3:
            key = (_int(tok[0], no), _int(tok[1], no))
            if key in k_rows:
                raise ParseError(f"line {no}: duplicate kernel row {key}")
            k_rows[key] = _float(tok[2], no)
        else:
            raise ParseError(f"line {no}: unrecognised row {' '.join(tok)!r}")
    if sizes is None or "epsilon" not in meta:
        raise ParseError("mechanism file needs 'sizes' and 'epsilon' lines")
    nx, nz = sizes
    if sorted(pz_rows) != list(range(nz)):
        raise ParseError("p_Z rows must cover z = 0..|Z|-1 exactly once")
    K = np.zeros((nx, nz))
    for (z, x), p in k_rows.items():
        if not (0 <= z < nz and 0 <= x < nx):
            raise ParseError(f"kernel row {(z, x)} outside sizes {sizes}")
        K[x, z] = p
    pz = validate_pmf([pz_rows[z] for z in range(nz)])
    kernel = Kernel(K)
    p_x = validate_pmf(K @ pz.values)
    if dirs and sorted(dirs) != list(range(nz)):
        raise ParseError("directions must be given for every release symbol")
    try:
        directions = tuple(PerturbationDirection(np.array(dirs[z]), p_x) for z in sorted(dirs))
    except (ValueError, DimensionMismatch) as exc:
        raise ParseError(f"invalid direction: {exc}") from None
    return ObfuscationMechanism(
        p_Z=pz,
        P_X_given_Z=kernel,
        P_Z_given_X=bayes_invert(pz, kernel, p_x),
        epsilon=meta["epsilon"],
        directions=directions,
        predicted=predicted if predicted is not None else InfoTriple(math.nan, math.nan, math.nan),
        gains=tuple(gains[i] for i in sorted(gains)),
        tolerance=meta.get("tolerance", math.nan),
        notes=tuple(notes),
    )


def read_mechanism(path) -> ObfuscationMechanism:
    return parse_mechanism(_read(path))


def mechanism_reference(mech: ObfuscationMechanism) -> Pmf:
    """Marginal of X implied by a mechanism, ``sum_z p_Z(z) P(X|Z=z)``."""
    return validate_pmf(mech.P_X_given_Z.matrix @ mech.p_Z.values)
