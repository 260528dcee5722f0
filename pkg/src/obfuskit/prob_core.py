"""Finite-alphabet probability arithmetic and exact information measures.

All logarithms are natural (nats).  Objects are immutable: arrays held by
the containers below are flagged read-only after validation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
from numpy.typing import ArrayLike

from .errors import (
    DimensionMismatch,
    MarginalMismatch,
    MassMismatch,
    NegativeMass,
    NotInterior,
    SupportViolation,
)

SUM_TOL = 1e-12
FILE_TOL = 1e-9
NEG_TOL = 1e-12

AXES = ("U", "S", "X")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Pmf:
    """Validated probability vector.  Build through :func:`validate_pmf`."""

    values: np.ndarray

    @property
    def alphabet_size(self) -> int:
        return self.values.shape[0]

    @property
    def interior(self) -> bool:
        return bool(np.all(self.values > 0))

    def __len__(self) -> int:
        return self.alphabet_size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


PmfLike = Union[Pmf, ArrayLike]


def validate_pmf(values: PmfLike, tol: float = FILE_TOL) -> Pmf:
    """Check a probability vector and return it as a :class:`Pmf`.

    Entries in ``[-1e-12, 0)`` are clamped to zero.  A total mass within
    ``tol`` of one is renormalised so the stored vector sums to one to
    machine precision; anything further off raises :class:`MassMismatch`.
    """
    v = np.asarray(values.values if isinstance(values, Pmf) else values, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("a pmf must be a non-empty 1-d vector")
    if not np.all(np.isfinite(v)):
        raise MassMismatch("pmf contains non-finite entries")
    if np.any(v < -NEG_TOL):
        raise NegativeMass(f"negative probability {v.min():.3g}")
    total = v.sum()
    if abs(total - 1.0) > tol:
        raise MassMismatch(f"total mass {total!r} deviates from 1 by more than {tol:g}")
    v = np.where(v < 0, 0.0, v)
    return Pmf(_frozen(v / v.sum()))


def as_pmf(p: PmfLike) -> Pmf:
    return p if isinstance(p, Pmf) else validate_pmf(p)


def _check_columns(m: np.ndarray, tol: float, what: str) -> None:
    if not np.all(np.isfinite(m)):
        raise MassMismatch(f"{what} contains non-finite entries")
    if np.any(m < -NEG_TOL):
        raise NegativeMass(f"{what} has a negative entry {m.min():.3g}")
    dev = np.abs(m.sum(axis=0) - 1.0)
    if dev.size and dev.max() > tol:
        raise MassMismatch(f"{what} column deviates from unit mass by {dev.max():.3g}")


@dataclass(frozen=True, eq=False)
class Kernel:
    """Column-stochastic matrix: ``matrix[y, x] = P(Y=y | X=x)``."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2:
            raise DimensionMismatch("kernel must be a matrix")
        _check_columns(m, SUM_TOL, "kernel")
        object.__setattr__(self, "matrix", _frozen(np.where(m < 0, 0.0, m)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def apply(self, p: PmfLike) -> np.ndarray:
        return self.matrix @ np.asarray(p, dtype=float)


@dataclass(frozen=True, eq=False)
class JointXZ:
    """Two-variable joint pmf with rows indexed by the first variable.

    The class is used for every pair (X,Z), (U,Z), (S,Z), (U,X), ...; the
    attribute names ``p_X``/``p_Z`` always mean the row and column marginals.
    """

    matrix: np.ndarray
    p_X: Pmf = field(init=False, repr=False)
    p_Z: Pmf = field(init=False, repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.size == 0:
            raise DimensionMismatch("joint must be a non-empty matrix")
        if not np.all(np.isfinite(m)):
            raise MassMismatch("joint contains non-finite entries")
        if np.any(m < -NEG_TOL):
            raise NegativeMass(f"joint has a negative entry {m.min():.3g}")
        m = np.where(m < 0, 0.0, m)
        if abs(m.sum() - 1.0) > SUM_TOL:
            raise MassMismatch(f"joint mass {m.sum()!r} is not 1")
        object.__setattr__(self, "matrix", _frozen(m))
        object.__setattr__(self, "p_X", Pmf(_frozen(m.sum(axis=1))))
        object.__setattr__(self, "p_Z", Pmf(_frozen(m.sum(axis=0))))

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def row_given_col(self) -> np.ndarray:
        """``P(row | col)``; columns with zero mass are filled with the row marginal."""
        pz = self.p_Z.values
        out = np.tile(self.p_X.values[:, None], (1, pz.size))
        nz = pz > 0
        out[:, nz] = self.matrix[:, nz] / pz[nz]
        return out

    def transpose(self) -> "JointXZ":
        return JointXZ(self.matrix.T)


@dataclass(frozen=True, eq=False)
class JointUSX:
    """Fixed joint pmf of (U, S, X) with its marginals and kernels given X."""

    tensor: np.ndarray
    p_U: Pmf = field(init=False, repr=False)
    p_S: Pmf = field(init=False, repr=False)
    p_X: Pmf = field(init=False, repr=False)
    W_U: Kernel = field(init=False, repr=False)
    W_S: Kernel = field(init=False, repr=False)

    def __post_init__(self):
        t = np.asarray(self.tensor, dtype=float)
        if t.ndim != 3 or t.size == 0:
            raise DimensionMismatch("p(U,S,X) must be a non-empty 3-d array")
        if not np.all(np.isfinite(t)):
            raise MassMismatch("joint contains non-finite entries")
        if np.any(t < -NEG_TOL):
            raise NegativeMass(f"joint has a negative entry {t.min():.3g}")
        t = np.where(t < 0, 0.0, t)
        if abs(t.sum() - 1.0) > SUM_TOL:
            raise MassMismatch(f"joint mass {t.sum()!r} is not 1")
        px = t.sum(axis=(0, 1))
        if not np.all(px > 0):
            raise NotInterior("p_X must have full support")
        put = object.__setattr__
        put(self, "tensor", _frozen(t))
        put(self, "p_U", Pmf(_frozen(t.sum(axis=(1, 2)))))
        put(self, "p_S", Pmf(_frozen(t.sum(axis=(0, 2)))))
        put(self, "p_X", Pmf(_frozen(px)))
        put(self, "W_U", Kernel(t.sum(axis=1) / px))
        put(self, "W_S", Kernel(t.sum(axis=0) / px))

    @classmethod
    def from_tensor(cls, tensor: ArrayLike, tol: float = SUM_TOL) -> "JointUSX":
        """Build from a tensor whose mass may be off by up to ``tol`` (then renormalised)."""
        t = np.asarray(tensor, dtype=float)
        if t.ndim != 3:
            raise DimensionMismatch("p(U,S,X) must be a 3-d array")
        if np.any(t < -NEG_TOL):
            raise NegativeMass(f"joint has a negative entry {t.min():.3g}")
        total = t.sum()
        if not np.isfinite(total) or abs(total - 1.0) > tol:
            raise MassMismatch(f"total mass {total!r} deviates from 1 by more than {tol:g}")
        return cls(np.where(t < 0, 0.0, t) / total)

    @property
    def sizes(self) -> tuple[int, int, int]:
        return self.tensor.shape

    def joint_ux(self) -> JointXZ:
        return JointXZ(self.tensor.sum(axis=1))

    def joint_sx(self) -> JointXZ:
        return JointXZ(self.tensor.sum(axis=0))


def marginalize(joint: JointUSX, axis: str) -> Pmf:
    """Marginal of one of ``"U"``, ``"S"``, ``"X"``."""
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}, got {axis!r}")
    keep = AXES.index(axis)
    others = tuple(i for i in range(3) if i != keep)
    return validate_pmf(joint.tensor.sum(axis=others), tol=SUM_TOL)


# phi(t) = (1+t) log(1+t) - t; alternating series coefficients for |t| < 1e-2
_PHI_SERIES = np.array([(-1.0) ** n / (n * (n - 1)) for n in range(2, 10)])


def _kl_terms(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Per-symbol ``p log(p/q) - p + q`` (each term >= 0) for ``p, q > 0``."""
    t = (p - q) / q
    out = np.empty_like(t)
    small = np.abs(t) < 1e-2
    ts = t[small]
    acc = np.zeros_like(ts)
    for c in _PHI_SERIES[::-1]:
        acc = acc * ts + c
    out[small] = q[small] * acc * ts * ts
    pl, ql = p[~small], q[~small]
    out[~small] = pl * np.log(pl / ql) - pl + ql
    return out


def kl_divergence(p: PmfLike, q: PmfLike) -> float:
    """Relative entropy D(p || q) in nats, with 0 log 0 = 0.

    Summed as ``p log(p/q) - p + q`` per symbol, every term non-negative,
    with a series expansion when ``p`` and ``q`` nearly coincide.
    """
    pv, qv = as_pmf(p).values, as_pmf(q).values
    if pv.shape != qv.shape:
        raise DimensionMismatch("pmfs live on different alphabets")
    supp = pv > 0
    if np.any(supp & (qv <= 0)):
        raise SupportViolation("p puts mass where q has none")
    return float(np.sum(_kl_terms(pv[supp], qv[supp])) + np.sum(qv[~supp]))


def chi2_divergence(p: PmfLike, r: PmfLike) -> float:
    """Sum over x of (p(x) - r(x))^2 / p(x); ``p`` must have full support."""
    pv, rv = as_pmf(p).values, as_pmf(r).values
    if pv.shape != rv.shape:
        raise DimensionMismatch("pmfs live on different alphabets")
    if not np.all(pv > 0):
        raise NotInterior("chi-squared reference pmf must be interior")
    return float(np.sum((pv - rv) ** 2 / pv))


def mutual_information(joint: JointXZ) -> float:
    """I(X;Z) = sum_z p_Z(z) D(p_{X|Z=z} || p_X), in nats."""
    pz = joint.p_Z.values
    px = joint.p_X.values
    total = 0.0
    for z in np.flatnonzero(pz > 0):
        cond = joint.matrix[:, z] / pz[z]
        total += pz[z] * kl_divergence(validate_pmf(cond), Pmf(px))
    return total


def compose_markov(
    joint_usx: JointUSX, p_Z: PmfLike, P_X_given_Z: Kernel | ArrayLike
) -> tuple[JointXZ, JointXZ, JointXZ]:
    """Joints (X,Z), (U,Z), (S,Z) induced by releasing Z through (U,S) - X - Z.

    ``P_X_given_Z`` has shape |X| x |Z| with one conditional pmf per column.
    """
    pz = as_pmf(p_Z).values
    kx = P_X_given_Z if isinstance(P_X_given_Z, Kernel) else Kernel(P_X_given_Z)
    nx = joint_usx.p_X.alphabet_size
    if kx.shape != (nx, pz.size):
        raise DimensionMismatch(f"P(X|Z) has shape {kx.shape}, expected {(nx, pz.size)}")
    mixture = kx.matrix @ pz
    dev = np.abs(mixture - joint_usx.p_X.values).max()
    if dev > FILE_TOL:
        raise MarginalMismatch(f"sum_z p_Z(z) P(X|Z=z) misses p_X by {dev:.3g}")
    p_xz = kx.matrix * pz[None, :]
    p_xz = p_xz / p_xz.sum()
    return (
        JointXZ(p_xz),
        JointXZ(joint_usx.W_U.matrix @ p_xz),
        JointXZ(joint_usx.W_S.matrix @ p_xz),
    )
