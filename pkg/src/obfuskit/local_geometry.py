"""Spherical perturbations of a reference pmf.

A perturbed pmf is written ``p + eps * k * sqrt(p)`` with ``k`` orthogonal
to ``sqrt(p)``, so its local KL divergence from ``p`` is ``eps**2 |k|**2 / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike

from .errors import DimensionMismatch, EpsilonTooLarge, NotInterior, ZeroDirection
from .prob_core import JointXZ, Pmf, PmfLike, as_pmf, validate_pmf

C1_TOL = 1e-10
NORM_TOL = 1e-10
C2_TOL = 1e-10


def _require_interior(p: Pmf) -> None:
    if not p.interior:
        raise NotInterior("reference pmf must have full support")


@dataclass(frozen=True, eq=False)
class PerturbationDirection:
    """Unit-norm direction ``k`` satisfying ``k . sqrt(p) = 0``."""

    k: np.ndarray
    reference: Pmf

    def __post_init__(self):
        k = np.array(self.k, dtype=float)
        ref = as_pmf(self.reference)
        _require_interior(ref)
        if k.shape != ref.values.shape:
            raise DimensionMismatch(f"direction has shape {k.shape}, reference {ref.values.shape}")
        c1 = abs(float(k @ np.sqrt(ref.values)))
        if c1 > C1_TOL:
            raise ValueError(f"direction violates k . sqrt(p) = 0 (residual {c1:.3g})")
        norm = float(np.linalg.norm(k))
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"direction must have unit norm, got {norm!r}")
        k.setflags(write=False)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "reference", ref)

    def __neg__(self) -> "PerturbationDirection":
        return PerturbationDirection(-self.k, self.reference)

    def __array__(self, dtype=None, copy=None):
        return self.k if dtype is None else self.k.astype(dtype)


DirectionLike = Union[PerturbationDirection, ArrayLike]


def _direction_vector(k: DirectionLike) -> np.ndarray:
    return np.asarray(k.k if isinstance(k, PerturbationDirection) else k, dtype=float)


def spherical_vector(p: PmfLike, r: PmfLike) -> np.ndarray:
    """Unnormalised spherical perturbation ``(r - p) / sqrt(p)`` of ``r`` from ``p``."""
    p, r = as_pmf(p), as_pmf(r)
    _require_interior(p)
    if p.alphabet_size != r.alphabet_size:
        raise DimensionMismatch("pmfs live on different alphabets")
    return (r.values - p.values) / np.sqrt(p.values)


def direction_from_target(p: PmfLike, r: PmfLike) -> PerturbationDirection:
    p = as_pmf(p)
    raw = spherical_vector(p, r)
    if np.max(np.abs(raw * np.sqrt(p.values))) <= 1e-14:
        raise ZeroDirection("target coincides with the reference pmf")
    return PerturbationDirection(raw / np.linalg.norm(raw), p)


def max_feasible_epsilon(p: PmfLike, k: DirectionLike) -> float:
    """Largest ``eps`` keeping every entry of ``p + eps * k * sqrt(p)`` non-negative.

    Equals ``min sqrt(p(x)) / |k(x)|`` over the negative entries of ``k``;
    ``inf`` when ``k`` has none (only the zero vector, given C1).
    """
    pv = as_pmf(p).values
    kv = _direction_vector(k)
    neg = kv < 0
    if not np.any(neg):
        return float("inf")
    return float(np.min(np.sqrt(pv[neg]) / -kv[neg]))


def perturb(p: PmfLike, k: DirectionLike, epsilon: float) -> Pmf:
    """Realise ``p + epsilon * k * sqrt(p)`` as a validated pmf.

    ``k`` may be a :class:`PerturbationDirection` or a raw vector (e.g. the
    unnormalised output of :func:`spherical_vector`).
    """
    p = as_pmf(p)
    _require_interior(p)
    kv = _direction_vector(k)
    if kv.shape != p.values.shape:
        raise DimensionMismatch("direction and reference differ in length")
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    bound = max_feasible_epsilon(p, kv)
    if epsilon > bound * (1 + 1e-12):
        raise EpsilonTooLarge(f"epsilon={epsilon!r} exceeds the feasible bound {bound!r}")
    r = p.values + epsilon * kv * np.sqrt(p.values)
    return validate_pmf(np.where(r < 0, 0.0, r))


def local_kl(k: DirectionLike, epsilon: float) -> float:
    kv = _direction_vector(k)
    return 0.5 * epsilon**2 * float(kv @ kv)


class C2Check(NamedTuple):
    ok: bool
    violation: float


@dataclass(frozen=True, eq=False)
class PerturbedFamily:
    """Conditionals ``p_{X|Z=z} = p_X + eps * k_z * sqrt(p_X)`` with weights ``p_Z``.

    Construction checks that every conditional is a valid pmf.  The marginal
    constraint (C2) is *not* enforced here; see :func:`check_c2`.
    """

    reference: Pmf
    epsilon: float
    weights: Pmf
    directions: tuple[PerturbationDirection, ...]
    _cond: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        ref = as_pmf(self.reference)
        _require_interior(ref)
        w = as_pmf(self.weights)
        dirs = tuple(self.directions)
        if len(dirs) != w.alphabet_size:
            raise DimensionMismatch("one direction per release symbol is required")
        cols = [perturb(ref, d, self.epsilon).values for d in dirs]
        cond = np.column_stack(cols)
        cond.setflags(write=False)
        put = object.__setattr__
        put(self, "reference", ref)
        put(self, "weights", w)
        put(self, "directions", dirs)
        put(self, "_cond", cond)

    @classmethod
    def from_entries(
        cls,
        reference: PmfLike,
        epsilon: float,
        entries: Sequence[tuple[float, PerturbationDirection]],
    ) -> "PerturbedFamily":
        w = validate_pmf([wt for wt, _ in entries])
        return cls(as_pmf(reference), epsilon, w, tuple(d for _, d in entries))

    @property
    def conditionals(self) -> np.ndarray:
        """|X| x |Z| matrix whose columns are ``p_{X|Z=z}``."""
        return self._cond

    def joint(self) -> JointXZ:
        m = self._cond * self.weights.values[None, :]
        return JointXZ(m / m.sum())


def check_c2(family: PerturbedFamily) -> C2Check:
    """Check that the weighted directions cancel entrywise (marginal of X preserved)."""
    K = np.column_stack([d.k for d in family.directions])
    resid = (K @ family.weights.values) * np.sqrt(family.reference.values)
    v = float(np.max(np.abs(resid)))
    return C2Check(v <= C2_TOL, v)
