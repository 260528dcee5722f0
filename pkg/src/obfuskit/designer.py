"""Feasibility of perfect obfuscation and synthesis of release mechanisms.

A release Z of X leaks nothing about S while telling something about U
exactly when some perturbation direction of ``p_X`` lies in the null space
of ``B_{S,X}`` without lying in the null space of ``B_{U,X}``.  The best
such directions are the top right singular vectors of ``B_{U,X}``
restricted to ``Null(B_{S,X})``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence, Union

import numpy as np

from .dtm import DivergenceTransferMatrix, build_channel_dtm, pushforward_direction
from .errors import (
    CardinalityBoundExceeded,
    EpsilonTooLarge,
    InfeasibleInstance,
    MarginalMismatch,
    RequestedTooManyDirections,
)
from .local_geometry import PerturbationDirection, PerturbedFamily, max_feasible_epsilon, perturb
from .prob_core import FILE_TOL, JointUSX, Kernel, Pmf, PmfLike, as_pmf, validate_pmf

DEFAULT_TOL = 1e-9
AUTO_FACTOR = 0.9


def default_tolerance() -> float:
    """Null-space tolerance, overridable through ``OBFUSKIT_TOL``."""
    env = os.environ.get("OBFUSKIT_TOL")
    return float(env) if env else DEFAULT_TOL


class InfoTriple(NamedTuple):
    I_XZ: float
    I_UZ: float
    I_SZ: float


@dataclass(frozen=True, eq=False)
class FeasibilityReport:
    feasible: bool
    null_dim: int
    utility_sigmas: np.ndarray
    tolerance_used: float
    rank_SX: int
    null_basis: np.ndarray = field(repr=False)

    @property
    def top_gain(self) -> float:
        return float(self.utility_sigmas[0] ** 2) if self.utility_sigmas.size else 0.0


def utility_dtm(joint: JointUSX) -> DivergenceTransferMatrix:
    return build_channel_dtm(joint.W_U, joint.p_X, joint.p_U)


def sensitive_dtm(joint: JointUSX) -> DivergenceTransferMatrix:
    return build_channel_dtm(joint.W_S, joint.p_X, joint.p_S)


def _null_basis(B: np.ndarray, tol: float) -> tuple[np.ndarray, int]:
    _, s, Vt = np.linalg.svd(B, full_matrices=True)
    rank = int(np.sum(s > tol * s[0])) if s.size else 0
    return Vt[rank:].T, rank


def feasibility(joint: JointUSX, tol: float | None = None) -> FeasibilityReport:
    """Decide whether non-trivial perfect obfuscation is possible.

    Builds an orthonormal basis ``N`` of ``Null(B_{S,X})`` (singular values
    at most ``tol * sigma_1`` count as zero) and reports the singular values
    of ``B_{U,X} N``.  Feasible iff the null space is non-trivial and the
    largest of those exceeds ``tol``.
    """
    tol = default_tolerance() if tol is None else float(tol)
    N, rank = _null_basis(sensitive_dtm(joint).B, tol)
    d = N.shape[1]
    if d:
        sig = np.linalg.svd(utility_dtm(joint).B @ N, compute_uv=False)
    else:
        sig = np.zeros(0)
    feasible = bool(sig.size and sig[0] > tol)
    return FeasibilityReport(feasible, d, sig, tol, rank, N)


def optimal_directions(
    joint: JointUSX, m: int = 1, tol: float | None = None
) -> list[tuple[PerturbationDirection, float]]:
    """Top ``m`` perturbation directions inside ``Null(B_{S,X})`` with their gains.

    The gain of a direction ``k`` is ``|B_{U,X} k|^2``.  Directions follow
    the sign convention of :func:`obfuskit.dtm.svd_modes` (first
    non-negligible entry positive).
    """
    rep = feasibility(joint, tol)
    if not rep.feasible:
        raise InfeasibleInstance("no direction keeps p_S fixed while moving p_U")
    if m < 1 or m > rep.null_dim:
        raise RequestedTooManyDirections(
            f"requested {m} directions but the sensitive null space has dimension {rep.null_dim}"
        )
    N = rep.null_basis
    _, s, Vt = np.linalg.svd(utility_dtm(joint).B @ N, full_matrices=True)
    gains = np.zeros(N.shape[1])
    gains[: s.size] = s**2
    out = []
    for i in range(m):
        k = N @ Vt[i]
        nz = np.flatnonzero(np.abs(k) > 1e-12)
        if nz.size and k[nz[0]] < 0:
            k = -k
        out.append((PerturbationDirection(k / np.linalg.norm(k), joint.p_X), float(gains[i])))
    return out


@dataclass(frozen=True, eq=False)
class ObfuscationMechanism:
    """A designed release channel.

    Release symbols come in pairs: ``z = 2i`` uses ``+k_i`` and ``z = 2i+1``
    uses ``-k_i``; ``directions`` holds one entry per release symbol.
    """

    p_Z: Pmf
    P_X_given_Z: Kernel
    P_Z_given_X: Kernel
    epsilon: float
    directions: tuple[PerturbationDirection, ...]
    predicted: InfoTriple
    gains: tuple[float, ...] = ()
    tolerance: float = DEFAULT_TOL
    notes: tuple[str, ...] = ()

    @property
    def n_release(self) -> int:
        return self.p_Z.alphabet_size

    def family(self) -> PerturbedFamily:
        return PerturbedFamily(self.directions[0].reference, self.epsilon, self.p_Z, self.directions)


def bayes_invert(p_Z: PmfLike, P_X_given_Z: Kernel | np.ndarray, p_X: PmfLike) -> Kernel:
    """Release map ``P(z|x) = P(x|z) p_Z(z) / p_X(x)``.

    The denominator is the mixture ``sum_z P(x|z) p_Z(z)``, which must match
    ``p_X`` to 1e-9; using the mixture keeps every column exactly stochastic.
    """
    pz = as_pmf(p_Z).values
    K = P_X_given_Z.matrix if isinstance(P_X_given_Z, Kernel) else Kernel(P_X_given_Z).matrix
    px = as_pmf(p_X).values
    mix = K @ pz
    dev = float(np.abs(mix - px).max())
    if dev > FILE_TOL:
        raise MarginalMismatch(f"sum_z p_Z(z) P(X|Z=z) misses p_X by {dev:.3g}")
    return Kernel((K * pz[None, :]).T / mix[None, :])


def local_predictions(joint: JointUSX, p_Z: PmfLike, directions: Sequence[PerturbationDirection], epsilon: float) -> InfoTriple:
    """Second-order information estimates ``eps^2/2 sum_z p_Z(z) |B k_z|^2``."""
    pz = as_pmf(p_Z).values
    bu, bs = utility_dtm(joint), sensitive_dtm(joint)
    nx = nu = ns = 0.0
    for w, d in zip(pz, directions):
        nx += w * float(d.k @ d.k)
        ku, ks = pushforward_direction(bu, d), pushforward_direction(bs, d)
        nu += w * float(ku @ ku)
        ns += w * float(ks @ ks)
    h = 0.5 * epsilon**2
    return InfoTriple(h * nx, h * nu, h * ns)


def _closed_form_predictions(epsilon: float, gains: Sequence[float]) -> InfoTriple:
    # unit directions and B_{S,X} k = 0 make the local values exact functions of the gains
    h = 0.5 * float(epsilon) ** 2
    return InfoTriple(h, h * float(np.mean(gains)), 0.0)


def feasible_bound(p_X: PmfLike, directions: Sequence[PerturbationDirection]) -> float:
    return min(max_feasible_epsilon(p_X, d) for d in directions)


def mechanism_from_directions(
    joint: JointUSX,
    chosen: Sequence[tuple[PerturbationDirection, float]],
    epsilon: float,
    tol: float = DEFAULT_TOL,
    notes: Sequence[str] = (),
) -> ObfuscationMechanism:
    """Pair every chosen direction with its negation under a uniform ``p_Z``."""
    nx = joint.p_X.alphabet_size
    if 2 * len(chosen) > nx + 2:
        raise CardinalityBoundExceeded(f"|Z| = {2 * len(chosen)} exceeds |X| + 2 = {nx + 2}")
    dirs: list[PerturbationDirection] = []
    for d, _ in chosen:
        dirs += [d, -d]
    bound = feasible_bound(joint.p_X, dirs)
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    if epsilon > bound * (1 + 1e-12):
        raise EpsilonTooLarge(f"epsilon={epsilon!r} exceeds the feasible bound {bound!r}")
    pz = validate_pmf(np.full(len(dirs), 1.0 / len(dirs)))
    cond = np.column_stack([perturb(joint.p_X, d, epsilon).values for d in dirs])
    kxz = Kernel(cond)
    return ObfuscationMechanism(
        p_Z=pz,
        P_X_given_Z=kxz,
        P_Z_given_X=bayes_invert(pz, kxz, joint.p_X),
        epsilon=float(epsilon),
        directions=tuple(dirs),
        predicted=_closed_form_predictions(epsilon, [g for _, g in chosen]),
        gains=tuple(g for _, g in chosen),
        tolerance=tol,
        notes=tuple(notes),
    )


Epsilon = Union[float, str]


def design_mechanism(
    joint: JointUSX,
    epsilon: Epsilon = "auto",
    m: int = 1,
    rate_R: float | None = None,
    tol: float | None = None,
    auto_factor: float = AUTO_FACTOR,
) -> ObfuscationMechanism:
    """Design a perfectly obfuscating release of X with maximal local utility.

    Parameters
    ----------
    joint
        The fixed distribution of (U, S, X).
    epsilon
        Perturbation magnitude, or ``"auto"`` for ``auto_factor`` times the
        largest value keeping every conditional a valid pmf.
    m
        Number of modes; the release alphabet has ``2 m`` symbols and must
        respect ``|Z| <= |X| + 2``.
    rate_R
        Optional budget on I(X;Z) in nats.  Locally I(X;Z) = eps^2 / 2, so
        ``epsilon`` is shrunk to ``sqrt(2 R)`` when it would exceed it.
    tol
        Null-space tolerance (see :func:`feasibility`).
    """
    tol = default_tolerance() if tol is None else float(tol)
    nx = joint.p_X.alphabet_size
    if m < 1:
        raise RequestedTooManyDirections("at least one mode is required")
    if 2 * m > nx + 2:
        raise CardinalityBoundExceeded(f"|Z| = {2 * m} exceeds |X| + 2 = {nx + 2}")
    chosen = optimal_directions(joint, m, tol)
    dirs = [d for d, _ in chosen] + [-d for d, _ in chosen]
    bound = feasible_bound(joint.p_X, dirs)
    notes = []
    if isinstance(epsilon, str):
        if epsilon != "auto":
            raise ValueError(f"epsilon must be a number or 'auto', got {epsilon!r}")
        eps = auto_factor * bound
        notes.append(f"epsilon=auto ({auto_factor:g} x feasible bound {bound:.12g})")
    else:
        eps = float(epsilon)
    if rate_R is not None:
        if rate_R < 0:
            raise ValueError("rate must be non-negative")
        # local rate: sum_z p_Z |k_z|^2 = 1 must stay below 2R / eps^2
        if 0.5 * eps**2 > rate_R:
            eps = float(np.sqrt(2.0 * rate_R))
            notes.append(f"epsilon reduced to sqrt(2R) = {eps:.12g} by the rate budget")
        if eps == 0.0:
            notes.append("zero rate: release is constant (independent of X)")
    return mechanism_from_directions(joint, chosen, eps, tol, notes)
