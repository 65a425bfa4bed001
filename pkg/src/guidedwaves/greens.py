"""Cone-supported Green functions for the 3+1 wave operator.

The free-space retarded/advanced kernels are the distributions

    G_ret/adv(t, r; t0, r0) = delta(t - t0 -/+ |r - r0|) / (4 pi |r - r0|),

supported on the backward/forward light cone.  Their combinations are the
half-difference (time-antisymmetric, a homogeneous solution) and the
half-sum.  For fields sourced along a worldline the delta collapses the
integral onto the cone crossings; what this module computes is those
crossings and the associated weight 1 / (4 pi rho) with

    rho(tau*) = |(x - z(tau*)) . zdot(tau*)|,

which reduces to the ordinary distance |r - r0| for a source at rest.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._kernels import cone_batch
from .errors import NearSingularityError, WorldlineTooShortError
from .spacetime import Worldline

__all__ = [
    "GreenKind",
    "LightconeSolution",
    "lightcone_intersect",
    "lightcone_intersect_batch",
    "green_weight",
    "EPS_RHO_DEFAULT",
]

EPS_RHO_DEFAULT = 1e-6


class GreenKind(Enum):
    """Which combination of the cone kernels a field evaluation uses."""

    RETARDED = "retarded"
    ADVANCED = "advanced"
    ANTISYMMETRIC = "antisymmetric"  # (retarded - advanced) / 2
    SYMMETRIC = "symmetric"          # (retarded + advanced) / 2

    @property
    def branches(self):
        if self is GreenKind.RETARDED:
            return (GreenKind.RETARDED,)
        if self is GreenKind.ADVANCED:
            return (GreenKind.ADVANCED,)
        return (GreenKind.RETARDED, GreenKind.ADVANCED)


_BRANCH_SIGN = {GreenKind.RETARDED: 1.0, GreenKind.ADVANCED: -1.0}


@dataclass(frozen=True)
class LightconeSolution:
    """Worldline crossing of a field point's light cone."""

    branch: GreenKind
    lam_star: float
    tau_star: float
    z_star: np.ndarray
    zdot_star: np.ndarray
    rho: float


def lightcone_intersect_batch(worldline: Worldline, xs, branch: GreenKind):
    """Cone crossings for many field points at once.

    ``branch`` must be RETARDED or ADVANCED.  Returns a dict with arrays
    ``lam_star``, ``tau_star``, ``rho`` and integer ``status`` (0 found,
    1 root precedes the sampled range, 2 root follows it).  Out-of-range
    points carry NaN instead of raising; callers decide whether that is a
    mask or an error.
    """
    if branch not in _BRANCH_SIGN:
        raise ValueError("branch must be RETARDED or ADVANCED")
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    lam, coefs, tau_knots = worldline.packed()
    lam_star, tau_star, rho, status = cone_batch(
        lam, coefs, tau_knots, xs, _BRANCH_SIGN[branch]
    )
    return {
        "lam_star": lam_star,
        "tau_star": tau_star,
        "rho": rho,
        "status": status,
    }


def lightcone_intersect(worldline: Worldline, x, branch: GreenKind) -> LightconeSolution:
    """Unique cone crossing for a single field point.

    Raises :class:`WorldlineTooShortError` when the root lies outside the
    sampled parameter range; the exception records the sign of the cone
    condition at both ends so the caller can tell which end to extend.
    """
    x = np.asarray(x, dtype=float).reshape(4)
    res = lightcone_intersect_batch(worldline, x[None, :], branch)
    status = int(res["status"][0])
    if status != 0:
        side = "before the first sample" if status == 1 else "after the last sample"
        raise WorldlineTooShortError(
            f"{branch.value} cone crossing falls {side}; extend the worldline",
            f_lo=(1 if status == 2 else -1),
            f_hi=(1 if status == 2 else -1),
        )
    lam_star = float(res["lam_star"][0])
    z_star = worldline.position(lam_star)
    d = worldline._dspline(lam_star)
    speed = np.sqrt(d[0] ** 2 - np.sum(d[1:] ** 2))
    return LightconeSolution(
        branch=branch,
        lam_star=lam_star,
        tau_star=float(res["tau_star"][0]),
        z_star=z_star,
        zdot_star=d / speed,
        rho=float(res["rho"][0]),
    )


def green_weight(sol: LightconeSolution, eps_rho: float = EPS_RHO_DEFAULT) -> float:
    """Cone-crossing weight 1 / (4 pi rho).

    Raises :class:`NearSingularityError` for rho < eps_rho: direct
    evaluation has lost its significant digits there and the caller should
    switch to the near-trajectory expansion.
    """
    if sol.rho < eps_rho:
        raise NearSingularityError(
            f"rho = {sol.rho:.3e} < {eps_rho:.3e}; use the near-trajectory "
            "expansion instead of the direct cone weight",
            rho=sol.rho,
            eps=eps_rho,
        )
    return 1.0 / (4.0 * np.pi * sol.rho)
