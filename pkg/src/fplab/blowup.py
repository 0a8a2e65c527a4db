"""Closed-form finite-time blow-up apparatus for the supercritical regime.

For alpha > 2 the second moment E(t) = int w^2 f dw obeys a differential
inequality whose right side at t = 0,

    Phi(E0) = 2 lambda mu - (2 beta / s_a^{3a/2}) (mu - E0)^{3a/2} / E0^{(a-2)/2},

is negative for small initial energy; a mirrored indicator Psi(mu) is negative
for large initial mass.  Either sign condition forces E to hit zero by a
closed-form time, incompatible with bounded L2 norm, i.e. the density
concentrates at w = 0.  This module evaluates those closed forms, locates the
critical energy and mass thresholds, and classifies the parameter regimes.

Two exponent conventions coexist in the source displays (3a/2 versus 3/(2a));
each function follows the convention of its own defining display, without
cross-harmonization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import OutOfRegimeError
from .grid import DensityState, Grid, project_density
from .solver import ModelParams

__all__ = [
    "BlowupConstants",
    "RegimeLabel",
    "constants",
    "energy_rate_indicator",
    "critical_energy",
    "temperature_rate_indicator",
    "mass_threshold",
    "lambda_coefficient",
    "blowup_time_bound",
    "classify",
    "bump_density",
    "REGIME_L2_BOUNDED",
    "REGIME_L2_MASS_CONDITIONAL",
    "REGIME_SUPERCRITICAL",
]

REGIME_L2_BOUNDED = "L2_BOUNDED"
REGIME_L2_MASS_CONDITIONAL = "L2_MASS_CONDITIONAL"
REGIME_SUPERCRITICAL = "SUPERCRITICAL"


@dataclass(frozen=True)
class BlowupConstants:
    """Constants of the supercritical energy inequality for a given alpha > 2.

    c_alpha = (2a/(a-2))^{a/(a+1)}, d_alpha = [2(a+1)/(c_alpha (a-2))]^{1/3},
    s_alpha = c_alpha d_alpha + d_alpha^{-2}, gamma = (a-2)/(2a^2) in (0, 1/16].
    """

    alpha: float
    c_alpha: float
    d_alpha: float
    s_alpha: float
    gamma: float


def constants(alpha: float) -> BlowupConstants:
    """Evaluate the closed-form constants; requires alpha > 2."""
    if alpha <= 2.0:
        raise OutOfRegimeError(f"constants require alpha > 2, got {alpha}")
    c = (2.0 * alpha / (alpha - 2.0)) ** (alpha / (alpha + 1.0))
    d = (2.0 * (alpha + 1.0) / (c * (alpha - 2.0))) ** (1.0 / 3.0)
    s = c * d + d ** -2.0
    gamma = (alpha - 2.0) / (2.0 * alpha * alpha)
    return BlowupConstants(alpha=alpha, c_alpha=c, d_alpha=d, s_alpha=s, gamma=gamma)


def _sink_coefficient(p: ModelParams) -> float:
    """2 beta / s_alpha^{3 alpha / 2}."""
    k = constants(p.alpha)
    return 2.0 * p.beta / k.s_alpha ** (1.5 * p.alpha)


def energy_rate_indicator(e0: float, mu: float, p: ModelParams) -> float:
    """Upper bound on dE/dt at t = 0 for initial energy ``e0`` and mass ``mu``.

    Negative values certify finite-time collapse of the second moment.
    Requires alpha > 2 and 0 < e0 < mu.
    """
    if p.alpha <= 2.0:
        raise OutOfRegimeError(f"requires alpha > 2, got {p.alpha}")
    if not (0.0 < e0 < mu):
        raise ValueError(f"initial energy must lie in (0, mu), got {e0}")
    a = p.alpha
    with np.errstate(over="ignore", divide="ignore"):
        sink = float(
            _sink_coefficient(p)
            * np.float64(mu - e0) ** (1.5 * a)
            / np.float64(e0) ** (0.5 * (a - 2.0))
        )
    return 2.0 * p.lam * mu - sink


def critical_energy(mu: float, p: ModelParams, tol: float = 1e-12) -> float:
    """Unique root of the energy-rate indicator on (0, mu), by bisection.

    The indicator is strictly increasing in e0 (its subtracted term has a
    decreasing numerator and an e0^{-(a-2)/2} factor), so the root separates
    the blow-up region e0 < E_c from the inconclusive one.
    """
    if p.alpha <= 2.0:
        raise OutOfRegimeError(f"requires alpha > 2, got {p.alpha}")
    if p.beta <= 0.0 or mu <= 0.0:
        raise ValueError("requires beta > 0 and mu > 0")
    hi = mu * (1.0 - 1e-14)
    if energy_rate_indicator(hi, mu, p) <= 0.0:
        return hi
    lo = mu * 1e-8
    while energy_rate_indicator(lo, mu, p) > 0.0:
        lo *= 1e-2
        if lo < mu * 1e-290:
            raise ValueError("no sign change found: indicator never negative")
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if energy_rate_indicator(mid, mu, p) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def temperature_rate_indicator(mu: float, e0: float, p: ModelParams) -> float:
    """Upper bound on the temperature rate; negative for large initial mass.

    Requires alpha > 2 and e0 in (0, 1).
    """
    if p.alpha <= 2.0:
        raise OutOfRegimeError(f"requires alpha > 2, got {p.alpha}")
    if not (0.0 < e0 < 1.0):
        raise ValueError(f"initial energy must lie in (0, 1), got {e0}")
    if mu <= 0.0:
        raise ValueError(f"mass must be positive, got {mu}")
    a = p.alpha
    with np.errstate(over="ignore", divide="ignore"):
        sink = float(
            _sink_coefficient(p)
            * np.float64(mu) ** (a + 1.0)
            * np.float64(1.0 - e0) ** (1.5 * a)
            / np.float64(e0) ** (0.5 * (a - 2.0))
        )
    return 2.0 * p.lam - sink


def mass_threshold(e0: float, p: ModelParams) -> float:
    """Mass above which the temperature-rate indicator turns negative.

    This is the exact root of :func:`temperature_rate_indicator` in mu.
    """
    if p.alpha <= 2.0:
        raise OutOfRegimeError(f"requires alpha > 2, got {p.alpha}")
    if not (0.0 < e0 < 1.0):
        raise ValueError(f"initial energy must lie in (0, 1), got {e0}")
    if p.beta <= 0.0:
        raise ValueError("requires beta > 0")
    a = p.alpha
    k = constants(a)
    val = (
        p.lam
        * k.s_alpha ** (1.5 * a)
        * e0 ** (0.5 * (a - 2.0))
        / (p.beta * (1.0 - e0) ** (1.5 * a))
    )
    return val ** (1.0 / (a + 1.0))


def lambda_coefficient(e0: float, mu: float, p: ModelParams) -> float:
    """Coefficient Lambda = 2 beta (mu - e0)^{3/(2a)} / s_alpha^{3/(2a)}.

    Note the 3/(2a) convention of the integrated energy inequality, distinct
    from the 3a/2 powers of the rate indicators.
    """
    if p.alpha <= 2.0:
        raise OutOfRegimeError(f"requires alpha > 2, got {p.alpha}")
    if not (0.0 <= e0 < mu):
        raise ValueError(f"initial energy must lie in [0, mu), got {e0}")
    a = p.alpha
    k = constants(a)
    return 2.0 * p.beta * (mu - e0) ** (1.5 / a) / k.s_alpha ** (1.5 / a)


def blowup_time_bound(e0: float, mu: float, p: ModelParams) -> Optional[float]:
    """Closed-form time by which the second moment reaches zero.

    t_bar = e0^{gamma+1} / ((gamma+1)(Lambda - 2 lambda mu e0^gamma)), defined
    when e0 < (Lambda / (2 lambda mu))^{1/gamma}.  Returns +inf exactly at the
    admissibility boundary and None when the bound is unavailable.
    """
    if p.alpha <= 2.0:
        raise OutOfRegimeError(f"requires alpha > 2, got {p.alpha}")
    if not (0.0 < e0 < mu):
        raise ValueError(f"initial energy must lie in (0, mu), got {e0}")
    k = constants(p.alpha)
    lam_big = lambda_coefficient(e0, mu, p)
    denom = (k.gamma + 1.0) * (lam_big - 2.0 * p.lam * mu * e0 ** k.gamma)
    if denom < 0.0:
        return None
    if denom == 0.0:
        return math.inf
    return e0 ** (k.gamma + 1.0) / denom


@dataclass(frozen=True)
class RegimeLabel:
    """Regularity classification of a parameter point.

    ``kind`` is one of L2_BOUNDED (alpha < 2), L2_MASS_CONDITIONAL (alpha = 2)
    or SUPERCRITICAL (alpha > 2); only the fields of the active branch are
    populated.
    """

    kind: str
    # alpha < 2: data-independent part of the L2 a-priori bound
    l2_bound_tail: Optional[float] = None
    # alpha = 2: mass condition
    mass_limit: Optional[float] = None
    mass_condition_met: Optional[bool] = None
    # alpha > 2
    phi_sign: Optional[int] = None
    psi_sign: Optional[int] = None
    e_critical: Optional[float] = None
    mass_threshold: Optional[float] = None
    t_bar: Optional[float] = None
    p_star: Optional[float] = None
    q_max: Optional[float] = None
    q2_admissible: Optional[bool] = None


def classify(p: ModelParams, mu: float, e0: float) -> RegimeLabel:
    """Assign the regularity regime and populate its closed-form quantities."""
    from . import diagnostics  # local import to avoid a cycle

    if mu <= 0.0:
        raise ValueError(f"mass must be positive, got {mu}")
    if p.alpha < 2.0:
        if p.alpha > 0.0:
            tail = diagnostics.l2_apriori_bound(p, 0.0, mu)
        else:
            tail = None
        return RegimeLabel(kind=REGIME_L2_BOUNDED, l2_bound_tail=tail)
    if p.alpha == 2.0:
        rec = diagnostics.l2_apriori_bound(p, 0.0, mu)
        return RegimeLabel(
            kind=REGIME_L2_MASS_CONDITIONAL,
            mass_limit=rec.threshold,
            mass_condition_met=rec.satisfied,
        )
    phi = energy_rate_indicator(e0, mu, p) if 0.0 < e0 < mu else None
    psi = (
        temperature_rate_indicator(mu, e0, p) if 0.0 < e0 < 1.0 else None
    )
    e_c = critical_energy(mu, p) if p.beta > 0.0 else None
    mu_star = mass_threshold(e0, p) if (p.beta > 0.0 and 0.0 < e0 < 1.0) else None
    t_bar = (
        blowup_time_bound(e0, mu, p) if (p.beta > 0.0 and 0.0 < e0 < mu) else None
    )
    a = p.alpha
    return RegimeLabel(
        kind=REGIME_SUPERCRITICAL,
        phi_sign=None if phi is None else (1 if phi > 0 else (-1 if phi < 0 else 0)),
        psi_sign=None if psi is None else (1 if psi > 0 else (-1 if psi < 0 else 0)),
        e_critical=e_c,
        mass_threshold=mu_star,
        t_bar=t_bar,
        p_star=(a - 2.0) / (a + 1.0),
        q_max=min(2.0, a - 1.0),
        q2_admissible=a >= 3.0,
    )


def bump_density(grid: Grid, mass: float, energy: float) -> DensityState:
    """Compactly supported bump f0 ~ (1 - (w/delta)^2)_+^2 with given moments.

    The quartic bump has E/mu = delta^2 / 7 exactly, so delta = sqrt(7 E/mu);
    it must fit inside the domain (E <= mu/7) and be resolvable (delta >= 4h).
    Values are rescaled so the quadrature mass matches ``mass`` exactly.
    """
    if mass <= 0.0 or energy <= 0.0:
        raise ValueError("mass and energy must be positive")
    delta = math.sqrt(7.0 * energy / mass)
    if delta > 1.0:
        raise ValueError(
            f"target energy {energy} needs support width {delta:.3f} > 1"
        )
    if delta < 4.0 * grid.h:
        raise ValueError(
            f"bump width {delta:.3e} under-resolved on h = {grid.h:.3e}"
        )
    amp = mass * 15.0 / (16.0 * delta)

    def datum(w: np.ndarray) -> np.ndarray:
        u = np.clip(w / delta, -1.0, 1.0)
        return amp * (1.0 - u * u) ** 2

    return project_density(datum, grid, target_mass=mass)
