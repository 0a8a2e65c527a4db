"""Zero-flux steady states, critical mass, and condensation bookkeeping.

Integrating the zero-flux condition w f (1 + beta H^alpha f^alpha)
+ lambda (H f)' = 0 once gives the one-parameter family

    f_inf(w; C) = C H(w)^{s-1} / (1 - beta C^alpha H(w)^{s alpha})^{1/alpha},

with s = 1/(2 lambda) and amplitude 0 < C <= beta^{-1/alpha}.  At the maximal
amplitude the denominator vanishes at w = 0 like (s alpha w^2)^{1/alpha}; the
profile behaves like |w|^{-2/alpha} there, so its mass is finite exactly when
alpha > 2.  Mass beyond that critical value cannot be carried by the family
and is reported as a condensate located at w = 0 (a scalar side channel, never
a grid value).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy.integrate import quad

from .errors import (
    NoCriticalAmplitudeError,
    OutOfRegimeError,
    SupercriticalAmplitudeError,
)
from .grid import DensityState, Grid, GridFunction
from .solver import ModelParams, face_fluxes

__all__ = [
    "SteadyProfile",
    "steady_profile",
    "critical_mass",
    "solve_amplitude_for_mass",
    "residual_flux",
]


@dataclass(frozen=True)
class SteadyProfile:
    """One member of the steady family evaluated on a grid.

    ``mass`` is the midpoint-quadrature mass for regular profiles; for the
    critical member it is the refined singularity-aware value (the grid sum
    underestimates an integrable |w|^{-2/alpha} spike).
    """

    amplitude: float
    s: float
    values: GridFunction
    mass: float
    is_critical: bool

    @property
    def grid(self) -> Grid:
        return self.values.grid


def _amplitude_cap(p: ModelParams) -> float:
    if p.beta == 0.0:
        return math.inf
    return p.beta ** (-1.0 / p.alpha)


def _profile_values(c: float, p: ModelParams, w: np.ndarray, s: float) -> np.ndarray:
    """Stable pointwise evaluation of the closed form (beta > 0 branch)."""
    log_h = np.log1p(-w * w)
    numer = c * np.exp((s - 1.0) * log_h)
    if p.beta == 0.0:
        return numer
    # 1 - beta C^a H^{s a} as -expm1(log(beta C^a H^{s a})): accurate both for
    # arguments near 1 (critical center) and near 0
    log_t = math.log(p.beta) + p.alpha * math.log(c) + s * p.alpha * log_h
    denom = -np.expm1(log_t)
    if np.any(denom <= 0.0):
        raise SupercriticalAmplitudeError(
            "denominator vanished: amplitude above the critical value"
        )
    return numer * denom ** (-1.0 / p.alpha)


def steady_profile(c: float, p: ModelParams, grid: Grid) -> SteadyProfile:
    """Evaluate the steady family member with amplitude ``c`` on ``grid``.

    Requires 0 < c <= beta^{-1/alpha} when beta > 0 (any c > 0 when beta = 0).
    The nonlinear closed form needs alpha > 0; alpha = 0 with beta > 0 is
    rejected.
    """
    if c <= 0.0:
        raise ValueError(f"amplitude must be positive, got {c}")
    s = 1.0 / (2.0 * p.lam)
    if p.beta > 0.0 and p.alpha == 0.0:
        raise OutOfRegimeError(
            "closed-form steady state requires alpha > 0 when beta > 0"
        )
    cap = _amplitude_cap(p)
    if c > cap * (1.0 + 1e-12):
        raise SupercriticalAmplitudeError(
            f"amplitude {c} exceeds the critical value {cap}"
        )
    is_critical = p.beta > 0.0 and c >= cap * (1.0 - 1e-12)
    if is_critical:
        c = cap
        if grid.n_cells % 2 == 1:
            raise ValueError(
                "critical profile is singular at w = 0; use an even cell count"
            )
    vals = _profile_values(c, p, grid.centers, s)
    if is_critical and p.alpha > 2.0:
        mass = _critical_mass_refined(p)
    else:
        mass = float(np.sum(vals) * grid.h)
    return SteadyProfile(
        amplitude=c, s=s, values=GridFunction(grid, vals), mass=mass,
        is_critical=is_critical,
    )


def _critical_mass_refined(p: ModelParams, split: float = 0.5) -> float:
    """Singularity-aware integral of the critical profile over [-1, 1].

    The center is regularized by the substitution w = v^m with
    m = alpha / (alpha - 2), which turns the |w|^{-2/alpha} spike into a
    bounded integrand; the boundary factor H^{s-1} is handled with an
    algebraic quadrature weight.
    """
    a = p.alpha
    s = 1.0 / (2.0 * p.lam)
    cap = _amplitude_cap(p)
    m = a / (a - 2.0)

    def f_of_w(w: float) -> float:
        return float(_profile_values(cap, p, np.array([w]), s)[0])

    center, _ = quad(
        lambda v: m * v ** (m - 1.0) * f_of_w(v ** m),
        0.0,
        split ** (1.0 / m),
        epsabs=1e-13,
        epsrel=1e-12,
        limit=200,
    )

    def smooth_part(w: float) -> float:
        # f with the (1 - w)^{s-1} boundary factor divided out
        log_t = math.log(p.beta) + a * math.log(cap) + s * a * math.log1p(-w * w)
        denom = -math.expm1(log_t)
        return cap * (1.0 + w) ** (s - 1.0) * denom ** (-1.0 / a)

    outer, _ = quad(
        smooth_part,
        split,
        1.0,
        weight="alg",
        wvar=(0.0, s - 1.0),
        epsabs=1e-13,
        epsrel=1e-12,
        limit=200,
    )
    return 2.0 * (center + outer)


def critical_mass(p: ModelParams, grid: Grid) -> float:
    """Mass of the maximal-amplitude steady state; +inf when alpha <= 2.

    Finiteness is decided analytically from the local exponent -2/alpha, not
    by watching quadrature diverge.  Requires beta > 0.
    """
    del grid  # resolution-independent refined quadrature
    if p.beta == 0.0:
        raise NoCriticalAmplitudeError(
            "beta = 0 has no critical amplitude (linear drift)"
        )
    if p.alpha <= 0.0:
        raise OutOfRegimeError("critical mass requires alpha > 0")
    if p.alpha <= 2.0:
        return math.inf
    return _critical_mass_refined(p)


def solve_amplitude_for_mass(
    mu: float, p: ModelParams, grid: Grid
) -> Tuple[float, float]:
    """Amplitude C with quadrature mass mu, plus the condensate mass.

    Below the critical mass (or when it is infinite) the amplitude is found by
    bisection on the strictly increasing map C -> mass(C) to 1e-10 relative;
    the condensate is zero.  At or above the critical mass (alpha > 2) the
    amplitude saturates at beta^{-1/alpha} and the excess mu - mu_c is
    returned as condensate.
    """
    if mu <= 0.0:
        raise ValueError(f"target mass must be positive, got {mu}")
    s = 1.0 / (2.0 * p.lam)
    w = grid.centers
    if p.beta == 0.0:
        unit = float(np.sum(np.exp((s - 1.0) * np.log1p(-w * w))) * grid.h)
        return mu / unit, 0.0
    if p.alpha == 0.0:
        raise OutOfRegimeError("steady family requires alpha > 0 when beta > 0")
    cap = _amplitude_cap(p)
    mu_c = critical_mass(p, grid)
    if mu >= mu_c:
        return cap, mu - mu_c

    def grid_mass(c: float) -> float:
        return float(np.sum(_profile_values(c, p, w, s)) * grid.h)

    hi = cap
    hi_mass = grid_mass(hi)
    if hi_mass < mu:
        raise ValueError(
            f"grid cannot carry mass {mu} below criticality "
            f"(grid mass at the critical amplitude is {hi_mass:.6g}); refine the grid"
        )
    lo = 0.0
    c_mid = 0.5 * cap
    for _ in range(200):
        c_mid = 0.5 * (lo + hi)
        m_mid = grid_mass(c_mid)
        if abs(m_mid - mu) <= 1e-10 * mu:
            break
        if m_mid < mu:
            lo = c_mid
        else:
            hi = c_mid
    return c_mid, 0.0


def residual_flux(
    profile: SteadyProfile, p: ModelParams, skip_center: int = 0
) -> float:
    """Max interior-face flux magnitude of the solver applied to the profile.

    ``skip_center`` excludes the faces touching that many innermost cells
    (the critical profile is singular there and pollutes a fixed-grid
    residual).
    """
    state = DensityState(profile.values, time=0.0, negativity_tol=0.0)
    flux = face_fluxes(state, p)
    interior = flux[1:-1]
    if skip_center > 0:
        n = profile.grid.n_cells
        lo_cell = (n - skip_center) // 2
        hi_cell = lo_cell + skip_center - 1
        # interior face k (index k-1 here) separates cells k-1 and k
        keep = np.ones(interior.size, dtype=bool)
        for k in range(1, n):
            if lo_cell <= k - 1 <= hi_cell or lo_cell <= k <= hi_cell:
                keep[k - 1] = False
        interior = interior[keep]
    if interior.size == 0:
        return 0.0
    return float(np.max(np.abs(interior)))
