"""Moments, norms, and a-priori bound monitors evaluated on density states.

Everything here is a pure quadrature of the current state; nothing mutates the
solver.  The L2 evolution machinery lives in the scaled time tau = lambda t
(where its constants are defined); the second-moment machinery is in physical
time.  A violation of a theorem-backed bound (e.g. the second-moment lower
bound) on a discrete run is not clamped or hidden: it is the numerical
signature of concentration and is surfaced to the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Tuple, Union

import numpy as np

from .blowup import constants as blowup_constants
from .errors import OutOfRegimeError
from .grid import DensityState, Grid, WeightSpec, diffusion_coefficient, quadrature
from .report import InequalityReport
from .solver import ModelParams

__all__ = [
    "MomentReport",
    "MassCondition",
    "moments",
    "energy_rhs",
    "second_moment_lower_bound",
    "l1_from_l2_and_energy_check",
    "dissipation_bound_check",
    "dirichlet_form",
    "l2_drift_constant",
    "l2_evolution_bound",
    "l2_apriori_bound",
    "weighted_drift_signs",
    "BBOUND_COEFFICIENT",
    "L1_INTERPOLATION_COEFFICIENT",
]

# (1/5)^5 (2 sqrt 2)^4 and 5 (2 sqrt 2)^{-4/5}
BBOUND_COEFFICIENT = 0.02048
L1_INTERPOLATION_COEFFICIENT = 5.0 * (2.0 * math.sqrt(2.0)) ** (-0.8)


@dataclass(frozen=True)
class MomentReport:
    """Snapshot of mass, mean, energy, temperature and norms at one time."""

    time: float
    mass: float
    mean: float
    energy: float
    temperature: float
    l2_sq: float
    weighted_norms: Dict[Tuple[float, float], float]


def weighted_norm_pairs(p: Optional[ModelParams]) -> Tuple[Tuple[float, float], ...]:
    """Default (p, q) exponent pairs: always (0, 2); plus (p*, 2) for alpha > 2."""
    pairs = [(0.0, 2.0)]
    if p is not None and p.alpha > 2.0:
        pairs.append(((p.alpha - 2.0) / (p.alpha + 1.0), 2.0))
    return tuple(pairs)


def moments(
    state: DensityState,
    params: Optional[ModelParams] = None,
    extra_pairs: Iterable[Tuple[float, float]] = (),
) -> MomentReport:
    """All standard moments of a state; weighted norms int |w|^p f^q as configured."""
    gf = state.function
    mass = quadrature(gf)
    mean = quadrature(gf, WeightSpec(s=1))
    energy = quadrature(gf, WeightSpec(s=2))
    l2_sq = quadrature(gf, WeightSpec(q=2.0))
    pairs = dict.fromkeys(tuple(weighted_norm_pairs(params)) + tuple(extra_pairs))
    norms = {pq: quadrature(gf, WeightSpec(p=pq[0], q=pq[1])) for pq in pairs}
    return MomentReport(
        time=state.time,
        mass=mass,
        mean=mean,
        energy=energy,
        temperature=energy / mass if mass > 0.0 else 0.0,
        l2_sq=l2_sq,
        weighted_norms=norms,
    )


def energy_rhs(state: DensityState, p: ModelParams) -> float:
    """Exact right side of the second-moment balance in physical time.

    dE/dt = 2 lambda mu - 2 (lambda + 1) E - 2 beta int w^2 H^alpha f^{alpha+1}.
    """
    gf = state.function
    mass = quadrature(gf)
    energy = quadrature(gf, WeightSpec(s=2))
    sink = 0.0
    if p.beta != 0.0:
        sink = quadrature(gf, WeightSpec(r=p.alpha, s=2, q=p.alpha + 1.0))
    return 2.0 * p.lam * mass - 2.0 * (p.lam + 1.0) * energy - 2.0 * p.beta * sink


def second_moment_lower_bound(mu: float, l2_sq: float) -> float:
    """Lower bound (1/5)^5 (2 sqrt 2)^4 mu^5 / l2_sq^2 on the second moment."""
    if mu <= 0.0 or l2_sq <= 0.0:
        raise ValueError("mass and l2_sq must be positive")
    return BBOUND_COEFFICIENT * mu ** 5 / l2_sq ** 2


def l1_from_l2_and_energy_check(state: DensityState) -> InequalityReport:
    """Check int f <= 5 (2 sqrt 2)^{-4/5} (int f^2)^{2/5} (int w^2 f)^{1/5}."""
    gf = state.function
    mass = quadrature(gf)
    l2_sq = quadrature(gf, WeightSpec(q=2.0))
    energy = quadrature(gf, WeightSpec(s=2))
    rhs = L1_INTERPOLATION_COEFFICIENT * l2_sq ** 0.4 * energy ** 0.2
    return InequalityReport(
        name="l1_from_l2_and_energy",
        lhs=mass,
        rhs=rhs,
        constants_used={"coefficient": L1_INTERPOLATION_COEFFICIENT},
    )


def dissipation_bound_check(state: DensityState, p: ModelParams) -> InequalityReport:
    """Lower bound on the nonlinear damping integral int w^2 H^a f^{a+1}.

    For alpha > 2 the integral dominates
    (mu - E)^{3a/2} / (s_alpha^{3a/2} E^{(a-2)/2}); this is what drives the
    finite-time energy collapse.
    """
    a = p.alpha
    if a <= 2.0:
        raise OutOfRegimeError(f"requires alpha > 2, got {a}")
    k = blowup_constants(a)
    gf = state.function
    mass = quadrature(gf)
    energy = quadrature(gf, WeightSpec(s=2))
    if energy <= 0.0:
        raise ValueError("state has nonpositive energy")
    lhs_integral = quadrature(gf, WeightSpec(r=a, s=2, q=a + 1.0))
    rhs = (mass - energy) ** (1.5 * a) / (
        k.s_alpha ** (1.5 * a) * energy ** (0.5 * (a - 2.0))
    )
    return InequalityReport(
        name="dissipation_lower_bound",
        lhs=rhs,  # bound must sit below the integral
        rhs=lhs_integral,
        constants_used={
            "s_alpha": k.s_alpha,
            "integral": lhs_integral,
            "bound": rhs,
        },
    )


def dirichlet_form(state: DensityState) -> float:
    """Discrete weighted Dirichlet energy sum_faces H_face ((f_{i+1}-f_i)/h)^2 h.

    H is evaluated at face positions, i.e. at the midpoints between adjacent
    cell centers, matching the flux discretization.
    """
    grid = state.grid
    if grid.n_cells < 2:
        return 0.0
    f = state.values
    h_face = diffusion_coefficient(grid.faces[1:-1])
    df = np.diff(f) / grid.h
    return float(np.sum(h_face * df * df) * grid.h)


def l2_drift_constant(p: ModelParams) -> float:
    """C_{alpha,beta*} = max(2^{a/(a+2)} lambda* + 2 beta*/(a+2), 2 beta*/(a+2))."""
    a = p.alpha
    lam_star, beta_star = p.lambda_star, p.beta_star
    base = 2.0 * beta_star / (a + 2.0)
    return max(base + 2.0 ** (a / (a + 2.0)) * lam_star, base)


def l2_evolution_bound(state: DensityState, p: ModelParams) -> float:
    """Right side of the scaled-time L2 differential bound, 0 < alpha <= 2.

    d/dtau int f^2 <= -2 sum_faces H ((df)/h)^2 h + C_{alpha,beta*} int f^{alpha+2}.
    """
    a = p.alpha
    if not (0.0 < a <= 2.0):
        raise OutOfRegimeError(f"L2 bound requires 0 < alpha <= 2, got {a}")
    gf = state.function
    high = quadrature(gf, WeightSpec(q=a + 2.0))
    return -2.0 * dirichlet_form(state) + l2_drift_constant(p) * high


@dataclass(frozen=True)
class MassCondition:
    """alpha = 2 limit case: L2 control holds only under a mass cap."""

    threshold: float
    mass: float
    satisfied: bool


def l2_apriori_bound(
    p: ModelParams, f0_l2_sq: float, mu: float
) -> Union[float, MassCondition]:
    """Uniform-in-time L2 cap (alpha < 2) or the alpha = 2 mass condition.

    For alpha < 2 returns
    max(f0_l2_sq, 2^{a/(a+2)}, (C_{alpha,beta*} / (2^{2/(a+2)} C_GN^{3/(a+1)}))^{(a+1)/(2-a)})
    with the weighted Gagliardo-Nirenberg constant at exponent p = alpha + 2.
    For alpha = 2 returns the mass threshold record instead.
    """
    from .inequalities import gn_constant

    a = p.alpha
    if not (0.0 < a <= 2.0):
        raise OutOfRegimeError(f"requires 0 < alpha <= 2, got {a}")
    c_ab = l2_drift_constant(p)
    cgn = gn_constant(a + 2.0)
    denom = 2.0 ** (2.0 / (a + 2.0)) * cgn ** (3.0 / (a + 1.0))
    if a == 2.0:
        threshold = (c_ab / denom) ** ((a + 4.0) / (a + 1.0))
        return MassCondition(threshold=threshold, mass=mu, satisfied=mu <= threshold)
    third = (c_ab / denom) ** ((a + 1.0) / (2.0 - a))
    return max(f0_l2_sq, 2.0 ** (a / (a + 2.0)), third)


@dataclass(frozen=True)
class WeightedDriftSigns:
    """Sign diagnostics for the weighted-norm evolution, exponent p on |w|.

    ``drift_coefficient`` multiplies the weighted norm itself;
    ``flux_derivative_max`` is the largest value over grid centers (w != 0) of
    d/dw ( w H^alpha / |w|^{p (alpha+1)/gamma} ), whose negativity is what the
    weighted-space regularity argument needs (gamma = 1 corresponds to the
    quadratic norm q = 2).
    """

    p_exponent: float
    q: float
    drift_coefficient: float
    drift_coefficient_negative: bool
    flux_derivative_max: float
    flux_derivative_all_negative: bool


def weighted_drift_signs(
    p_exponent: float, params: ModelParams, grid: Grid, q: float = 2.0
) -> WeightedDriftSigns:
    """Evaluate the two sign conditions of the weighted-norm drift terms."""
    if not (1.0 < q <= 2.0):
        raise OutOfRegimeError(f"requires q in (1, 2], got {q}")
    a, lam = params.alpha, params.lam
    pe = p_exponent
    gamma = q - 1.0
    if q == 2.0:
        coeff = -lam * pe * pe - (1.0 - lam) * pe + 1.0 - 2.0 * lam
    else:
        coeff = -lam * pe * pe - (1.0 - lam) * pe + gamma * (1.0 - 2.0 * lam)
    w = grid.centers
    w = w[w != 0.0]
    h = diffusion_coefficient(w)
    # d/dw (w H^a / |w|^{p(a+1)/gamma}) = H^{a-1} |w|^{-p(a+1)/gamma}
    #   * (H - 2 a w^2 - (p(a+1)/gamma) H)
    expo = pe * (a + 1.0) / gamma
    deriv = h ** (a - 1.0) * np.abs(w) ** (-expo) * (
        h - 2.0 * a * w * w - expo * h
    )
    dmax = float(np.max(deriv))
    return WeightedDriftSigns(
        p_exponent=pe,
        q=q,
        drift_coefficient=coeff,
        drift_coefficient_negative=coeff < 0.0,
        flux_derivative_max=dmax,
        flux_derivative_all_negative=dmax < 0.0,
    )
