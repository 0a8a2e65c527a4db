import math

import numpy as np
import pytest

from fplab import DensityState, ModelParams, face_fluxes, make_grid, quadrature
from fplab.equilibrium import (
    critical_mass,
    residual_flux,
    solve_amplitude_for_mass,
    steady_profile,
)
from fplab.errors import (
    NoCriticalAmplitudeError,
    OutOfRegimeError,
    SupercriticalAmplitudeError,
)

# refined-quadrature value for alpha=3, beta=1, lambda=0.5 (singularity-split
# oracle below reproduces it to ~1e-7)
MU_C_A3_L05 = 4.395875450200237


def mu_c_oracle_richardson(alpha, beta, lam):
    """Independent critical-mass oracle: midpoint rule with the |w|^{-2/alpha}
    leading term subtracted and integrated analytically, Richardson-extrapolated
    over n in {400, 800, 1600}."""
    cap = beta ** (-1.0 / alpha)
    s = 1.0 / (2.0 * lam)
    amp = cap / (s * alpha) ** (1.0 / alpha)  # f ~ amp |w|^{-2/alpha} at 0

    def f(w):
        h = 1.0 - w * w
        denom = -np.expm1(math.log(beta) + alpha * math.log(cap)
                          + s * alpha * np.log1p(-w * w))
        return cap * h ** (s - 1.0) * denom ** (-1.0 / alpha)

    def estimate(n):
        g = make_grid(n)
        w = g.centers
        regular = f(w) - amp * np.abs(w) ** (-2.0 / alpha)
        singular = 2.0 * amp / (1.0 - 2.0 / alpha)  # int_{-1}^{1} amp |w|^{-2/a}
        return float(np.sum(regular) * g.h) + singular

    e1, e2, e3 = estimate(400), estimate(800), estimate(1600)
    # observed order from the triple, then one extrapolation at that order
    order = math.log(abs((e2 - e1) / (e3 - e2))) / math.log(2.0)
    fac = 2.0 ** order
    return (fac * e3 - e2) / (fac - 1.0)


def test_uniform_profile_at_half_diffusion():
    p = ModelParams(0.0, 0.0, 0.5)
    g = make_grid(200)
    prof = steady_profile(0.3, p, g)
    np.testing.assert_allclose(prof.values.values, 0.3, atol=1e-15)
    assert residual_flux(prof, p) <= 1e-14


def test_parabolic_profile_quarter_diffusion():
    p = ModelParams(0.0, 0.0, 0.25)
    g = make_grid(400)
    c = 0.6
    prof = steady_profile(c, p, g)
    np.testing.assert_allclose(
        prof.values.values, c * (1.0 - g.centers ** 2), rtol=1e-13
    )
    assert prof.mass == pytest.approx(4.0 * c / 3.0, abs=4e-6)
    assert residual_flux(prof, p) <= 1e-8


def test_profile_is_even_and_beta_limit():
    g = make_grid(128)
    p = ModelParams(3.0, 1e-8, 0.25)
    prof = steady_profile(0.5, p, g)
    vals = prof.values.values
    assert np.max(np.abs(vals - vals[::-1])) <= 1e-14
    linear = 0.5 * (1.0 - g.centers ** 2)
    assert np.max(np.abs(vals - linear)) <= 1e-6


def test_critical_profile_local_behavior_and_mass():
    p = ModelParams(3.0, 1.0, 0.5)
    g = make_grid(800)
    prof = steady_profile(1.0, p, g)
    assert prof.is_critical
    # innermost centers sit on the |w|^{-2/3} envelope with amplitude 3^{-1/3}
    w0 = g.centers[g.n_cells // 2]
    local = prof.values.values[g.n_cells // 2] * w0 ** (2.0 / 3.0)
    assert local == pytest.approx(3.0 ** (-1.0 / 3.0), rel=1e-5)
    assert prof.mass == pytest.approx(MU_C_A3_L05, rel=1e-12)


def test_critical_mass_matches_independent_oracle():
    p = ModelParams(3.0, 1.0, 0.5)
    g = make_grid(400)
    value = critical_mass(p, g)
    assert value == pytest.approx(MU_C_A3_L05, rel=1e-12)
    oracle = mu_c_oracle_richardson(3.0, 1.0, 0.5)
    assert value == pytest.approx(oracle, rel=1e-6)


def test_critical_mass_infinite_at_low_alpha():
    g = make_grid(100)
    assert critical_mass(ModelParams(2.0, 1.0, 0.3), g) == math.inf
    assert critical_mass(ModelParams(1.5, 1.0, 0.3), g) == math.inf


def test_critical_mass_requires_beta():
    g = make_grid(100)
    with pytest.raises(NoCriticalAmplitudeError):
        critical_mass(ModelParams(3.0, 0.0, 0.3), g)


def test_grid_mass_estimates_diverge_iff_alpha_at_most_two():
    """Raw grid sums of the critical profile: Cauchy for alpha>2, growing for alpha=2."""
    def grid_sums(alpha):
        p = ModelParams(alpha, 1.0, 0.5)
        out = []
        for n in (400, 800, 1600, 3200):
            g = make_grid(n)
            prof = steady_profile(1.0, p, g)
            out.append(float(np.sum(prof.values.values) * g.h))
        return out

    finite = grid_sums(3.0)
    gaps = [abs(b - a) for a, b in zip(finite, finite[1:])]
    assert gaps[2] < gaps[1] < gaps[0]
    divergent = grid_sums(2.0)
    growth = [b - a for a, b in zip(divergent, divergent[1:])]
    # each doubling adds another ~log 2 worth of mass near the singularity
    assert all(gr > 0.1 for gr in growth)
    assert growth[2] == pytest.approx(growth[0], rel=0.2)


def test_supercritical_amplitude_rejected():
    g = make_grid(64)
    with pytest.raises(SupercriticalAmplitudeError):
        steady_profile(1.0 + 1e-6, ModelParams(3.0, 1.0, 0.5), g)


def test_alpha_zero_with_beta_unsupported():
    g = make_grid(64)
    with pytest.raises(OutOfRegimeError):
        steady_profile(0.5, ModelParams(0.0, 1.0, 0.5), g)


def test_critical_profile_needs_even_grid():
    with pytest.raises(ValueError):
        steady_profile(1.0, ModelParams(3.0, 1.0, 0.5), make_grid(401))


def test_amplitude_for_mass_linear_case():
    p = ModelParams(0.0, 0.0, 0.25)
    g = make_grid(400)
    c, condensate = solve_amplitude_for_mass(1.0, p, g)
    assert condensate == 0.0
    assert c == pytest.approx(0.75, abs=1e-5)
    prof = steady_profile(c, p, g)
    assert quadrature(prof.values) == pytest.approx(1.0, abs=1e-12)


def test_amplitude_for_mass_bisection_subcritical():
    p = ModelParams(3.0, 1.0, 0.5)
    g = make_grid(400)
    mu = MU_C_A3_L05 / 2.0
    c, condensate = solve_amplitude_for_mass(mu, p, g)
    assert condensate == 0.0
    assert 0.0 < c < 1.0
    prof = steady_profile(c, p, g)
    assert abs(quadrature(prof.values) - mu) <= 1e-10 * mu


def test_amplitude_for_mass_condensation():
    p = ModelParams(3.0, 1.0, 0.5)
    g = make_grid(400)
    mu_c = critical_mass(p, g)
    c, condensate = solve_amplitude_for_mass(2.0 * mu_c, p, g)
    assert c == pytest.approx(1.0, rel=1e-12)
    assert condensate == pytest.approx(mu_c, rel=1e-12)


def test_mass_monotone_in_amplitude():
    p = ModelParams(3.0, 1.0, 0.5)
    g = make_grid(200)
    amplitudes = np.linspace(0.05, 0.999, 20)
    masses = [steady_profile(c, p, g).mass for c in amplitudes]
    assert all(b > a for a, b in zip(masses, masses[1:]))


def test_invalid_mass_rejected():
    with pytest.raises(ValueError):
        solve_amplitude_for_mass(0.0, ModelParams(3.0, 1.0, 0.5), make_grid(64))


def test_nonlinear_subcritical_residual_second_order():
    p = ModelParams(3.0, 1.0, 0.5)
    res = {}
    for n in (400, 800):
        prof = steady_profile(0.5, p, make_grid(n))
        res[n] = residual_flux(prof, p)
    # lagged-factor scheme: genuine O(h^2) residual on nonlinear steady states
    assert res[800] <= 1e-6
    assert 3.0 <= res[400] / res[800] <= 5.0


def test_critical_profile_residual_study():
    """Residual near the |w|^{-2/alpha} spike: O(h^2) at fixed distance."""
    p = ModelParams(3.0, 1.0, 0.5)

    def max_residual_outside(n, wcut):
        g = make_grid(n)
        prof = steady_profile(1.0, p, g)
        flux = face_fluxes(DensityState(prof.values, negativity_tol=0.0), p)
        faces = g.faces
        mask = np.abs(faces) >= wcut
        return float(np.max(np.abs(flux[mask])))

    r400 = max_residual_outside(400, 0.3)
    r800 = max_residual_outside(800, 0.3)
    assert r800 <= 1e-4
    assert 3.0 <= r400 / r800 <= 5.0


def test_residual_flux_skip_center():
    p = ModelParams(3.0, 1.0, 0.5)
    g = make_grid(800)
    prof = steady_profile(1.0, p, g)
    full = residual_flux(prof, p)
    trimmed = residual_flux(prof, p, skip_center=4)
    assert trimmed < full
