"""
Closed-form steady-state results of sideband cooling with a squeezed input.

Variances are built as QuadratureForm objects, V(phi) = offset - scale * Re{M e^{2i phi}},
so the same expression serves single-angle evaluation and extremization.
"""
import logging
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy import optimize

from mechsqueeze.exceptions import ConvergenceError
from mechsqueeze.models import CoolingRates, QuadratureForm, QuadratureStats, VarianceTable
from mechsqueeze.schemas import SqueezingSpec
from mechsqueeze.services.squeezing_service import (
    DEGENERATE_RTOL,
    lorentz_pair_weight,
    nm_to_opo,
    to_db,
)

logger = logging.getLogger(__name__)

MIN_TABLE_SAMPLES = 8


def optical_damping(G: float, kappa: float, omega_m: float) -> float:
    """Gamma = (G^2 / 4 kappa) * 4 omega_m^2 / (kappa^2 + 4 omega_m^2)."""
    return G**2 / (4 * kappa) * 4 * omega_m**2 / (kappa**2 + 4 * omega_m**2)


def cooling_rates(
    G: float,
    kappa: float,
    omega_m0: float,
    gamma_m: float,
    tol: float = 1e-9,
    max_iter: int = 100,
) -> CoolingRates:
    """
    Optical damping and spring shift at the self-consistent frequency omega_m = omega_m0 - Omega.

    Iterates from omega_m0 until the update changes omega_m by less than tol * omega_m0.
    """
    G, kappa, omega_m0, gamma_m = float(G), float(kappa), float(omega_m0), float(gamma_m)
    if kappa <= 0 or omega_m0 <= 0:
        raise ValueError("kappa and omega_m0 must be positive")
    if G < 0 or gamma_m < 0:
        raise ValueError("G and gamma_m must be non-negative")

    omega = omega_m0
    for iteration in range(1, max_iter + 1):
        Gamma = optical_damping(G, kappa, omega)
        updated = omega_m0 - 2 * kappa * Gamma / omega
        if updated <= 0:
            raise ConvergenceError("optical spring shift exceeds the bare mechanical frequency")
        done = abs(updated - omega) <= tol * omega_m0
        omega = updated
        if done:
            break
    else:
        raise ConvergenceError(f"cooling rates did not converge in {max_iter} iterations")

    Gamma = optical_damping(G, kappa, omega)
    logger.debug("cooling rates converged after %d iterations: Gamma=%.9g omega_m=%.12g", iteration, Gamma, omega)
    return CoolingRates(
        Gamma=Gamma,
        gamma_eff=gamma_m + Gamma,
        Omega=2 * kappa * Gamma / omega,
        omega_m=omega,
        gamma_m=gamma_m,
        iterations=iteration,
    )


def thermal_term(gamma_m: float, gamma_eff: float, n_th: float) -> float:
    return gamma_m / gamma_eff * (n_th + 0.5)


def sideband_ratio(kappa: float, omega_m: float) -> float:
    """Heating-sideband weight kappa^2 / (kappa^2 + 4 omega_m^2)."""
    return kappa**2 / (kappa**2 + 4 * omega_m**2)


def white_rsl_form(spec: SqueezingSpec, rates: CoolingRates, n_th: float) -> QuadratureForm:
    """Resolved-sideband, white-noise variance (N + 1/2 - Re{M e^{2i phi}}) + thermal part."""
    offset = spec.N + 0.5 + thermal_term(rates.gamma_m, rates.gamma_eff, n_th)
    return QuadratureForm(offset=offset, scale=1.0, M=spec.M)


def rsl_impure_form(spec: SqueezingSpec, rates: CoolingRates, n_th: float, eta: float) -> QuadratureForm:
    """Resolved-sideband form with N replaced by the finite-eta value N'."""
    offset = effective_impurity(spec.N, eta) + 0.5 + thermal_term(rates.gamma_m, rates.gamma_eff, n_th)
    return QuadratureForm(offset=offset, scale=1.0, M=spec.M)


def white_general_form(
    spec: SqueezingSpec,
    G: float,
    kappa: float,
    rates: CoolingRates,
    gamma_m: float,
    n_th: float,
) -> QuadratureForm:
    pref = G**2 / (4 * rates.gamma_eff * kappa)
    r = sideband_ratio(kappa, rates.omega_m)
    offset = pref * (spec.N + 0.5) * (1 + r) + thermal_term(gamma_m, rates.gamma_eff, n_th)
    return QuadratureForm(offset=offset, scale=pref, M=spec.M)


def finite_bandwidth_form(
    spec: SqueezingSpec,
    G: float,
    kappa: float,
    rates: CoolingRates,
    gamma_m: float,
    n_th: float,
) -> QuadratureForm:
    f_minus, f_plus, h = bandwidth_coeffs(spec.b_x, spec.b_y, rates.gamma_eff, kappa, rates.omega_m)
    pref = G**2 / (4 * rates.gamma_eff * kappa)
    r = sideband_ratio(kappa, rates.omega_m)
    offset = pref * (spec.N * f_minus + 0.5 + r * (spec.N * h + 0.5)) + thermal_term(gamma_m, rates.gamma_eff, n_th)
    return QuadratureForm(offset=offset, scale=pref * f_plus, M=spec.M)


def variance_white_rsl(spec: SqueezingSpec, phi, rates: CoolingRates, n_th: float):
    return white_rsl_form(spec, rates, n_th)(phi)


def variance_white_general(spec, phi, G, kappa, rates, gamma_m, n_th):
    return white_general_form(spec, G, kappa, rates, gamma_m, n_th)(phi)


def variance_finite_bandwidth(spec, phi, G, kappa, rates, gamma_m, n_th):
    return finite_bandwidth_form(spec, G, kappa, rates, gamma_m, n_th)(phi)


def _h_kernel(b: float, gamma_eff: float, kappa: float, omega_m: float) -> Tuple[float, float]:
    # u(b) = P / ((b + kappa) Q) and du/db
    c = gamma_eff / kappa * (kappa**2 + 4 * omega_m**2)
    P = b**2 + b * kappa + c
    Q = b**2 + 2 * b * gamma_eff + 4 * omega_m**2
    denom = (b + kappa) * Q
    dP = 2 * b + kappa
    dQ = 2 * b + 2 * gamma_eff
    du = (dP * denom - P * (Q + (b + kappa) * dQ)) / denom**2
    return P / denom, du


def bandwidth_coeffs(
    b_x: float,
    b_y: float,
    gamma_eff: float,
    kappa: float,
    omega_m: float,
) -> Tuple[float, float, float]:
    """
    Bandwidth coefficients (f_minus, f_plus, h) of the finite-bandwidth variance.

    f_minus and h are written in a form without the 0/0 at b_x = b_y; inside
    the degenerate window h uses the derivative of its kernel.
    """
    if b_x <= 0 or b_y < b_x:
        raise ValueError("need 0 < b_x <= b_y")
    f_minus = lorentz_pair_weight(b_x, b_y, gamma_eff)
    f_plus = b_x * b_y / (b_y**2 + b_x**2) * (b_y / (b_x + gamma_eff) + b_x / (b_y + gamma_eff))

    u_x, du_x = _h_kernel(b_x, gamma_eff, kappa, omega_m)
    d = b_y - b_x
    if d < DEGENERATE_RTOL * (b_x + b_y):
        slope = du_x
    else:
        slope = (_h_kernel(b_y, gamma_eff, kappa, omega_m)[0] - u_x) / d
    h = b_x * b_y / (b_x + b_y) * (u_x - b_x * slope)
    return f_minus, f_plus, h


def effective_impurity(N: float, eta: float) -> float:
    """N' = N [1 + eta/(eta + 4)] + eta / (2 [eta + 4])."""
    if N < 0 or eta < 0:
        raise ValueError("N and eta must be non-negative")
    return N * (1 + eta / (eta + 4)) + eta / (2 * (eta + 4))


def is_mixed(N: float, M: complex) -> bool:
    return abs(M) ** 2 < N * (N + 1)


def residual_occupancy(
    G: float,
    kappa: float,
    rates: CoolingRates,
    gamma_m: float,
    n_th: float,
) -> Tuple[float, float]:
    """
    Occupancy of sideband cooling without squeezing and its radiative floor kappa^2/(4 omega_m^2).
    """
    pref = G**2 / (4 * rates.gamma_eff * kappa)
    n_f = pref * 0.5 * (1 + sideband_ratio(kappa, rates.omega_m)) + thermal_term(gamma_m, rates.gamma_eff, n_th) - 0.5
    return n_f, kappa**2 / (4 * rates.omega_m**2)


def make_stats(
    V_min: float,
    V_max: float,
    phi_star: float,
    variance_of_phi: Callable,
    micromotion_pp: Optional[float] = None,
) -> QuadratureStats:
    return QuadratureStats(
        variance_of_phi=variance_of_phi,
        V_min=float(V_min),
        V_max=float(V_max),
        phi_star=float(phi_star),
        squeeze_db=to_db(V_min),
        occupancy=float((V_min + V_max) / 2 - 0.5),
        micromotion_pp=micromotion_pp,
    )


def _parabolic_vertex(y0: float, y1: float, y2: float) -> Tuple[float, float]:
    # vertex offset (in grid steps) and value of the parabola through three points
    denom = y0 - 2 * y1 + y2
    if denom == 0:
        return 0.0, y1
    offset = 0.5 * (y0 - y2) / denom
    return offset, y1 - 0.25 * (y0 - y2) * offset


def _table_extrema(table: VarianceTable) -> QuadratureStats:
    phi = np.asarray(table.phi, dtype=float)
    values = np.asarray(table.values, dtype=float)
    n = len(values)
    if n < MIN_TABLE_SAMPLES:
        raise ValueError(f"variance table needs at least {MIN_TABLE_SAMPLES} samples, got {n}")
    step = np.pi / n

    def refine(i: int) -> Tuple[float, float]:
        offset, value = _parabolic_vertex(values[i - 1], values[i], values[(i + 1) % n])
        return (phi[i] + offset * step) % np.pi, value

    phi_star, V_min = refine(int(np.argmin(values)))
    _, V_max = refine(int(np.argmax(values)))

    def variance_of_phi(x):
        return np.interp(np.mod(x, np.pi), phi, values, period=np.pi)

    return make_stats(V_min, V_max, phi_star, variance_of_phi)


def quadrature_extrema(variance: Union[QuadratureForm, VarianceTable]) -> QuadratureStats:
    """
    Extrema over the quadrature angle.

    Closed forms are solved exactly; tables (uniform over [0, pi)) by dense
    scan plus parabolic refinement.
    """
    if isinstance(variance, VarianceTable):
        return _table_extrema(variance)

    amplitude = abs(variance.scale) * abs(variance.M)
    if amplitude == 0.0:
        phi_star = 0.0
    elif variance.scale > 0:
        # maximize Re{M e^{2i phi}}
        phi_star = (-np.angle(variance.M) / 2) % np.pi
    else:
        phi_star = ((np.pi - np.angle(variance.M)) / 2) % np.pi
    return make_stats(variance.offset - amplitude, variance.offset + amplitude, phi_star, variance)


def optimal_bandwidth(
    squeeze_db: float,
    G: float,
    kappa: float,
    rates: CoolingRates,
    gamma_m: float,
    n_th: float,
    bounds: Tuple[float, float],
) -> Tuple[float, float]:
    """
    b_x minimizing the finite-bandwidth V_min at fixed input squeezing.

    Returns (b_x, V_min). The search runs on log(b_x) inside ``bounds``.
    """
    def v_min(log_b: float) -> float:
        spec = nm_to_opo(squeeze_db, float(np.exp(log_b)))
        form = finite_bandwidth_form(spec, G, kappa, rates, gamma_m, n_th)
        return form.offset - abs(form.scale) * abs(form.M)

    res = optimize.minimize_scalar(
        v_min,
        bounds=(np.log(bounds[0]), np.log(bounds[1])),
        method="bounded",
        options={"xatol": 1e-8},
    )
    return float(np.exp(res.x)), float(res.fun)
