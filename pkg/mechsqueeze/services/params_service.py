import logging
from typing import Callable, Tuple

import numpy as np
from scipy import constants, optimize

from mechsqueeze.exceptions import BistabilityError, ConvergenceError
from mechsqueeze.models import DerivedParams
from mechsqueeze.schemas import CouplingDrive, DetuningPolicy, SystemParams
from mechsqueeze.services.analytics_service import cooling_rates

logger = logging.getLogger(__name__)


def bose_occupancy(omega: float, temperature: float) -> float:
    """
    Thermal occupancy 1/(exp(hbar omega / k T) - 1), exact Bose factor.
    """
    x = constants.hbar * omega / (constants.k * temperature)
    with np.errstate(over="ignore"):
        return float(1.0 / np.expm1(x))


def zero_point_motion(mass: float, omega_m0: float) -> float:
    return float(np.sqrt(constants.hbar / (2.0 * mass * omega_m0)))


def single_photon_coupling(reflectivity: float, xbar_m: float, cavity_length: float, omega_c: float) -> float:
    """g = 2 R (xbar_m / L) omega_c for a membrane in the middle of the cavity."""
    return 2.0 * reflectivity * (xbar_m / cavity_length) * omega_c


def drive_amplitude(power: float, kappa: float, omega_c: float) -> float:
    """|E| = sqrt(2 P kappa / (hbar omega_c))."""
    return float(np.sqrt(2.0 * power * kappa / (constants.hbar * omega_c)))


def radiation_pressure_shift(g: float, omega_m0: float, gamma_m: float) -> float:
    """Detuning shift per intracavity photon, 2 g^2 omega_m0 / (omega_m0^2 + gamma_m^2)."""
    return 2.0 * g**2 * omega_m0 / (omega_m0**2 + gamma_m**2)


def steady_state_amplitudes(
    E: complex,
    kappa: float,
    Delta: float,
    g: float,
    gamma_m: float,
    omega_m0: float,
) -> Tuple[complex, complex]:
    """
    Mean intracavity and mechanical amplitudes of the driven cavity.

    The laser phase is chosen so that c_ss is real and non-negative.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    c = E / (kappa + 1j * Delta)
    c_ss = complex(abs(c), 0.0)
    b_ss = g / (omega_m0 - 1j * gamma_m) * abs(c_ss) ** 2
    return c_ss, complex(b_ss)


def _solve_detuning(update: Callable[[float], float], start: float) -> float:
    try:
        value = optimize.fixed_point(update, start, xtol=1e-10, maxiter=500)
    except (RuntimeError, ConvergenceError) as exc:
        raise BistabilityError(f"no steady state for the effective detuning: {exc}") from exc
    value = float(value)
    if not np.isfinite(value):
        raise BistabilityError("effective detuning iteration diverged")
    return value


def derive_params(params: SystemParams) -> DerivedParams:
    """
    Derive every secondary quantity of an operating point.

    With a coupling drive the power chain (g, E, c_ss, b_ss) is left unset.
    Under the sideband-cooling policy Delta equals the shifted mechanical
    frequency; with a power drive it is found self-consistently with the
    radiation-pressure shift of the cavity resonance.
    """
    omega_m0 = params.omega_m0
    kappa = params.kappa
    gamma_m = params.mech_damping
    common = dict(
        omega_m0=omega_m0,
        kappa=kappa,
        gamma_m=gamma_m,
        n_th=bose_occupancy(omega_m0, params.temperature),
        eta=kappa / omega_m0,
        delta=params.delta,
        xbar_m=zero_point_motion(params.mass, omega_m0),
    )
    sideband = params.detuning_policy is DetuningPolicy.SIDEBAND

    if isinstance(params.drive, CouplingDrive):
        G = params.drive.G
        if sideband:
            Delta = cooling_rates(G, kappa, omega_m0, gamma_m).omega_m
        else:
            Delta = float(params.detuning)
        return DerivedParams(G=G, Delta=Delta, power_driven=False, **common)

    drive = params.drive
    g = single_photon_coupling(drive.reflectivity, common["xbar_m"], drive.cavity_length, params.omega_c)
    E = drive_amplitude(drive.power, kappa, params.omega_c)
    shift = radiation_pressure_shift(g, omega_m0, gamma_m)

    def photons(Delta: float) -> float:
        return E**2 / (kappa**2 + Delta**2)

    if sideband:
        def update(Delta: float) -> float:
            G = 2.0 * g * np.sqrt(photons(Delta))
            return cooling_rates(G, kappa, omega_m0, gamma_m).omega_m
        Delta = _solve_detuning(update, omega_m0)
        bare = Delta + shift * photons(Delta)
    else:
        bare = float(params.detuning)
        Delta = _solve_detuning(lambda D: bare - shift * photons(D), bare)
    logger.debug("power drive: g=%.6g E=%.6g Delta=%.9g bare=%.9g", g, E, Delta, bare)

    c_ss, b_ss = steady_state_amplitudes(E, kappa, Delta, g, gamma_m, omega_m0)
    return DerivedParams(
        G=2.0 * g * abs(c_ss),
        Delta=Delta,
        g=g,
        E=E,
        c_ss=c_ss,
        b_ss=b_ss,
        bare_detuning=bare,
        power_driven=True,
        **common,
    )
