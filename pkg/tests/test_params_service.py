import numpy as np
import pytest
from pydantic import ValidationError
from scipy import constants

import mechsqueeze.services.params_service as params_svc
from mechsqueeze.exceptions import BistabilityError, NotDerivedError
from mechsqueeze.schemas import CouplingDrive, DetuningPolicy, PowerDrive, QConvention, SystemParams
from mechsqueeze.services.analytics_service import cooling_rates

TWO_PI = 2 * np.pi


@pytest.fixture
def power_system():
    # 1064 nm laser, 1 cm cavity, membrane reflectivity 0.4
    return SystemParams(
        omega_c=TWO_PI * constants.c / 1064e-9,
        omega_m0=TWO_PI * 1e6,
        mass=1e-12,
        kappa=TWO_PI * 380e3,
        temperature=0.1,
        quality_factor=1e7,
        drive=PowerDrive(power=1e-7, cavity_length=1e-2, reflectivity=0.4),
        detuning_policy=DetuningPolicy.FIXED,
        detuning=TWO_PI * 1e6,
    )


def test_sideband_parameter_uses_bare_frequency(fig3_system):
    derived = params_svc.derive_params(fig3_system)
    assert derived.eta == pytest.approx(0.380, rel=1e-12)


def test_thermal_occupancy_at_100mk(fig3_system):
    derived = params_svc.derive_params(fig3_system)
    assert derived.n_th == pytest.approx(2083.16, rel=1e-4)


def test_zero_point_motion():
    assert params_svc.zero_point_motion(1e-12, TWO_PI * 1e6) == pytest.approx(2.8969e-15, rel=1e-3)


def test_thermal_occupancy_monotone_and_high_temperature_limit():
    omega = TWO_PI * 1e6
    temps = np.geomspace(1e-3, 10.0, 30)
    n = [params_svc.bose_occupancy(omega, t) for t in temps]
    assert all(b > a for a, b in zip(n, n[1:]))
    # hbar omega / k T < 1e-2 from about 5 mK upwards
    for t in (0.1, 1.0, 10.0):
        classical = constants.k * t / (constants.hbar * omega) - 0.5
        assert params_svc.bose_occupancy(omega, t) == pytest.approx(classical, rel=1e-3)


def test_scale_consistency():
    # Same physics with rates expressed in Hz instead of rad/s
    base = dict(mass=1e-12, temperature=0.1, quality_factor=1e7)
    in_rad = SystemParams(omega_m0=TWO_PI * 1e6, kappa=TWO_PI * 380e3, drive=CouplingDrive(G=TWO_PI * 110e3), **base)
    in_hz = SystemParams(omega_m0=1e6, kappa=380e3, drive=CouplingDrive(G=110e3), **base)
    d_rad = params_svc.derive_params(in_rad)
    d_hz = params_svc.derive_params(in_hz)
    assert d_rad.eta == pytest.approx(d_hz.eta, rel=1e-12)
    assert d_rad.Delta / d_rad.omega_m0 == pytest.approx(d_hz.Delta / d_hz.omega_m0, rel=1e-9)


def test_coupling_drive_leaves_power_chain_unset(fig3_system):
    derived = params_svc.derive_params(fig3_system)
    assert derived.power_driven is False
    assert derived.c_ss is None and derived.g is None
    with pytest.raises(NotDerivedError):
        derived.require("c_ss")
    # Sideband policy puts the laser at the shifted mechanical frequency
    rates = cooling_rates(derived.G, derived.kappa, derived.omega_m0, derived.gamma_m)
    assert derived.Delta == pytest.approx(rates.omega_m, rel=1e-12)


def test_fixed_detuning_with_coupling_drive(fig3_system):
    system = fig3_system.model_copy(update={"detuning_policy": DetuningPolicy.FIXED, "detuning": 123.0})
    assert params_svc.derive_params(system).Delta == 123.0


def test_power_drive_fixed_detuning_is_self_consistent(power_system):
    derived = params_svc.derive_params(power_system)
    assert derived.power_driven
    shift = params_svc.radiation_pressure_shift(derived.g, derived.omega_m0, derived.gamma_m)
    photons = abs(derived.c_ss) ** 2
    # Effective detuning = bare detuning - radiation pressure shift
    assert derived.Delta + shift * photons == pytest.approx(power_system.detuning, rel=1e-9)
    assert derived.G == pytest.approx(2 * derived.g * abs(derived.c_ss), rel=1e-12)
    assert derived.c_ss.imag == 0.0 and derived.c_ss.real > 0


def test_power_drive_sideband_policy(power_system):
    system = power_system.model_copy(update={"detuning_policy": DetuningPolicy.SIDEBAND, "detuning": None})
    derived = params_svc.derive_params(system)
    rates = cooling_rates(derived.G, derived.kappa, derived.omega_m0, derived.gamma_m)
    assert derived.Delta == pytest.approx(rates.omega_m, rel=1e-9)
    assert derived.bare_detuning > derived.Delta


def test_power_drive_without_fixed_point_is_reported(power_system, monkeypatch):
    # Stub the fixed point solver to fail as it does without a real solution
    def no_fixed_point(*args, **kwargs):
        raise RuntimeError("Failed to converge after 500 iterations")

    monkeypatch.setattr(params_svc.optimize, "fixed_point", no_fixed_point)
    with pytest.raises(BistabilityError):
        params_svc.derive_params(power_system)


def test_overdriven_sideband_cooling_has_no_steady_state(power_system):
    # 10 mW pushes the optical spring shift past the bare mechanical frequency
    system = power_system.model_copy(update={
        "detuning_policy": DetuningPolicy.SIDEBAND,
        "detuning": None,
        "drive": PowerDrive(power=1e-2, cavity_length=1e-2, reflectivity=0.4),
    })
    with pytest.raises(BistabilityError, match="no steady state"):
        params_svc.derive_params(system)


def test_steady_state_amplitudes():
    kappa = 2.0
    # Delta = kappa halves the photon number of the resonant case
    c_ss, _ = params_svc.steady_state_amplitudes(3.0, kappa, kappa, 0.1, 1e-3, 10.0)
    assert abs(c_ss) ** 2 == pytest.approx(9.0 / (2 * kappa**2))
    # No radiation pressure, no displacement
    _, b_ss = params_svc.steady_state_amplitudes(3.0, kappa, 1.0, 0.0, 1e-3, 10.0)
    assert b_ss == 0
    c_ss, b_ss = params_svc.steady_state_amplitudes(0.0, kappa, 1.0, 0.1, 1e-3, 10.0)
    assert c_ss == 0 and b_ss == 0


def test_laser_phase_makes_amplitude_real_positive():
    for E in (1.0 + 2.0j, -3.0, -1j, 0.5 - 0.5j):
        c_ss, _ = params_svc.steady_state_amplitudes(E, 1.0, -0.7, 0.1, 1e-3, 10.0)
        assert c_ss.imag == 0.0
        assert c_ss.real >= 0.0


def test_invalid_inputs_rejected():
    base = dict(omega_m0=1.0, mass=1e-12, temperature=0.1, quality_factor=1e7, drive=CouplingDrive(G=0.1))
    with pytest.raises(ValidationError):
        SystemParams(kappa=-1.0, **base)
    with pytest.raises(ValidationError):
        SystemParams(kappa=0.0, **base)
    with pytest.raises(ValidationError, match="exactly one of"):
        SystemParams(kappa=0.3, gamma_m=1e-3, **base)
    with pytest.raises(ValidationError):
        PowerDrive(power=1e-3, cavity_length=0.01, reflectivity=1.5)


def test_quality_factor_conventions():
    base = dict(omega_m0=2.0, mass=1e-12, kappa=0.5, temperature=0.1, quality_factor=100.0, drive=CouplingDrive(G=0.1))
    assert SystemParams(**base).mech_damping == pytest.approx(0.01)
    assert SystemParams(q_convention=QConvention.LINEWIDTH, **base).mech_damping == pytest.approx(0.02)
