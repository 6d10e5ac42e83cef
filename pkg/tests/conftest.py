import sys
import os
# Ensure project root is in sys.path so tests can import mechsqueeze modules
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import numpy as np
import pytest

from mechsqueeze.models import DerivedParams
from mechsqueeze.schemas import CouplingDrive, SystemParams
from mechsqueeze.services.analytics_service import cooling_rates
from mechsqueeze.services.params_service import bose_occupancy

TWO_PI = 2 * np.pi
# Thermal occupancy of a 1 MHz membrane at 100 mK
FIG3_NTH = bose_occupancy(TWO_PI * 1e6, 0.1)


@pytest.fixture
def fig3_system():
    """
    Operating point of the fig3 presets in SI units (rad/s).
    """
    return SystemParams(
        omega_m0=TWO_PI * 1e6,
        mass=1e-12,
        kappa=TWO_PI * 380e3,
        temperature=0.1,
        quality_factor=1e7,
        drive=CouplingDrive(G=TWO_PI * 110e3),
    )


@pytest.fixture(scope="session")
def make_point():
    """
    Factory for (DerivedParams, CoolingRates) in units where omega_m0 = 1.
    Defaults are the fig3 preset values in natural units.
    """
    def _make(G=0.11, kappa=0.38, gamma_m=5e-8, n_th=FIG3_NTH, omega_m0=1.0, delta=0.0):
        rates = cooling_rates(G, kappa, omega_m0, gamma_m)
        derived = DerivedParams(
            omega_m0=omega_m0,
            kappa=kappa,
            gamma_m=gamma_m,
            n_th=n_th,
            eta=kappa / omega_m0,
            G=G,
            Delta=rates.omega_m,
            delta=delta,
            xbar_m=0.0,
        )
        return derived, rates
    return _make
