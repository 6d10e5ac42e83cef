"""
Squeezed vacuum input: OPO parametrization, two-time correlators and dB conversions.
"""
import cmath
import logging
from typing import Optional, Tuple

import numpy as np

from mechsqueeze.exceptions import ThresholdError
from mechsqueeze.schemas import OPOParams, SqueezingSpec

logger = logging.getLogger(__name__)

VACUUM_VARIANCE = 0.5
# |b_y - b_x| below this fraction of b_x + b_y counts as degenerate
DEGENERATE_RTOL = 1e-6


def to_db(variance):
    """Noise reduction in dB relative to the vacuum variance 1/2."""
    variance = np.asarray(variance, dtype=float)
    if np.any(variance <= 0):
        raise ValueError("variance must be positive")
    result = -10.0 * np.log10(variance / VACUUM_VARIANCE)
    return float(result) if result.ndim == 0 else result


def from_db(db):
    result = VACUUM_VARIANCE * 10.0 ** (-np.asarray(db, dtype=float) / 10.0)
    return float(result) if result.ndim == 0 else result


def opo_to_nm(gamma_o: float, epsilon: complex) -> SqueezingSpec:
    """
    Squeezed output of a degenerate OPO driven below threshold.

    b_x, b_y = gamma_o/2 -+ |epsilon|,
    M = (epsilon gamma_o / 2)(1/b_x^2 + 1/b_y^2),
    N = (|epsilon| gamma_o / 2)(1/b_x^2 - 1/b_y^2).
    """
    if gamma_o <= 0:
        raise ValueError("gamma_o must be positive")
    if abs(epsilon) >= gamma_o / 2:
        raise ThresholdError("epsilon: OPO at/above threshold (|epsilon| >= gamma_o/2)")
    eps_abs = abs(epsilon)
    b_x = gamma_o / 2 - eps_abs
    b_y = gamma_o / 2 + eps_abs
    M = complex(epsilon) * gamma_o / 2 * (1 / b_x**2 + 1 / b_y**2)
    N = eps_abs * gamma_o / 2 * (1 / b_x**2 - 1 / b_y**2)
    return SqueezingSpec(N=N, M=M, b_x=b_x, b_y=b_y, opo=OPOParams(gamma_o=gamma_o, epsilon=complex(epsilon)))


def nm_to_opo(squeeze_db: float, b_x: float, phase: float = 0.0) -> SqueezingSpec:
    """
    Pure OPO spec whose white-noise minimum input variance is (1/2) 10^(-dB/10).

    The ratio b_y/b_x equals sqrt(V_max/V_min) = 10^(dB/20); ``phase`` is arg(epsilon) = arg(M).
    """
    if squeeze_db < 0:
        raise ValueError("squeeze_db must be >= 0")
    if b_x <= 0:
        raise ValueError("b_x must be positive")
    b_y = b_x * 10.0 ** (squeeze_db / 20.0)
    gamma_o = b_x + b_y
    epsilon = (b_y - b_x) / 2 * cmath.exp(1j * phase)
    return opo_to_nm(gamma_o, epsilon)


def _pure_source(N: float, M: complex, b_x: float) -> OPOParams:
    # b_y / b_x = sqrt(2(N + |M|) + 1) for a pure OPO output
    ratio = np.sqrt(2 * (N + abs(M)) + 1)
    eps = b_x * (ratio - 1) / 2 * cmath.exp(1j * cmath.phase(M))
    return OPOParams(gamma_o=b_x * (1 + ratio), epsilon=eps)


def from_components(N: float, M: complex, b_x: float, b_y: float) -> SqueezingSpec:
    """
    Spec from (N, M, b_x, b_y). A pure spec whose bandwidths match an OPO
    output gets the OPO parameters attached; mixed specs carry none.
    """
    spec = SqueezingSpec(N=N, M=M, b_x=b_x, b_y=b_y)
    if spec.is_pure:
        opo = _pure_source(N, M, b_x)
        if abs(opo.b_y - b_y) <= 1e-9 * (b_x + b_y):
            spec = spec.model_copy(update={"opo": opo})
    return spec


def squeeze_db_of(spec: SqueezingSpec) -> float:
    """Input squeezing in dB, defined through the white-noise minimum variance N + 1/2 - |M|."""
    return to_db(spec.min_variance)


def _expm1_ratio(d: float, t):
    # expm1(-d t) / d, with its series at d -> 0
    t = np.asarray(t, dtype=float)
    if d == 0.0:
        return -t
    return np.expm1(-d * t) / d


def input_correlators(spec: SqueezingSpec, tau) -> Tuple[np.ndarray, np.ndarray]:
    """
    Two-time correlators <c(t+tau) c(t)> and <c^dag(t+tau) c(t)> of the squeezed input.

    Both are even in tau. Returns complex C_MM and real C_NM, scalars or arrays like ``tau``.
    """
    t = np.abs(np.asarray(tau, dtype=float))
    b_x, b_y = spec.b_x, spec.b_y
    C_MM = (spec.M / 2) * (b_x * b_y / (b_x**2 + b_y**2)) * (b_y * np.exp(-b_x * t) + b_x * np.exp(-b_y * t))
    d = b_y - b_x
    if abs(d) < DEGENERATE_RTOL * (b_x + b_y):
        d = 0.0
    C_NM = (spec.N / 2) * (b_x * b_y / (b_x + b_y)) * np.exp(-b_x * t) * (1.0 - b_x * _expm1_ratio(d, t))
    if np.ndim(C_MM) == 0:
        return complex(C_MM), float(C_NM)
    return C_MM, C_NM


def input_quadrature_correlator(spec: SqueezingSpec, tau: float) -> np.ndarray:
    """
    Symmetric quadrature correlation matrix <X_i(t+tau) X_j(t)> of the input for
    tau != 0, with X = (x, p) and x = (c + c^dag)/sqrt(2).
    """
    C_MM, C_NM = input_correlators(spec, tau)
    return np.array([
        [C_MM.real + C_NM, C_MM.imag],
        [C_MM.imag, -C_MM.real + C_NM],
    ])


def input_quadrature_variance_white(spec: SqueezingSpec, phi):
    """White-noise input variance N + 1/2 + Re{M e^{2i phi}}."""
    value = spec.N + 0.5 + np.real(spec.M * np.exp(2j * np.asarray(phi, dtype=float)))
    return float(value) if np.ndim(value) == 0 else value


def lorentz_pair_weight(b_x: float, b_y: float, rate: float) -> float:
    """
    b_x b_y (b_x + b_y + rate) / ((b_x + b_y)(b_x + rate)(b_y + rate)).

    Regular form of (b_x b_y / (b_y^2 - b_x^2)) [b_y/(b_x + rate) - b_x/(b_y + rate)],
    so b_x = b_y needs no special case.
    """
    return b_x * b_y * (b_x + b_y + rate) / ((b_x + b_y) * (b_x + rate) * (b_y + rate))


def intracavity_squeezed_photons(spec: SqueezingSpec, kappa: float) -> float:
    """Squeezed-light contribution to the intracavity photon number (never above N)."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    return spec.N * lorentz_pair_weight(spec.b_x, spec.b_y, kappa)


def source_parameters(spec: SqueezingSpec) -> Optional[OPOParams]:
    """
    OPO parameters able to generate ``spec``: the attached ones, or for a pure
    spec the OPO with the same N, M and b_x. None for mixed specs without an OPO.
    """
    if spec.opo is not None:
        return spec.opo
    if spec.N == 0 and spec.M == 0:
        return OPOParams(gamma_o=spec.b_x + spec.b_y, epsilon=0j)
    if spec.is_pure:
        return _pure_source(spec.N, spec.M, spec.b_x)
    return None
