"""
Exact linear-Gaussian treatment of the cascaded OPO -> cavity -> membrane system.

State ordering is (x_a, p_a, x_c, p_c, x_b, p_b) for the OPO mode a, the cavity
fluctuation c and the membrane b, with x = (a + a^dag)/sqrt(2) and
p = (a - a^dag)/(i sqrt(2)); vacuum variance is 1/2. Optical modes live in the
laser rotating frame and the membrane is unrotated. Only the OPO pump term
depends on time, at twice the OPO detuning from the laser.

Steady states of the periodic model come from the one-period propagator: the
homogeneous flow Phi(t) and the accumulated noise Q(t), so that
Sigma(t) = Phi(t) Sigma(0) Phi(t)^T + Q(t). The stroboscopic fixed point is
reached by repeated squaring of the period map.
"""
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, linalg

from mechsqueeze import config
from mechsqueeze.exceptions import ConvergenceError, InstabilityError, MissingSourceError, ThresholdError
from mechsqueeze.models import CoolingRates, Covariance, DerivedParams, LinearModel, QuadratureStats
from mechsqueeze.schemas import SqueezingSpec
from mechsqueeze.services.analytics_service import make_stats
from mechsqueeze.services.squeezing_service import source_parameters

logger = logging.getLogger(__name__)

LABELS = ("x_a", "p_a", "x_c", "p_c", "x_b", "p_b")
OPO, CAV, MECH = slice(0, 2), slice(2, 4), slice(4, 6)
# Spectral radius of the monodromy must stay below 1 - this
FLOQUET_MARGIN = 1e-12


def _rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def _detuned_block(rate: float, detuning: float) -> np.ndarray:
    # mode obeying da/dt = -(rate + i detuning) a
    return np.array([[-rate, detuning], [-detuning, -rate]])


def _pump_block(theta: float) -> np.ndarray:
    # eps e^{i theta} a^dag term in quadratures
    return np.array([[np.cos(theta), np.sin(theta)], [np.sin(theta), -np.cos(theta)]])


def _cavity_mechanics_drift(derived: DerivedParams) -> np.ndarray:
    A = np.zeros((4, 4))
    A[0:2, 0:2] = _detuned_block(derived.kappa, derived.Delta)
    A[2:4, 2:4] = _detuned_block(derived.gamma_m, derived.omega_m0)
    A[1, 2] = derived.G
    A[3, 0] = derived.G
    return A


def mechanical_resonance(derived: DerivedParams) -> float:
    """
    Frequency of the least damped pole of the driven cavity + membrane system.

    This is the optically shifted mechanical resonance of the linearized
    dynamics, valid while the membrane pole stays narrower than the cavity.
    """
    eig = linalg.eigvals(_cavity_mechanics_drift(derived))
    upper = eig[eig.imag > 0]
    if upper.size == 0:
        return derived.omega_m0
    return float(upper[np.argmax(upper.real)].imag)


def build_cascade(
    derived: DerivedParams,
    rates: CoolingRates,
    spec: SqueezingSpec,
    delta: Optional[float] = None,
) -> LinearModel:
    """
    Laser-frame model of the OPO feeding the optomechanical cavity.

    The squeeze carrier sits at delta below the shifted mechanical resonance
    (delta = Delta_s + omega_m), at -Delta_s from the laser. The OPO cavity is
    resonant with the carrier and its pump term rotates at 2 Delta_s.
    The membrane is read out in the frame of the carrier (frame_freq), where
    its squeezing is stationary for any delta.
    """
    opo = source_parameters(spec)
    if opo is None:
        raise MissingSourceError("squeezing spec has no OPO parameters (mixed squeezing cannot be generated by the cascade)")
    gamma_o, eps = opo.gamma_o, complex(opo.epsilon)
    if abs(eps) >= gamma_o / 2:
        raise ThresholdError("epsilon: OPO at/above threshold (|epsilon| >= gamma_o/2)")
    delta = derived.delta if delta is None else delta

    omega_res = mechanical_resonance(derived)
    Delta_s = delta - omega_res
    theta = np.angle(eps)

    A0 = np.zeros((6, 6))
    A0[OPO, OPO] = _detuned_block(gamma_o / 2, -Delta_s)
    A0[CAV, OPO] = np.sqrt(2 * derived.kappa * gamma_o) * np.eye(2)
    A0[CAV, CAV] = _detuned_block(derived.kappa, derived.Delta)
    A0[3, 4] = derived.G
    A0[MECH, MECH] = _detuned_block(derived.gamma_m, derived.omega_m0)
    A0[5, 2] = derived.G

    A_cos = np.zeros((6, 6))
    A_sin = np.zeros((6, 6))
    A_cos[OPO, OPO] = abs(eps) * _pump_block(theta)
    A_sin[OPO, OPO] = abs(eps) * _pump_block(theta + np.pi / 2)
    if Delta_s == 0.0:
        # pump is static in the laser frame
        A0 = A0 + A_cos
        A_cos = np.zeros((6, 6))
        A_sin = np.zeros((6, 6))

    # inputs: OPO vacuum quadratures, membrane thermal quadratures
    B = np.zeros((6, 4))
    B[OPO, 0:2] = -np.sqrt(gamma_o) * np.eye(2)
    B[CAV, 0:2] = np.sqrt(2 * derived.kappa) * np.eye(2)
    B[MECH, 2:4] = np.sqrt(2 * derived.gamma_m) * np.eye(2)
    S = np.diag([0.5, 0.5, derived.n_th + 0.5, derived.n_th + 0.5])
    sigma0 = np.diag([0.5, 0.5, 0.5, 0.5, derived.n_th + 0.5, derived.n_th + 0.5])

    fastest = max(derived.kappa, derived.omega_m0, opo.b_y, abs(derived.Delta))
    logger.debug("cascade: omega_res=%.12g Delta_s=%.6g |eps|=%.6g gamma_o=%.6g", omega_res, Delta_s, abs(eps), gamma_o)
    return LinearModel(
        labels=LABELS,
        A0=A0,
        A_cos=A_cos,
        A_sin=A_sin,
        drive_freq=2 * Delta_s,
        B=B,
        S=S,
        sigma0=sigma0,
        frame_freq=-Delta_s,
        min_timescale=1.0 / fastest,
        omega_res=omega_res,
    )


def build_source_model(spec: SqueezingSpec) -> LinearModel:
    """OPO on its own, in the frame where the pump is static."""
    opo = source_parameters(spec)
    if opo is None:
        raise MissingSourceError("squeezing spec has no OPO parameters")
    eps = complex(opo.epsilon)
    A0 = -opo.gamma_o / 2 * np.eye(2) + abs(eps) * _pump_block(np.angle(eps))
    zero = np.zeros((2, 2))
    return LinearModel(
        labels=LABELS[:2],
        A0=A0,
        A_cos=zero,
        A_sin=zero,
        B=-np.sqrt(opo.gamma_o) * np.eye(2),
        S=0.5 * np.eye(2),
        sigma0=0.5 * np.eye(2),
        mechanics=(0, 1),
        source=(0, 1),
        min_timescale=1.0 / opo.b_y,
    )


def is_hurwitz(A: np.ndarray) -> bool:
    return bool(np.max(linalg.eigvals(A).real) < 0)


def lyapunov_steady(A: np.ndarray, D: np.ndarray) -> Covariance:
    """
    Solve A Sigma + Sigma A^T + D = 0 through its vectorized form
    (I kron A + A kron I) vec(Sigma) = -vec(D).
    """
    A = np.asarray(A, dtype=float)
    D = np.asarray(D, dtype=float)
    if not is_hurwitz(A):
        raise InstabilityError("dynamically unstable configuration (drift has eigenvalues with Re >= 0)")
    n = A.shape[0]
    eye = np.eye(n)
    K = np.kron(eye, A) + np.kron(A, eye)
    lu = linalg.lu_factor(K)
    sigma = linalg.lu_solve(lu, -D.reshape(-1, order="F")).reshape((n, n), order="F")
    sigma = (sigma + sigma.T) / 2

    residual = np.linalg.norm(A @ sigma + sigma @ A.T + D)
    scale = np.linalg.norm(A) * np.linalg.norm(sigma) + np.linalg.norm(D)
    if residual > 1e-10 * scale:
        raise ConvergenceError(f"Lyapunov residual {residual:.3g} exceeds 1e-10 of scale {scale:.3g}")
    return Covariance(sigma=sigma)


def _van_loan(A: np.ndarray, D: np.ndarray, t: float) -> Tuple[np.ndarray, np.ndarray]:
    # Phi = e^{A t}, Q = int_0^t e^{A s} D e^{A^T s} ds
    n = A.shape[0]
    block = np.zeros((2 * n, 2 * n))
    block[:n, :n] = -A
    block[:n, n:] = D
    block[n:, n:] = A.T
    F = linalg.expm(block * t)
    Phi = F[n:, n:].T
    Q = Phi @ F[:n, n:]
    return Phi, (Q + Q.T) / 2


def _unpack(packed: np.ndarray, n: int, iu: Tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    M = np.zeros((n, n))
    M[iu] = packed
    return M + M.T - np.diag(np.diag(M))


def _period_map(
    model: LinearModel,
    times: Sequence[float],
    propagator: str = "auto",
    rtol: Optional[float] = None,
    atol: Optional[float] = None,
) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """
    Phi(t) and Q(t) from t = 0 at each requested time in [0, period].
    """
    n = model.dim
    D = model.D
    if propagator == "auto":
        propagator = "expm" if model.is_static else "ode"
    if propagator == "expm":
        if not model.is_static:
            raise ValueError("matrix-exponential propagation needs a time-independent drift")
        pairs = [_van_loan(model.A0, D, t) for t in times]
        return [p[0] for p in pairs], [p[1] for p in pairs]

    # time scaled by |drive_freq| so one period is 2 pi
    omega = abs(model.drive_freq) if model.drive_freq != 0.0 else 2 * np.pi / model.period
    sign = np.sign(model.drive_freq) if model.drive_freq != 0.0 else 0.0
    A0, Ac, As, Ds = model.A0 / omega, model.A_cos / omega, model.A_sin / omega, D / omega
    iu = np.triu_indices(n)

    def rhs(tau: float, y: np.ndarray) -> np.ndarray:
        A = A0 + Ac * np.cos(sign * tau) + As * np.sin(sign * tau)
        Phi = y[: n * n].reshape(n, n)
        AQ = A @ _unpack(y[n * n:], n, iu)
        return np.concatenate([(A @ Phi).ravel(), (AQ + AQ.T + Ds)[iu]])

    timescale = model.min_timescale or 1.0 / max(np.linalg.norm(model.A0, 2), 1e-300)
    max_step = config.MAX_STEP_FRACTION * min(timescale, model.period / 64) * omega
    scaled = np.asarray(times, dtype=float) * omega
    y0 = np.concatenate([np.eye(n).ravel(), np.zeros(len(iu[0]))])
    sol = integrate.solve_ivp(
        rhs,
        (0.0, float(scaled[-1])),
        y0,
        method="DOP853",
        t_eval=scaled,
        rtol=rtol or config.ODE_RTOL,
        atol=atol or config.ODE_ATOL,
        max_step=max_step,
    )
    if not sol.success:
        raise ConvergenceError(f"period integration failed: {sol.message}")
    logger.debug("period map: %d RHS evaluations", sol.nfev)
    Phis = [sol.y[: n * n, k].reshape(n, n) for k in range(len(scaled))]
    Qs = [_unpack(sol.y[n * n:, k], n, iu) for k in range(len(scaled))]
    return Phis, Qs


def _monodromy_stable(model: LinearModel, Phi_T: np.ndarray) -> Tuple[bool, np.ndarray]:
    multipliers = linalg.eigvals(Phi_T)
    if model.is_static:
        return is_hurwitz(model.A0), multipliers
    return bool(np.max(np.abs(multipliers)) < 1 - FLOQUET_MARGIN), multipliers


def floquet_stability(model: LinearModel) -> Tuple[bool, np.ndarray]:
    """
    Floquet multipliers (eigenvalues of the one-period monodromy) and the stability flag.

    Time-independent models use the Hurwitz test on A0.
    """
    if model.is_static:
        Phi_T = linalg.expm(model.A0 * model.period)
    else:
        Phi_T = _period_map(model, [model.period])[0][0]
    return _monodromy_stable(model, Phi_T)


def periodic_lyapunov_steady(
    model: LinearModel,
    tol: Optional[float] = None,
    phase_samples: Optional[int] = None,
    max_periods: Optional[int] = None,
    propagator: str = "auto",
    rtol: Optional[float] = None,
) -> List[Covariance]:
    """
    Periodic steady-state covariance sampled at ``phase_samples`` times across one drive period.

    Starting from ``model.sigma0`` the stroboscopic map is squared until two
    successive iterates differ by less than tol in relative Frobenius norm.
    """
    tol = config.PERIODIC_TOL if tol is None else tol
    phase_samples = max(64, phase_samples or config.PHASE_SAMPLES)
    max_periods = max_periods or config.MAX_PERIODS

    period = model.period
    times = np.arange(phase_samples + 1) * period / phase_samples
    Phis, Qs = _period_map(model, times, propagator=propagator, rtol=rtol)
    Phi, Q = Phis[-1], Qs[-1]

    stable, multipliers = _monodromy_stable(model, Phi)
    if not stable:
        raise InstabilityError(
            f"dynamically unstable configuration (max |Floquet multiplier| = {np.max(np.abs(multipliers)):.12g})"
        )

    sigma0 = model.sigma0
    current = Phi @ sigma0 @ Phi.T + Q
    periods = 1
    while True:
        Q = Phi @ Q @ Phi.T + Q
        Phi = Phi @ Phi
        periods *= 2
        if periods > max_periods:
            raise ConvergenceError(f"no periodic steady state within {max_periods} drive periods")
        updated = Phi @ sigma0 @ Phi.T + Q
        change = np.linalg.norm(updated - current)
        current = updated
        if change < tol * np.linalg.norm(current):
            break
    logger.debug("periodic steady state after %d periods (doubling)", periods)

    sigma = (current + current.T) / 2
    samples = []
    for t, Phi_t, Q_t in zip(times[:-1], Phis[:-1], Qs[:-1]):
        s = Phi_t @ sigma @ Phi_t.T + Q_t
        samples.append(Covariance(sigma=(s + s.T) / 2, time_tag=float(t)))
    return samples


def two_time_correlator(A: np.ndarray, sigma_ss: np.ndarray, tau: float) -> np.ndarray:
    """<X(t + tau) X(t)^T> of the stationary state, e^{A tau} Sigma for tau >= 0."""
    if tau < 0:
        raise ValueError("tau must be >= 0; use C(-tau) = C(tau)^T")
    return linalg.expm(np.asarray(A) * tau) @ np.asarray(sigma_ss)


def opo_output_correlator(model: LinearModel, sigma_ss: np.ndarray, tau: float) -> np.ndarray:
    """
    Output quadrature correlator of the OPO for tau > 0 (the tau = 0 delta part excluded).

    The output is y = xi + sqrt(gamma_o) X_a; the OPO rows of B carry -sqrt(gamma_o).
    """
    rows = list(model.source)
    B_src = model.B[rows][:, 0:2]
    gain = -B_src[0, 0]
    prop = linalg.expm(model.A0 * tau)
    state = (prop @ sigma_ss)[np.ix_(rows, rows)]
    cross = (prop @ model.B @ model.S)[rows][:, 0:2]
    return gain**2 * state + gain * cross


def symplectic_eigenvalues(sigma: np.ndarray) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    modes = sigma.shape[0] // 2
    omega = np.kron(np.eye(modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    nu = np.sort(np.abs(linalg.eigvals(1j * omega @ sigma)))
    return nu[::2]


def is_physical(sigma: np.ndarray, tol: float = 1e-9) -> bool:
    """Uncertainty principle in the form: every symplectic eigenvalue >= 1/2."""
    return bool(np.min(symplectic_eigenvalues(sigma)) >= 0.5 - tol)


def mech_quadrature_stats(
    covariances: Sequence[Covariance],
    frame_freq: float,
    block: Tuple[int, int] = (4, 5),
    phase_offset: float = 0.0,
) -> QuadratureStats:
    """
    Mechanical quadrature statistics in the frame rotating at ``frame_freq``.

    The 2x2 block of each sample is rotated by frame_freq * t + phase_offset and
    the results averaged; eigenvalues of the average give the extrema over phi.
    micromotion_pp is the peak-to-peak spread of the per-sample minimum variance.
    """
    idx = list(block)
    rotated = []
    for cov in covariances:
        R = _rotation(frame_freq * cov.time_tag + phase_offset)
        rotated.append(R @ cov.sigma[np.ix_(idx, idx)] @ R.T)
    mean = np.mean(rotated, axis=0)
    mean = (mean + mean.T) / 2

    values, vectors = np.linalg.eigh(mean)
    v = vectors[:, 0]
    # X_phi = cos(phi) x - sin(phi) p
    phi_star = float(np.arctan2(-v[1], v[0]) % np.pi)
    per_sample = [np.linalg.eigvalsh(r)[0] for r in rotated]
    micromotion = float(np.max(per_sample) - np.min(per_sample))

    def variance_of_phi(phi):
        phi = np.asarray(phi, dtype=float)
        c, s = np.cos(phi), -np.sin(phi)
        return mean[0, 0] * c**2 + 2 * mean[0, 1] * c * s + mean[1, 1] * s**2

    return make_stats(values[0], values[1], phi_star, variance_of_phi, micromotion)
