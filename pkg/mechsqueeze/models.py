from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from mechsqueeze.exceptions import NotDerivedError


class DerivedParams(BaseModel):
    """
    Secondary quantities of an operating point. Fields of the power-drive chain
    (g, E, c_ss, b_ss, bare_detuning) stay None when G is given directly.
    """
    model_config = ConfigDict(frozen=True)

    omega_m0: float
    kappa: float
    gamma_m: float
    n_th: float
    eta: float
    G: float
    Delta: float
    delta: float = 0.0
    xbar_m: float
    g: Optional[float] = None
    E: Optional[float] = None
    c_ss: Optional[complex] = None
    b_ss: Optional[complex] = None
    bare_detuning: Optional[float] = None
    power_driven: bool = False

    def require(self, name: str) -> Any:
        """Return a derived field, raising NotDerivedError when it was not computed."""
        value = getattr(self, name)
        if value is None:
            raise NotDerivedError(f"{name} is not derived when the drive is given as a coupling G")
        return value


class CoolingRates(BaseModel):
    model_config = ConfigDict(frozen=True)

    Gamma: float
    gamma_eff: float
    Omega: float
    omega_m: float
    gamma_m: float
    iterations: int = 0


class QuadratureForm(BaseModel):
    """
    Closed-form quadrature variance V(phi) = offset - scale * Re{M exp(2i phi)}.
    """
    model_config = ConfigDict(frozen=True)

    offset: float
    scale: float
    M: complex

    def __call__(self, phi):
        return self.offset - self.scale * np.real(self.M * np.exp(2j * np.asarray(phi)))


class VarianceTable(BaseModel):
    """
    V(phi) sampled on a uniform grid over [0, pi).
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    phi: np.ndarray
    values: np.ndarray


class QuadratureStats(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    variance_of_phi: Callable[..., Any] = Field(exclude=True, repr=False)
    V_min: float
    V_max: float
    phi_star: float
    squeeze_db: float
    occupancy: float
    micromotion_pp: Optional[float] = None


class LinearModel(BaseModel):
    """
    Linear Gaussian model dX = A(t) X dt + B dW with
    A(t) = A0 + A_cos cos(drive_freq t) + A_sin sin(drive_freq t)
    and input noise spectral matrix S.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    labels: Tuple[str, ...]
    A0: np.ndarray
    A_cos: np.ndarray
    A_sin: np.ndarray
    drive_freq: float = 0.0
    B: np.ndarray
    S: np.ndarray
    sigma0: np.ndarray
    # readout frame rotation of the mechanical block (rad/s)
    frame_freq: float = 0.0
    mechanics: Tuple[int, int] = (4, 5)
    source: Tuple[int, int] = (0, 1)
    min_timescale: Optional[float] = None
    omega_res: Optional[float] = None

    @property
    def dim(self) -> int:
        return self.A0.shape[0]

    @property
    def D(self) -> np.ndarray:
        D = self.B @ self.S @ self.B.T
        return (D + D.T) / 2

    @property
    def is_static(self) -> bool:
        return not (np.any(self.A_cos) or np.any(self.A_sin))

    @property
    def period(self) -> float:
        if self.drive_freq != 0.0:
            return 2 * np.pi / abs(self.drive_freq)
        return 2 * np.pi / max(np.linalg.norm(self.A0, 2), 1e-300)

    def drift(self, t: float) -> np.ndarray:
        if self.is_static:
            return self.A0
        w = self.drive_freq * t
        return self.A0 + self.A_cos * np.cos(w) + self.A_sin * np.sin(w)


class Covariance(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    sigma: np.ndarray
    frame_tag: str = "laser"
    time_tag: float = 0.0


class SweepRow(BaseModel):
    axis: float
    method: str
    V_min: Optional[float] = None
    V_max: Optional[float] = None
    phi_star_rad: Optional[float] = None
    squeeze_db: Optional[float] = None
    occupancy: Optional[float] = None
    micromotion_pp: Optional[float] = None
    stable: bool = True
    error: Optional[str] = None


class SweepResult(BaseModel):
    rows: List[SweepRow] = Field(default_factory=list)
    metadata: Dict[str, Any] = Field(default_factory=dict)


class SquashingReport(BaseModel):
    """
    Variance imbalance (V_max - V_min) / V_mean under squeezed drive and the
    occupancy of the unsqueezed baseline.
    """
    input_db: float
    imbalance_analytic: float
    imbalance_white: float
    imbalance_exact: Optional[float] = None
    imbalance_unsqueezed_exact: Optional[float] = None
    baseline_occupancy_analytic: float
    baseline_occupancy_exact: Optional[float] = None
    error: Optional[str] = None
