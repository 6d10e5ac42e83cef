from enum import Enum
from typing import List, Optional, Union

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeFloat,
    PositiveFloat,
    model_validator,
)

# Relative slack on |M|^2 <= N(N+1) and on the OPO bandwidth identities
PURITY_RTOL = 1e-9


class DetuningPolicy(str, Enum):
    SIDEBAND = "sideband-cooling"
    FIXED = "fixed"


class QConvention(str, Enum):
    """
    How a mechanical quality factor maps to the amplitude decay rate gamma_m.

    energy:    Q = omega_m0 / (energy decay rate), gamma_m = omega_m0 / (2Q)
    linewidth: Q = omega_m0 / gamma_m
    """
    ENERGY = "energy"
    LINEWIDTH = "linewidth"


class CouplingDrive(BaseModel):
    """
    Drive given directly as the linearized coupling G (rad/s).
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    G: NonNegativeFloat


class PowerDrive(BaseModel):
    """
    Drive given as laser power; G follows from the steady-state intracavity amplitude.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    power: PositiveFloat
    cavity_length: PositiveFloat
    reflectivity: float = Field(ge=0.0, le=1.0)


class SystemParams(BaseModel):
    """
    Raw experimental knobs of the membrane-in-the-middle cavity, SI units and rad/s.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    omega_c: Optional[PositiveFloat] = None
    omega_m0: PositiveFloat
    mass: PositiveFloat
    kappa: PositiveFloat
    temperature: PositiveFloat
    quality_factor: Optional[PositiveFloat] = None
    gamma_m: Optional[PositiveFloat] = None
    q_convention: QConvention = QConvention.ENERGY
    drive: Union[CouplingDrive, PowerDrive]
    detuning_policy: DetuningPolicy = DetuningPolicy.SIDEBAND
    detuning: Optional[float] = None
    delta: float = 0.0

    @model_validator(mode="after")
    def _check_exclusive_fields(self) -> "SystemParams":
        if (self.quality_factor is None) == (self.gamma_m is None):
            raise ValueError("exactly one of quality_factor, gamma_m must be given")
        if self.detuning_policy is DetuningPolicy.FIXED and self.detuning is None:
            raise ValueError("detuning: required when detuning_policy is 'fixed'")
        if isinstance(self.drive, PowerDrive) and self.omega_c is None:
            raise ValueError("omega_c: required when the drive is given as power")
        return self

    @property
    def mech_damping(self) -> float:
        """Mechanical amplitude decay rate gamma_m (rad/s)."""
        if self.gamma_m is not None:
            return self.gamma_m
        if self.q_convention is QConvention.LINEWIDTH:
            return self.omega_m0 / self.quality_factor
        return self.omega_m0 / (2.0 * self.quality_factor)


class OPOParams(BaseModel):
    """
    Below-threshold degenerate OPO: cavity damping gamma_o and pump susceptibility epsilon.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    gamma_o: PositiveFloat
    epsilon: complex = 0j

    @model_validator(mode="after")
    def _below_threshold(self) -> "OPOParams":
        if abs(self.epsilon) >= self.gamma_o / 2:
            raise ValueError("epsilon: OPO at/above threshold (|epsilon| >= gamma_o/2)")
        return self

    @property
    def b_x(self) -> float:
        return self.gamma_o / 2 - abs(self.epsilon)

    @property
    def b_y(self) -> float:
        return self.gamma_o / 2 + abs(self.epsilon)


class SqueezingSpec(BaseModel):
    """
    Squeezed vacuum input: photon number N, anomalous correlation M and the two
    correlator decay rates b_x <= b_y. The OPO parameters are kept when known.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    N: NonNegativeFloat = 0.0
    M: complex = 0j
    b_x: PositiveFloat
    b_y: PositiveFloat
    opo: Optional[OPOParams] = None

    @model_validator(mode="after")
    def _check_invariants(self) -> "SqueezingSpec":
        bound = self.N * (self.N + 1)
        if abs(self.M) ** 2 - bound > PURITY_RTOL * max(1.0, bound):
            raise ValueError("M: |M|^2 exceeds N(N+1)")
        if self.b_y < self.b_x:
            raise ValueError("b_y: must not be smaller than b_x")
        if self.opo is not None:
            scale = self.opo.gamma_o
            if (abs(self.opo.b_x - self.b_x) > PURITY_RTOL * scale
                    or abs(self.opo.b_y - self.b_y) > PURITY_RTOL * scale):
                raise ValueError("opo: bandwidths inconsistent with gamma_o/2 -+ |epsilon|")
        return self

    @property
    def is_pure(self) -> bool:
        bound = self.N * (self.N + 1)
        return abs(abs(self.M) ** 2 - bound) <= PURITY_RTOL * max(1.0, bound)

    @property
    def min_variance(self) -> float:
        """White-noise minimum input quadrature variance N + 1/2 - |M|."""
        return self.N + 0.5 - abs(self.M)


class ScenarioKind(str, Enum):
    FIG3A = "fig3a_input_sweep"
    FIG3B = "fig3b_detuning_sweep"
    FIG3C = "fig3c_bandwidth_sweep"
    FIG3D = "fig3d_temperature_sweep"
    SQUASHING = "squashing"
    CUSTOM = "custom"


class Method(str, Enum):
    ANALYTIC_RSL = "analytic_rsl"
    ANALYTIC_RSL_IMPURE = "analytic_rsl_impure"
    ANALYTIC_WHITE = "analytic_white"
    ANALYTIC_FINITE_BW = "analytic_finite_bw"
    EXACT = "exact"


class AxisName(str, Enum):
    INPUT_DB = "input_db"
    DELTA = "delta"
    DELTA_NORM = "delta_norm"
    B_X = "b_x"
    B_X_NORM = "b_x_norm"
    ETA = "eta"
    TEMPERATURE = "temperature"
    G = "G"


# Axes given in Hz in scenario files
FREQUENCY_AXES = {AxisName.DELTA, AxisName.B_X, AxisName.G}
# Axes that may cross zero
SIGNED_AXES = {AxisName.DELTA, AxisName.DELTA_NORM}


class Spacing(str, Enum):
    LINEAR = "linear"
    LOG = "log"


class SweepAxis(BaseModel):
    """
    Swept variable. Frequency axes are rad/s here.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: AxisName
    start: float
    stop: float
    points: int = Field(ge=2)
    spacing: Spacing = Spacing.LINEAR

    @model_validator(mode="after")
    def _check_range(self) -> "SweepAxis":
        low = min(self.start, self.stop)
        if self.name is AxisName.INPUT_DB and low < 0:
            raise ValueError("axis: input_db must be >= 0")
        if self.name not in SIGNED_AXES and self.name is not AxisName.INPUT_DB and low <= 0:
            raise ValueError(f"axis: {self.name.value} must be positive over the whole range")
        if self.spacing is Spacing.LOG and low <= 0:
            raise ValueError("axis: log spacing needs a positive range")
        return self

    def values(self) -> np.ndarray:
        if self.spacing is Spacing.LOG:
            grid = np.geomspace(self.start, self.stop, self.points)
        else:
            grid = np.linspace(self.start, self.stop, self.points)
        return np.sort(grid)


class Scenario(BaseModel):
    """
    One sweep: base operating point, swept axis and the methods to evaluate.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: ScenarioKind = ScenarioKind.CUSTOM
    system: SystemParams
    squeezing: SqueezingSpec
    axis: SweepAxis
    methods: List[Method] = Field(default_factory=list)
    phase_samples: Optional[int] = Field(default=None, ge=64)


# ---- scenario file sections (Hz, K, kg, W, m) ----

class SystemSection(BaseModel):
    """
    [system] table of a scenario file. Frequencies in Hz.
    """
    model_config = ConfigDict(extra="forbid")

    mechanical_frequency: PositiveFloat
    mass: PositiveFloat
    kappa: PositiveFloat
    temperature: PositiveFloat
    quality_factor: Optional[PositiveFloat] = None
    gamma_m: Optional[PositiveFloat] = None
    q_convention: QConvention = QConvention.ENERGY
    G: Optional[NonNegativeFloat] = None
    power: Optional[PositiveFloat] = None
    cavity_length: Optional[PositiveFloat] = None
    reflectivity: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    optical_frequency: Optional[PositiveFloat] = None
    detuning_policy: DetuningPolicy = DetuningPolicy.SIDEBAND
    detuning: Optional[float] = None
    delta: float = 0.0

    @model_validator(mode="after")
    def _check_groups(self) -> "SystemSection":
        if self.quality_factor is not None and self.gamma_m is not None:
            raise ValueError("quality_factor and gamma_m are mutually exclusive")
        if self.quality_factor is None and self.gamma_m is None:
            raise ValueError("one of quality_factor, gamma_m is required")
        power_keys = (self.power, self.cavity_length, self.reflectivity)
        if self.G is not None and any(v is not None for v in power_keys):
            raise ValueError("G and power/cavity_length/reflectivity are mutually exclusive")
        if self.G is None and any(v is None for v in power_keys):
            raise ValueError("either G or all of power, cavity_length, reflectivity are required")
        return self


class SqueezingSection(BaseModel):
    """
    [squeezing] table. Exactly one form: OPO (gamma_o, epsilon), input dB
    (db with b_x or b_x_norm) or components (N, M_abs, b_x, b_y).
    """
    model_config = ConfigDict(extra="forbid")

    db: Optional[NonNegativeFloat] = None
    b_x: Optional[PositiveFloat] = None
    b_x_norm: Optional[PositiveFloat] = None
    b_y: Optional[PositiveFloat] = None
    gamma_o: Optional[PositiveFloat] = None
    epsilon: Optional[NonNegativeFloat] = None
    epsilon_phase: float = 0.0
    N: Optional[NonNegativeFloat] = None
    M_abs: Optional[NonNegativeFloat] = None
    M_phase: float = 0.0

    @model_validator(mode="after")
    def _check_form(self) -> "SqueezingSection":
        forms = [
            self.gamma_o is not None or self.epsilon is not None,
            self.db is not None,
            self.N is not None or self.M_abs is not None,
        ]
        if sum(forms) != 1:
            raise ValueError("give exactly one of: gamma_o+epsilon, db, N+M_abs")
        if forms[0]:
            if self.gamma_o is None or self.epsilon is None:
                raise ValueError("gamma_o and epsilon must be given together")
            if self.epsilon >= self.gamma_o / 2:
                raise ValueError("epsilon: OPO at/above threshold (epsilon >= gamma_o/2)")
        if forms[1] and (self.b_x is None) == (self.b_x_norm is None):
            raise ValueError("db needs exactly one of b_x, b_x_norm")
        if forms[2] and (self.N is None or self.M_abs is None or self.b_x is None or self.b_y is None):
            raise ValueError("component form needs N, M_abs, b_x and b_y")
        return self


class AxisSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: AxisName
    start: float
    stop: float
    points: int = Field(ge=2)
    spacing: Spacing = Spacing.LINEAR


class ScenarioSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: ScenarioKind = ScenarioKind.CUSTOM
    axis: AxisSection
    methods: List[Method] = Field(default_factory=list)
    eta: Optional[PositiveFloat] = None
    phase_samples: Optional[int] = Field(default=None, ge=64)


class ConfigFile(BaseModel):
    """
    Whole scenario file after presets have been merged in.
    """
    model_config = ConfigDict(extra="forbid")

    system: SystemSection
    squeezing: SqueezingSection
    scenario: ScenarioSection
