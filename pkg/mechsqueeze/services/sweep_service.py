import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from mechsqueeze import __version__, config
from mechsqueeze.exceptions import ConfigError, MissingSourceError, NumericalError
from mechsqueeze.models import (
    CoolingRates,
    DerivedParams,
    QuadratureStats,
    SquashingReport,
    SweepResult,
    SweepRow,
)
from mechsqueeze.schemas import (
    AxisName,
    CouplingDrive,
    Method,
    Scenario,
    SqueezingSpec,
    SystemParams,
)
from mechsqueeze.services import analytics_service as analytics
from mechsqueeze.services import dynamics_service as dynamics
from mechsqueeze.services.params_service import derive_params
from mechsqueeze.services.squeezing_service import nm_to_opo, squeeze_db_of

logger = logging.getLogger(__name__)

INPUT_DB_DEFINITION = (
    "-10 log10(V_min / (1/2)) with V_min = N + 1/2 - |M|, "
    "the white-noise minimum quadrature variance of the squeezed input"
)


def resolve_operating_point(system: SystemParams) -> Tuple[DerivedParams, CoolingRates]:
    derived = derive_params(system)
    rates = analytics.cooling_rates(derived.G, derived.kappa, derived.omega_m0, derived.gamma_m)
    return derived, rates


def rescale_eta(system: SystemParams, eta: float) -> SystemParams:
    """
    Set kappa = eta * omega_m0 keeping G^2/kappa fixed, so the cooling rate stays comparable.
    """
    if not isinstance(system.drive, CouplingDrive):
        raise ConfigError("eta rescaling needs the drive given as a coupling G")
    kappa = eta * system.omega_m0
    G = system.drive.G * np.sqrt(kappa / system.kappa)
    return system.model_copy(update={"kappa": kappa, "drive": CouplingDrive(G=G)})


def _with_bandwidth(spec: SqueezingSpec, b_x: float) -> SqueezingSpec:
    if spec.opo is not None or spec.N == 0:
        return nm_to_opo(squeeze_db_of(spec), b_x, phase=float(np.angle(spec.M)))
    ratio = spec.b_y / spec.b_x
    return spec.model_copy(update={"b_x": b_x, "b_y": b_x * ratio})


def apply_axis(scenario: Scenario, value: float) -> Tuple[SystemParams, SqueezingSpec]:
    """Operating point of a scenario at one axis value."""
    system, spec = scenario.system, scenario.squeezing
    name = scenario.axis.name
    if name is AxisName.INPUT_DB:
        spec = nm_to_opo(value, spec.b_x, phase=float(np.angle(spec.M)))
    elif name is AxisName.DELTA:
        system = system.model_copy(update={"delta": value})
    elif name is AxisName.DELTA_NORM:
        _, rates = resolve_operating_point(system)
        system = system.model_copy(update={"delta": value * rates.gamma_eff})
    elif name is AxisName.B_X:
        spec = _with_bandwidth(spec, value)
    elif name is AxisName.B_X_NORM:
        spec = _with_bandwidth(spec, value * system.omega_m0)
    elif name is AxisName.ETA:
        system = rescale_eta(system, value)
    elif name is AxisName.TEMPERATURE:
        system = system.model_copy(update={"temperature": value})
    elif name is AxisName.G:
        system = system.model_copy(update={"drive": CouplingDrive(G=value)})
    return system, spec


def evaluate_method(
    method: Method,
    system: SystemParams,
    spec: SqueezingSpec,
    phase_samples: Optional[int] = None,
) -> Tuple[QuadratureStats, bool]:
    """
    Mechanical quadrature statistics of one method at one operating point,
    with the dynamical stability flag.
    """
    derived, rates = resolve_operating_point(system)
    G, kappa, gamma_m, n_th = derived.G, derived.kappa, derived.gamma_m, derived.n_th

    if method is Method.ANALYTIC_RSL:
        form = analytics.white_rsl_form(spec, rates, n_th)
    elif method is Method.ANALYTIC_RSL_IMPURE:
        form = analytics.rsl_impure_form(spec, rates, n_th, derived.eta)
    elif method is Method.ANALYTIC_WHITE:
        form = analytics.white_general_form(spec, G, kappa, rates, gamma_m, n_th)
    elif method is Method.ANALYTIC_FINITE_BW:
        form = analytics.finite_bandwidth_form(spec, G, kappa, rates, gamma_m, n_th)
    else:
        model = dynamics.build_cascade(derived, rates, spec, system.delta)
        samples = dynamics.periodic_lyapunov_steady(model, phase_samples=phase_samples)
        return dynamics.mech_quadrature_stats(samples, model.frame_freq, model.mechanics), True
    return analytics.quadrature_extrema(form), True


def evaluate_point(
    axis_value: float,
    system: SystemParams,
    spec: SqueezingSpec,
    methods: List[Method],
    phase_samples: Optional[int] = None,
) -> List[SweepRow]:
    """
    One row per method. Numerical failures become rows carrying the error.
    """
    rows = []
    for method in methods:
        try:
            stats, stable = evaluate_method(method, system, spec, phase_samples)
        except (NumericalError, MissingSourceError) as exc:
            logger.warning("%s failed at axis=%g: %s", method.value, axis_value, exc)
            rows.append(SweepRow(axis=axis_value, method=method.value, stable=False, error=str(exc)))
            continue
        rows.append(SweepRow(
            axis=axis_value,
            method=method.value,
            V_min=stats.V_min,
            V_max=stats.V_max,
            phi_star_rad=stats.phi_star,
            squeeze_db=stats.squeeze_db,
            occupancy=stats.occupancy,
            micromotion_pp=stats.micromotion_pp,
            stable=stable,
        ))
    return rows


def _evaluate_task(scenario: Scenario, index: int, value: float) -> Tuple[int, List[SweepRow]]:
    system, spec = apply_axis(scenario, value)
    return index, evaluate_point(value, system, spec, scenario.methods, scenario.phase_samples)


def describe_spec(spec: SqueezingSpec) -> Dict[str, Any]:
    described = {
        "N": spec.N,
        "M_abs": abs(spec.M),
        "M_phase": float(np.angle(spec.M)),
        "b_x": spec.b_x,
        "b_y": spec.b_y,
        "input_db": squeeze_db_of(spec),
    }
    if spec.opo is not None:
        described.update(
            gamma_o=spec.opo.gamma_o,
            epsilon_abs=abs(spec.opo.epsilon),
            epsilon_phase=float(np.angle(spec.opo.epsilon)),
        )
    return described


def describe_operating_point(system: SystemParams) -> Dict[str, Any]:
    derived, rates = resolve_operating_point(system)
    point = derived.model_dump(mode="json", exclude={"c_ss", "b_ss"})
    if derived.c_ss is not None:
        point["c_ss_abs"] = abs(derived.c_ss)
        point["b_ss_abs"] = abs(derived.b_ss)
    return {
        "system": system.model_dump(mode="json"),
        "derived": point,
        "cooling_rates": rates.model_dump(mode="json"),
    }


def build_metadata(scenario: Scenario) -> Dict[str, Any]:
    return {
        "tool": "mechsqueeze",
        "version": __version__,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "scenario": scenario.kind.value,
        "axis": scenario.axis.model_dump(mode="json"),
        "methods": [m.value for m in scenario.methods],
        "frequency_unit": "rad/s",
        "input_db_definition": INPUT_DB_DEFINITION,
        "phase_samples": scenario.phase_samples or config.PHASE_SAMPLES,
        "squeezing": describe_spec(scenario.squeezing),
        **describe_operating_point(scenario.system),
    }


def run_scenario(scenario: Scenario, jobs: Optional[int] = None, progress: bool = False) -> SweepResult:
    """
    Evaluate every method at every axis point.

    Rows are ordered by axis value and then by the scenario's method order,
    identically for serial and parallel runs.
    """
    jobs = jobs or config.JOBS
    if scenario.axis.name is AxisName.ETA and not isinstance(scenario.system.drive, CouplingDrive):
        raise ConfigError("axis eta needs the drive given as a coupling G")
    values = scenario.axis.values()
    logger.info("scenario %s: %d points x %d methods, %d job(s)",
                scenario.kind.value, len(values), len(scenario.methods), jobs)

    results: Dict[int, List[SweepRow]] = {}
    with tqdm(total=len(values), desc=scenario.kind.value, disable=not progress) as bar:
        if jobs <= 1:
            for index, value in enumerate(values):
                results[index] = _evaluate_task(scenario, index, float(value))[1]
                bar.update(1)
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futures = [pool.submit(_evaluate_task, scenario, i, float(v)) for i, v in enumerate(values)]
                for future in as_completed(futures):
                    index, rows = future.result()
                    results[index] = rows
                    bar.update(1)

    rows = [row for index in range(len(values)) for row in results[index]]
    return SweepResult(rows=rows, metadata=build_metadata(scenario))


def _imbalance(stats: QuadratureStats) -> float:
    return (stats.V_max - stats.V_min) / ((stats.V_max + stats.V_min) / 2)


def squashing_report(system: SystemParams, input_db: float = 6.0, exact: bool = True) -> SquashingReport:
    """
    Variance imbalance of the membrane under squeezed drive, analytic and exact,
    and the occupancy of the unsqueezed baseline.
    """
    derived, rates = resolve_operating_point(system)
    b_x = config.WHITE_BANDWIDTH_FACTOR * system.omega_m0
    spec = nm_to_opo(input_db, b_x)
    args = (derived.G, derived.kappa, rates, derived.gamma_m, derived.n_th)

    rsl = analytics.quadrature_extrema(analytics.white_rsl_form(spec, rates, derived.n_th))
    white = analytics.quadrature_extrema(analytics.white_general_form(spec, *args))
    n_f, _ = analytics.residual_occupancy(*args)
    report = dict(
        input_db=input_db,
        imbalance_analytic=_imbalance(rsl),
        imbalance_white=_imbalance(white),
        baseline_occupancy_analytic=n_f,
    )
    if exact:
        try:
            squeezed, _ = evaluate_method(Method.EXACT, system, spec)
            baseline, _ = evaluate_method(Method.EXACT, system, nm_to_opo(0.0, b_x))
            report.update(
                imbalance_exact=_imbalance(squeezed),
                imbalance_unsqueezed_exact=_imbalance(baseline),
                baseline_occupancy_exact=baseline.occupancy,
            )
        except NumericalError as exc:
            logger.warning("exact squashing evaluation failed: %s", exc)
            report["error"] = str(exc)
    return SquashingReport(**report)
