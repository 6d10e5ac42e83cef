"""
Command line entry point.

    mechsqueeze analytic --config fig3a.toml
    mechsqueeze exact --config fig3a.toml
    mechsqueeze sweep --config fig3b.toml --out fig3b.csv --format csv --jobs 4
    mechsqueeze validate-source --config fig3a.toml
    mechsqueeze squashing

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional

import numpy as np

from mechsqueeze import __version__, config
from mechsqueeze.exceptions import ConfigError, MissingSourceError, NumericalError
from mechsqueeze.models import QuadratureStats
from mechsqueeze.schemas import Method, ScenarioKind
from mechsqueeze.services import analytics_service as analytics
from mechsqueeze.services import dynamics_service as dynamics
from mechsqueeze.services import io_service, sweep_service
from mechsqueeze.services.squeezing_service import input_quadrature_correlator

logger = logging.getLogger("mechsqueeze")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

ANALYTIC_METHODS = [
    Method.ANALYTIC_RSL,
    Method.ANALYTIC_RSL_IMPURE,
    Method.ANALYTIC_WHITE,
    Method.ANALYTIC_FINITE_BW,
]
# Source check: tolerance on the correlator deviation, natural units
SOURCE_TOL = 1e-6


def _stats_dict(stats: QuadratureStats) -> Dict[str, Any]:
    return stats.model_dump(mode="json")


def _emit(payload: Dict[str, Any]) -> None:
    print(json.dumps(payload, indent=2))


def cmd_analytic(args: argparse.Namespace) -> int:
    system, spec, _ = io_service.load_config(args.config)
    derived, rates = sweep_service.resolve_operating_point(system)
    n_f, floor = analytics.residual_occupancy(derived.G, derived.kappa, rates, derived.gamma_m, derived.n_th)
    N_prime = analytics.effective_impurity(spec.N, derived.eta)
    payload = {
        "cooling_rates": rates.model_dump(mode="json"),
        "n_th": derived.n_th,
        "eta": derived.eta,
        "baseline_occupancy": n_f,
        "radiative_floor": floor,
        "N_prime": N_prime,
        "N_prime_mixed": analytics.is_mixed(N_prime, spec.M),
        "methods": {},
    }
    for method in ANALYTIC_METHODS:
        stats, _ = sweep_service.evaluate_method(method, system, spec)
        payload["methods"][method.value] = _stats_dict(stats)
    _emit(payload)
    return EXIT_OK


def cmd_exact(args: argparse.Namespace) -> int:
    system, spec, scenario = io_service.load_config(args.config)
    stats, stable = sweep_service.evaluate_method(Method.EXACT, system, spec, scenario.phase_samples)
    _emit({"method": Method.EXACT.value, "stable": stable, **_stats_dict(stats)})
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = io_service.read_config(args.config)
    _, _, scenario = io_service.resolve_config(cfg)
    result = sweep_service.run_scenario(scenario, jobs=args.jobs, progress=not args.quiet)
    result.metadata["config"] = cfg.model_dump(mode="json")
    fmt = args.format or ("json" if str(args.out).endswith(".json") else "csv")
    io_service.write_output(result, fmt, args.out)
    failed = sum(1 for row in result.rows if row.error)
    if failed:
        logger.warning("%d row(s) recorded numerical failures", failed)
    return EXIT_OK


def cmd_validate_source(args: argparse.Namespace) -> int:
    _, spec, _ = io_service.load_config(args.config)
    model = dynamics.build_source_model(spec)
    sigma = dynamics.lyapunov_steady(model.A0, model.D).sigma
    taus = np.linspace(0.0, 10.0 / spec.b_x, args.points)[1:]
    deviation = max(
        float(np.max(np.abs(dynamics.opo_output_correlator(model, sigma, tau) - input_quadrature_correlator(spec, tau))))
        for tau in taus
    )
    _emit({"max_abs_deviation": deviation, "points": len(taus), "tolerance": SOURCE_TOL})
    if deviation > SOURCE_TOL:
        logger.error("OPO output deviates from the squeezed-input correlators by %.3g", deviation)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_squashing(args: argparse.Namespace) -> int:
    if args.config:
        system, _, _ = io_service.load_config(args.config)
    else:
        system = io_service.preset_scenario(ScenarioKind.SQUASHING).system
    report = sweep_service.squashing_report(system, input_db=args.db, exact=not args.analytic_only)
    _emit(report.model_dump(mode="json"))
    return EXIT_NUMERICAL if report.error else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mechsqueeze",
        description="Squeezing transfer from squeezed light to a laser-cooled mechanical oscillator.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analytic", help="closed-form results at the configured operating point")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("exact", help="exact periodic steady state at the configured operating point")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("sweep", help="run the configured scenario and write its table")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--jobs", type=int, default=config.JOBS)
    p.add_argument("--quiet", action="store_true", help="no progress bar")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate-source", help="check OPO output correlators against the squeezed-input model")
    p.add_argument("--config", required=True)
    p.add_argument("--points", type=int, default=200)
    p.set_defaults(func=cmd_validate_source)

    p = sub.add_parser("squashing", help="variance imbalance estimate")
    p.add_argument("--config")
    p.add_argument("--db", type=float, default=6.0)
    p.add_argument("--analytic-only", action="store_true")
    p.set_defaults(func=cmd_squashing)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else config.LOG_LEVEL,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (NumericalError, MissingSourceError) as exc:
        logger.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
