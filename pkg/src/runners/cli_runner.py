"""
Command line front end: parses the configuration, dispatches one experiment
family and writes its report.
"""

import argparse
import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from src.handlers.load_variables_handler import (
    COMMANDS,
    DEFAULT_CONFIG_PATH,
    get_thread_cap,
    load_json,
    parse_run_config,
)
from src.handlers.logger_handler import setup_logger
from src.handlers.save_data_handler import write_report
from src.radial.bubble_energy import (
    bubble_energy,
    energy_scale,
    fit_expansion,
    mass_predictions,
)
from src.radial.bubble_ode import BubbleParams, solve_bubble, w_gamma_extract
from src.radial.correction_functions import integ5_target, solve_w1
from src.radial.moment_integrals import moment_integrals
from src.test_functions.barycenter import (
    Barycenter,
    TestFunctionParams,
    build_phi,
    lowsublevel_slope,
    peak_scale,
    reference_energies,
)
from src.test_functions.kr_distance import kr_distance
from src.test_functions.phi_energies import (
    mt_deficit,
    normalized_density,
    phi_energies,
)
from src.torus.continuation import continue_branch
from src.torus.diagnostics import blow_up_diagnostics, plant_bubble
from src.torus.solvers import solve_min, solve_newton
from src.torus.torus_field import TorusField
from src.utils.errors import (
    MtlabError,
    StepCollapseError,
    UnknownCommandError,
    exit_code_for,
)
from src.utils.utils import records_to_frame, run_in_pool

logger = logging.getLogger(__name__)

PI = math.pi

COMMAND_HELP = {
    "bubble": "Radial bubble profiles and their convergence to the Liouville profile.",
    "moments": "The six moment integrals of the Liouville profile.",
    "w1": "Laplacian mass of the second correction against its closed form.",
    "energy-expansion": (
        "Bubble energy product fitted in powers of gamma^-p. The default gammas"
        " with extra_terms=2 separate c2 from the higher powers; a short set such"
        " as 6,8,10,12 cannot."
    ),
    "testfn": (
        "Barycenter test functions on a grid. The default gammas 2.5,3,3.5 are"
        " resolved at n=512; gammas 6,8,10 need a grid of at least n=4096"
        " (2^12) so that every support spans four cells."
    ),
    "solve": "Descent and Newton polish for one positive solution.",
    "continue": "Branch continuation in beta or p with blow-up detection.",
    "diagnose": "Peak diagnostics of a planted bubble or a computed solution.",
}


@dataclass
class CommandResult:
    """Tables, scalar summary and plot recipe produced by one command."""

    tables: dict
    summary: dict = field(default_factory=dict)
    plot_recipe: str = ""


def _bubble_row(task):
    gamma, p, h0, s_max, rtol, atol = task
    log_mu = energy_scale(gamma, p)
    params = BubbleParams.from_scale(gamma, p, math.exp(log_mu), h0=h0)
    profile = solve_bubble(params, s_max, rtol=rtol, atol=atol)
    extract = w_gamma_extract(profile)
    gap = np.abs(profile.z_values - profile.t_values)
    return {
        "gamma": gamma,
        "p": p,
        "mu": params.mu,
        "log_lambda": params.log_lambda,
        "z_gap": float(np.max(gap)),
        "w_sup_ratio": extract.sup_ratio,
        "log_profile_gap_scaled": extract.log_profile_gap_scaled,
    }


def run_bubble(config):
    """Profile convergence of the bubble towards the Liouville profile."""
    p = config.get("p")
    tasks = [
        (
            gamma,
            p,
            config.get("h0"),
            config.get("s_max"),
            config.get("rtol"),
            config.get("atol"),
        )
        for gamma in config.get("gammas")
    ]
    rows = run_in_pool(_bubble_row, tasks, get_thread_cap())
    frame = records_to_frame(rows, sort_by=["gamma"])
    gaps = frame["z_gap"].tolist()
    powers = [gamma**p for gamma in frame["gamma"]]
    # gap ratio per doubling of gamma^p, 0 on the first row
    rates = [
        (later / earlier) ** (math.log(2.0) / math.log(power_later / power_earlier))
        for earlier, later, power_earlier, power_later in zip(
            gaps, gaps[1:], powers, powers[1:]
        )
    ]
    frame["gap_rate_per_doubling"] = [0.0] + rates
    recipe = "x: gamma^p (log)\ny: z_gap (log)\nexpect: slope -1\n"
    return CommandResult({"main": frame}, {"p": p}, recipe)


def run_moments(config):
    """The six exact moment integrals."""
    moments = moment_integrals(tol=config.get("tol"), s_tail=config.get("s_tail"))
    frame = pd.DataFrame(
        [
            {
                "name": moment.name,
                "value": moment.value,
                "target": moment.target,
                "rel_err": moment.rel_err,
                "error_estimate": moment.error_estimate,
            }
            for moment in moments
        ]
    )
    summary = {"max_rel_err": float(frame["rel_err"].max())}
    recipe = "bar: name vs rel_err (log)\n"
    return CommandResult({"main": frame}, summary, recipe)


def _w1_row(task):
    p, s_max, rtol, atol = task
    solution = solve_w1(p, s_max=s_max, rtol=rtol, atol=atol)
    target = integ5_target(p)
    return {
        "p": p,
        "value": solution.laplacian_mass,
        "target": target,
        "rel_err": abs(solution.laplacian_mass - target) / abs(target),
        "far_field_constant": solution.far_field_constant,
    }


def run_w1(config):
    """Total Laplacian mass of the second correction against its closed form."""
    tasks = [
        (p, config.get("s_max"), config.get("rtol"), config.get("atol"))
        for p in config.get("ps")
    ]
    rows = run_in_pool(_w1_row, tasks, get_thread_cap())
    frame = records_to_frame(rows, sort_by=["p"])
    recipe = "x: p\ny: value, target\n"
    summary = {"max_rel_err": float(frame["rel_err"].max())}
    return CommandResult({"main": frame}, summary, recipe)


def _energy_row(task):
    gamma, p, h0, rule, rtol, atol = task
    energy = bubble_energy(gamma, p, h0=h0, radius_rule=rule, rtol=rtol, atol=atol)
    predicted = mass_predictions(gamma, p)
    return {
        "gamma": gamma,
        "p": p,
        "mass_weighted": energy.mass_weighted,
        "mass_plain": energy.mass_plain,
        "product": energy.product,
        "excess": energy.excess,
        "predicted_weighted": predicted["mass_weighted"],
        "predicted_plain": predicted["mass_plain"],
        "predicted_product": predicted["product"],
        "s_bar": energy.s_bar,
    }


def run_energy_expansion(config):
    """Bubble energy product and its fit on {1, gamma^-p, gamma^-2p, ...}."""
    p = config.get("p")
    gammas = config.get("gammas")
    tasks = [
        (
            gamma,
            p,
            config.get("h0"),
            config.get("radius_rule"),
            config.get("rtol"),
            config.get("atol"),
        )
        for gamma in gammas
    ]
    rows = run_in_pool(_energy_row, tasks, get_thread_cap())
    frame = records_to_frame(rows, sort_by=["gamma"])

    extra_terms = min(config.get("extra_terms"), max(0, len(gammas) - 3))
    if extra_terms < config.get("extra_terms"):
        logger.warning(
            "%d gammas support only %d extra terms, c2 absorbs the rest",
            len(gammas),
            extra_terms,
        )
        print(f"⚠️ Only {extra_terms} extra terms fitted for {len(gammas)} gammas")
    samples = list(zip(frame["gamma"], frame["product"]))
    fit = fit_expansion(samples, p, extra_terms=extra_terms)
    c2_target = 16.0 * PI * (p - 1.0) / p**2
    summary = {
        "c0": fit.c0,
        "c1": fit.c1,
        "c2": fit.c2,
        "higher": list(fit.higher),
        "extra_terms": extra_terms,
        "fit_residual": fit.residual,
        "c0_target": 4.0 * PI,
        "c2_target": c2_target,
        "c0_rel_err": abs(fit.c0 - 4.0 * PI) / (4.0 * PI),
        "c1_bound": 0.02 * abs(fit.c2) / gammas[0] ** p,
    }
    if c2_target > 0.0:
        summary["c2_rel_err"] = abs(fit.c2 - c2_target) / c2_target
    recipe = "x: gamma^-p\ny: product - 4 pi, predicted_product - 4 pi\n"
    return CommandResult({"main": frame}, summary, recipe)


def _testfn_row(task):
    gamma, p, box, n, points, weights, beta, with_kr = task
    sigma = Barycenter.build(points, weights, box)
    grid = TorusField.constant(box, n)
    params = TestFunctionParams.for_barycenter(sigma, gamma, p)
    phi = build_phi(sigma, gamma, p, grid, params)
    energies = phi_energies(phi, p, beta)
    leading = peak_scale(p) ** 2 * 4.0 * PI * sigma.k * gamma ** (2.0 - p)
    row = {
        "gamma": gamma,
        "p": p,
        "dirichlet": energies.dirichlet,
        "dirichlet_ratio": energies.dirichlet / leading,
        "l2h": energies.l2h,
        "logmass": energies.logmass,
        "j_value": energies.j_value,
        "mt_deficit": mt_deficit(
            energies.dirichlet, energies.l2h, energies.logmass, p
        ),
        "peak": float(np.max(phi.values)),
    }
    if with_kr:
        result = kr_distance(normalized_density(phi, p), sigma)
        row["kr"] = result.distance
        row["kr_residual"] = result.residual
    return row


def run_testfn(config):
    """Grid energies and KR concentration of barycenter test functions."""
    p = config.get("p")
    beta = config.get("beta_over_pi") * PI
    box = config.get("box")
    points, weights = config.get("points"), config.get("weights")
    tasks = [
        (gamma, p, box, config.get("n"), points, weights, beta, config.get("kr"))
        for gamma in config.get("gammas")
    ]
    rows = run_in_pool(_testfn_row, tasks, get_thread_cap())
    grid_frame = records_to_frame(rows, sort_by=["gamma"])

    k = len(points)
    slope = lowsublevel_slope(p, beta, k)
    sigma = Barycenter.build(points, weights, box)
    reference_rows = []
    for gamma in config.get("reference_gammas"):
        params = TestFunctionParams.for_barycenter(sigma, gamma, p)
        energies = reference_energies(gamma, p, params.taus)
        j_value = energies.functional(p, beta)
        reference_rows.append(
            {
                "gamma": gamma,
                "p": p,
                "dirichlet": energies.dirichlet,
                "l2h": energies.l2h,
                "logmass": energies.logmass,
                "j_over_gamma_p": j_value / gamma**p,
                "slope_limit": slope,
            }
        )
    reference_frame = records_to_frame(reference_rows, sort_by=["gamma"])
    summary = {"k": k, "beta": beta, "slope_limit": slope}
    recipe = (
        "x: gamma\ny: dirichlet_ratio, kr\n"
        "reference: j_over_gamma_p vs slope_limit\n"
    )
    tables = {"main": grid_frame, "reference": reference_frame}
    return CommandResult(tables, summary, recipe)


def _template(config, value):
    weight = config.get("weight")
    return TorusField.constant(
        config.get("box"), config.get("n"), value=value, h=weight
    )


def run_solve(config):
    """Descent from a constant guess followed by a Newton polish."""
    p = config.get("p")
    beta = config.get("beta_over_pi") * PI
    template = _template(config, config.get("init_value"))
    noise = config.get("noise")
    if noise > 0.0:
        rng = np.random.default_rng(config.seed)
        shape = template.values.shape
        template = template.with_values(
            template.values + noise * rng.standard_normal(shape)
        )
    coarse = solve_min(p, beta, template, tol=config.get("tol_min"))
    fine = solve_newton(p, beta, coarse.solution, tol=config.get("tol_newton"))
    frame = pd.DataFrame([coarse.to_record(), fine.to_record()])
    summary = {
        "beta_check": fine.beta_check,
        "residual_l2": fine.residual_l2,
        "two_lambda_over_max_h": 2.0 * fine.lam / float(np.max(fine.solution.h_values)),
        "multiplier_bound_ok": fine.multiplier_bound_ok,
    }
    if not fine.multiplier_bound_ok:
        print("⚠️ 2 lambda exceeds max h, the solution is suspect")
    history = pd.DataFrame(
        {
            "iteration": range(len(fine.residual_history)),
            "residual_l2": fine.residual_history,
        }
    )
    recipe = "table newton: x: iteration, y: residual_l2 (log)\n"
    return CommandResult({"main": frame, "newton": history}, summary, recipe)


def run_continue(config):
    """Branch continuation with blow-up detection."""
    p = config.get("p")
    template = _template(config, 1.0)
    record = continue_branch(
        p,
        config.get("beta_start_over_pi") * PI,
        config.get("beta_end_over_pi") * PI,
        config.get("steps"),
        template=template,
        parameter=config.get("parameter"),
        p_end=config.get("p_end"),
        ceiling=config.get("ceiling"),
        mu_floor_cells=config.get("mu_floor_cells"),
        tol=config.get("tol"),
    )
    summary = {
        "stop_reason": record.stop_reason,
        "steps": len(record.reports),
        "monotone": record.is_monotone(),
        "multiplier_bound_ok": all(r.multiplier_bound_ok for r in record.reports),
    }
    recipe = f"x: {config.get('parameter')}\ny: u_max, lambda\n"
    return CommandResult({"main": record.to_frame()}, summary, recipe)


def run_diagnose(config):
    """Peak diagnostics of a planted bubble or of a computed solution."""
    p = config.get("p")
    template = _template(config, 1.0)
    if config.get("source") == "planted":
        center = (0.5 * template.box_length, 0.5 * template.box_length)
        u, lam = plant_bubble(
            template, center, config.get("gamma"), p, config.get("mu")
        )
    else:
        beta = config.get("beta_over_pi") * PI
        report = solve_newton(p, beta, solve_min(p, beta, template).solution)
        u, lam = report.solution, report.lam
    diagnostics = blow_up_diagnostics(u, lam, p)
    summary = {
        "peaks": len(diagnostics.peaks),
        "beta_value": diagnostics.beta_value,
        "beta_excess": diagnostics.beta_excess,
    }
    if diagnostics.kr_to_dirac is not None:
        summary["kr_to_dirac"] = diagnostics.kr_to_dirac
        summary["kr_residual"] = diagnostics.kr_residual
    recipe = "table: one row per peak; compare local_mass_ratio with 1\n"
    return CommandResult({"main": diagnostics.to_frame()}, summary, recipe)


HANDLERS = {
    "bubble": run_bubble,
    "moments": run_moments,
    "w1": run_w1,
    "energy-expansion": run_energy_expansion,
    "testfn": run_testfn,
    "solve": run_solve,
    "continue": run_continue,
    "diagnose": run_diagnose,
}


def build_parser():
    """argparse front end with one subcommand per experiment family."""
    parser = argparse.ArgumentParser(
        prog="mtlab", description="Moser-Trudinger numerical experiments."
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        sub = subparsers.add_parser(
            command, help=COMMAND_HELP[command], description=COMMAND_HELP[command]
        )
        sub.add_argument(
            "--config", help="JSON configuration document or report sidecar"
        )
        sub.add_argument("--out", help="Report directory")
        sub.add_argument("--seed", type=int, help="Seed of every random draw")
        sub.add_argument("--p", type=float, help="Exponent")
        sub.add_argument("--gammas", help="Comma separated gamma list")
        sub.add_argument("--gamma", type=float, help="Single gamma")
        sub.add_argument(
            "--beta-over-pi", dest="beta_over_pi", type=float, help="beta / pi"
        )
        sub.add_argument("--n", type=int, help="Grid samples per side")
        sub.add_argument("--box", type=float, help="Torus side")
        sub.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="Override a field",
        )
        sub.add_argument("--verbose", action="store_true", help="Debug logging")
    return parser


def collect_overrides(args):
    """Turn flags into a field override mapping; --set values are parsed as JSON."""
    overrides = {}
    for key in ("p", "gamma", "beta_over_pi", "n", "box"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    if args.gammas:
        overrides["gammas"] = [
            float(item) for item in args.gammas.split(",") if item.strip()
        ]
    for item in args.set:
        key, _, raw = item.partition("=")
        try:
            overrides[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            overrides[key.strip()] = raw
    return overrides


def _write_failure(error, output_dir, command, config):
    partial = {}
    record = getattr(error, "record", None)
    if isinstance(error, StepCollapseError) and record is not None and record.reports:
        partial = {"main": record.to_frame()}
    try:
        write_report(
            partial,
            output_dir,
            command or "error",
            config=config,
            command=command,
            error=error.to_entry(),
        )
    except MtlabError as report_error:
        logger.error("Error report not written: %s", report_error)


def run(argv=None):
    """
    Execute one subcommand.
    Args:
        argv (list): Arguments without the program name.
    Returns:
        int: 0 on success, 2 on validation errors, 3 on numerical failures.
    """
    argv = list(argv or [])
    command = argv[0] if argv else None
    output_dir, config = "results", None
    try:
        if command not in COMMANDS:
            raise UnknownCommandError(
                f"unknown command '{command}', expected one of {', '.join(COMMANDS)}"
            )
        args = build_parser().parse_args(argv)
        output_dir = args.out or output_dir
        config_path = args.config
        if config_path is None and os.path.exists(DEFAULT_CONFIG_PATH):
            config_path = DEFAULT_CONFIG_PATH
        document = load_json(config_path, strict=True) if config_path else {}
        if args.seed is not None:
            document = {**document, "seed": args.seed}
        if args.out:
            document = {**document, "output_dir": args.out}
        config = parse_run_config(document, command, collect_overrides(args))
        output_dir = config.output_dir

        level = logging.DEBUG if args.verbose else logging.INFO
        setup_logger(config.logs_dir, level=level)
        logger.info("Command %s started", command)
        result = HANDLERS[command](config)
        write_report(
            result.tables,
            output_dir,
            command,
            config=config,
            summary=result.summary,
            plot_recipe=result.plot_recipe,
        )
        print(f"✅ {command} finished, report in {output_dir}")
        return 0
    except MtlabError as error:
        logger.error("Command %s failed: %s", command, error)
        print(f"❌ {command} failed: {error}")
        _write_failure(error, output_dir, command, config)
        return exit_code_for(error)
