"""
Natural-parameter continuation of solutions in beta (or in p at fixed beta).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from src.radial.bubble_ode import mu_of
from src.torus.diagnostics import blow_up_diagnostics
from src.torus.solvers import solve_min, solve_newton
from src.torus.torus_field import TorusField
from src.utils.errors import InvalidParameterError, NumericalFailure, StepCollapseError

logger = logging.getLogger(__name__)

PARAMETERS = ("beta", "p")
COMPLETED = "completed"
BLOW_UP_DETECTED = "blow_up_detected"


@dataclass
class BranchRecord:
    """
    Accepted points of a branch in the order they were reached.
    Attributes:
        parameter (str): "beta" or "p".
        reports (list): SolveReport per accepted step.
        diagnostics (list): BlowUpReport per accepted step, or None.
        stop_reason (str): "completed" or "blow_up_detected".
    """

    parameter: str
    reports: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    stop_reason: str = COMPLETED

    def values(self):
        """Continuation parameter of each accepted step."""
        return [getattr(report, self.parameter) for report in self.reports]

    def is_monotone(self):
        """True when the parameter moves strictly in one direction."""
        values = self.values()
        steps = [later - earlier for earlier, later in zip(values, values[1:])]
        return all(step > 0 for step in steps) or all(step < 0 for step in steps)

    def to_frame(self):
        """One row per accepted step with the solve metadata and the leading peak."""
        rows = []
        pairs = zip(self.reports, self.diagnostics)
        for step, (report, diagnostic) in enumerate(pairs):
            row = {"step": step, **report.to_record()}
            peaks = diagnostic.peaks if diagnostic is not None else ()
            row["peaks"] = len(peaks)
            row["peak_gamma"] = peaks[0].gamma if peaks else report.u_max
            row["peak_mass_ratio"] = peaks[0].local_mass_ratio if peaks else 0.0
            row["beta_excess"] = 0.0 if diagnostic is None else diagnostic.beta_excess
            rows.append(row)
        return pd.DataFrame(rows)


def _blow_up(report, ceiling, mu_floor):
    if report.u_max > ceiling:
        logger.warning("u_max=%.6g passed the ceiling %.6g", report.u_max, ceiling)
        return True
    mu = mu_of(report.u_max, report.p, report.lam)
    if mu < mu_floor:
        logger.warning("mu=%.3e fell below %.3e", mu, mu_floor)
        return True
    return False


def _starting_point(p, beta, template, init, tol):
    if init is not None:
        return solve_newton(p, beta, init, tol=tol)
    guess = template
    if float(template.values.max()) <= 0.0:
        guess = template.with_values(np.ones_like(template.values))
    coarse = solve_min(p, beta, guess)
    return solve_newton(p, beta, coarse.solution, tol=tol)


def continue_branch(
    p,
    beta_start,
    beta_end,
    steps,
    template=None,
    parameter="beta",
    p_end=None,
    init=None,
    ceiling=8.0,
    mu_floor_cells=2.0,
    min_step_fraction=1.0 / 256.0,
    tol=1e-10,
    diagnostics=True,
):
    """
    Follow a branch of solutions with adaptive step halving.

    With parameter="beta" beta moves from beta_start to beta_end at fixed p.
    With parameter="p" p moves from p to p_end at fixed beta_start.
    Each accepted step is a converged Newton solve started from a secant predictor.
    Args:
        p (float): Exponent (start value for a p sweep).
        beta_start (float): Starting energy level.
        beta_end (float): Final energy level (ignored for a p sweep).
        steps (int): Nominal number of steps.
        template (TorusField): Grid, weight and initial guess; 64^2 unit box by default.
        parameter (str): "beta" or "p".
        p_end (float): Final exponent for a p sweep.
        init (TorusField): Field already close to the starting solution.
        ceiling (float): u_max above which blow-up is declared.
        mu_floor_cells (float): Blow-up is declared when mu drops below this many
            cells.
        min_step_fraction (float): Smallest step as a fraction of the nominal one.
        tol (float): Residual target of every Newton solve.
        diagnostics (bool): Attach blow_up_diagnostics to every step.
    Returns:
        BranchRecord: Accepted steps and stop reason.
    Raises:
        StepCollapseError: If the step shrinks below its minimum; carries the
            partial record.
    """
    if parameter not in PARAMETERS:
        raise InvalidParameterError(f"parameter must be one of {PARAMETERS}")
    if not isinstance(steps, int) or steps < 1:
        raise InvalidParameterError(f"steps must be a positive integer, got {steps}")
    if parameter == "p" and p_end is None:
        raise InvalidParameterError("a p sweep needs p_end")
    if template is None:
        template = TorusField.constant(1.0, 64, value=1.0)

    start, end = (beta_start, beta_end) if parameter == "beta" else (p, p_end)
    nominal = (end - start) / steps
    if nominal == 0.0:
        raise InvalidParameterError("start and end of the branch coincide")

    def point(value):
        return (p, value) if parameter == "beta" else (value, beta_start)

    record = BranchRecord(parameter=parameter)
    logger.info(
        "Continuation started: %s from %.6g to %.6g in %d steps",
        parameter,
        start,
        end,
        steps,
    )

    def accept(report):
        record.reports.append(report)
        diagnostic = None
        if diagnostics:
            diagnostic = blow_up_diagnostics(
                report.solution, report.lam, report.p, with_kr=False
            )
        record.diagnostics.append(diagnostic)
        return _blow_up(report, ceiling, mu_floor_cells * template.spacing)

    report = _starting_point(*point(start), template, init, tol)
    if accept(report):
        record.stop_reason = BLOW_UP_DETECTED
        return record

    current, step = start, nominal
    previous = None
    while (end - current) * math.copysign(1.0, nominal) > 1e-12 * abs(nominal):
        target = current + step
        if (end - target) * math.copysign(1.0, nominal) < 0.0:
            target = end
        guess = report.solution
        if previous is not None:
            ratio = (target - current) / (current - previous[0])
            secant = guess.values - previous[1].values
            guess = guess.with_values(guess.values + ratio * secant)
        try:
            candidate = solve_newton(*point(target), guess, tol=tol)
        except NumericalFailure as error:
            step *= 0.5
            logger.warning(
                "Step to %.6g failed (%s); halving to %.3e", target, error, step
            )
            if abs(step) < min_step_fraction * abs(nominal):
                raise StepCollapseError(
                    f"continuation step collapsed near {parameter}={current:.6g}",
                    record,
                ) from error
            continue

        previous = (current, report.solution)
        current, report = target, candidate
        if accept(report):
            record.stop_reason = BLOW_UP_DETECTED
            print(
                f"⚠️ Blow-up detected at {parameter}={current:.6g}"
                f" (u_max={report.u_max:.4g})"
            )
            break
        step = math.copysign(min(2.0 * abs(step), abs(nominal)), nominal)

    logger.info(
        "Continuation finished: %d steps, %s", len(record.reports), record.stop_reason
    )
    return record
