"""
Solvers for Delta u + h u = lam p u^(p-1) exp(u^p) on the torus, lam tied to u.

solve_min runs preconditioned gradient descent with Armijo backtracking on J
(projected onto the sphere ||u||_h^2 = beta at p = 2); solve_newton polishes a
nearby iterate by Newton-Krylov on the preconditioned residual map.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from src.torus.functional import (
    beta_of,
    gradient_constant,
    is_critical_exponent,
    j_functional,
    j_gradient,
    lambda_from_u,
    nonlinearity,
    residual_l2,
)
from src.utils.errors import (
    InvalidParameterError,
    KrylovBreakdownError,
    LineSearchStallError,
    MaxIterationsError,
    NonPositiveSolutionError,
)
from src.utils.utils import check_exponent, check_positive

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * math.pi


@dataclass(frozen=True, eq=False)
class SolveReport:
    """
    Converged solution and its metadata.
    Attributes:
        p (float): Exponent.
        beta (float): Target energy level.
        lam (float): Multiplier at the solution.
        iterations (int): Outer iterations used.
        residual_l2 (float): L^2 norm of the Euler-Lagrange residual.
        u_max (float): Largest sample.
        u_min (float): Smallest sample.
        beta_check (float): beta recovered by beta_of.
        positivity (bool): u_min > 0.
        multiplier_bound_ok (bool): 2 lam <= max h, the bound every positive
            solution satisfies; False flags a suspect solve.
        solution (TorusField): The solution samples.
        residual_history (tuple): Residual after each outer iteration.
        method (str): "min" or "newton".
        energy_history (tuple): J before each descent iteration; empty for Newton.
    """

    p: float
    beta: float
    lam: float
    iterations: int
    residual_l2: float
    u_max: float
    u_min: float
    beta_check: float
    positivity: bool
    multiplier_bound_ok: bool
    solution: object
    residual_history: tuple
    method: str
    energy_history: tuple = ()

    def to_record(self):
        """Flat row for report tables."""
        return {
            "p": self.p,
            "beta": self.beta,
            "lambda": self.lam,
            "iterations": self.iterations,
            "residual_l2": self.residual_l2,
            "u_max": self.u_max,
            "u_min": self.u_min,
            "beta_check": self.beta_check,
            "positivity": self.positivity,
            "multiplier_bound_ok": self.multiplier_bound_ok,
            "method": self.method,
        }


def _check_inputs(p, beta):
    check_exponent(p, low=1.0, high=2.0, open_low=True)
    check_positive(beta=beta)


def _finish(u, p, beta, lam, iterations, history, method, energies=()):
    u_min = float(np.min(u.values))
    if u_min <= 0.0:
        logger.error("%s solve ended with u_min=%.3e", method, u_min)
        raise NonPositiveSolutionError(
            f"solution is not positive (u_min = {u_min:.3e})"
        )
    bound_ok = bool(2.0 * lam <= float(np.max(u.h_values)) + 1e-9)
    if not bound_ok:
        logger.warning("2 lam = %.6g exceeds max h", 2.0 * lam)
    report = SolveReport(
        p=p,
        beta=beta,
        lam=lam,
        iterations=iterations,
        residual_l2=history[-1],
        u_max=float(np.max(u.values)),
        u_min=u_min,
        beta_check=beta_of(u, lam, p),
        positivity=True,
        multiplier_bound_ok=bound_ok,
        solution=u,
        residual_history=tuple(history),
        method=method,
        energy_history=tuple(energies),
    )
    return report


def project_to_sphere(u, beta):
    """Rescale u so that ||u||_h^2 = beta."""
    return u.with_values(math.sqrt(beta / u.norm_h_squared()) * u.values)


def solve_min(p, beta, init, tol=1e-8, max_iter=5000, armijo=1e-4, min_step=1e-14):
    """
    Minimize J_{p,beta} by gradient descent in the h inner product.

    The trial step of every iteration is the fixed-point step
    u -> (Delta + h)^(-1)[lam(u) p u^(p-1) exp(u^p)], halved until the Armijo
    condition holds.
    Args:
        p (float): Exponent in (1, 2].
        beta (float): Energy level below 4 pi.
        init (TorusField): Starting field with a nontrivial positive part.
        tol (float): Target L^2 norm of the Euler-Lagrange residual.
        max_iter (int): Iteration cap.
        armijo (float): Sufficient decrease constant.
        min_step (float): Smallest trial step before giving up.
    Returns:
        SolveReport: The converged minimizer.
    Raises:
        LineSearchStallError: If no step satisfies the Armijo condition.
        MaxIterationsError: If tol is not reached within max_iter.
        NonPositiveSolutionError: If the result is not strictly positive.
    """
    _check_inputs(p, beta)
    if beta >= FOUR_PI:
        raise InvalidParameterError(f"minimization needs beta < 4 pi, got {beta:.6g}")
    critical = is_critical_exponent(p)
    u = project_to_sphere(init, beta) if critical else init
    logger.info("Descent started: p=%.4g beta=%.6g n=%d", p, beta, u.n)

    history, energies = [], []
    for iteration in range(max_iter + 1):
        lam = lambda_from_u(u, p, beta)
        residual = residual_l2(u, lam, p)
        current = j_functional(u, p, beta)
        history.append(residual)
        energies.append(current)
        if residual < tol:
            logger.info(
                "Descent converged in %d iterations, residual %.3e", iteration, residual
            )
            return _finish(u, p, beta, lam, iteration, history, "min", energies)
        if iteration == max_iter:
            break

        gradient = j_gradient(u, p, beta)
        norm_squared = u.norm_h_squared()
        if critical:
            along = u.inner_h(gradient.values, u.values)
            direction = gradient.values - along / norm_squared * u.values
            step = -norm_squared / along
        else:
            direction = gradient.values
            growth = norm_squared ** ((2.0 * p - 2.0) / (2.0 - p))
            step = 1.0 / (gradient_constant(p, beta) * growth)
        slope = u.inner_h(gradient.values, direction)

        while True:
            trial = u.with_values(u.values - step * direction)
            if critical:
                trial = project_to_sphere(trial, beta)
            if j_functional(trial, p, beta) <= current - armijo * step * slope:
                break
            step *= 0.5
            if step < min_step:
                logger.error("Armijo backtracking stalled at iteration %d", iteration)
                raise LineSearchStallError(
                    f"no sufficient decrease at iteration {iteration}"
                )
        u = trial
        if iteration % 100 == 0:
            logger.info(
                "Descent iteration %d: J=%.12g residual=%.3e",
                iteration,
                current,
                residual,
            )

    raise MaxIterationsError(
        f"descent did not reach {tol:.1e} in {max_iter} iterations"
    )


def fixed_point_map(u, p, beta):
    """(Delta + h)^(-1)[lam(u) p u_+^(p-1) exp(u_+^p)]."""
    lam = lambda_from_u(u, p, beta)
    return u.solve_operator(lam * nonlinearity(u, p))


def solve_newton(p, beta, init, tol=1e-12, max_iter=30, restart=50):
    """
    Newton-Krylov on G(u) = u - (Delta + h)^(-1)[lam(u) p u_+^(p-1) exp(u_+^p)].

    Jacobian-vector products are forward differences of G, so lam(u) is
    differentiated through. GMRES uses the forcing term min(0.1, ||G||).
    Args:
        p (float): Exponent in (1, 2].
        beta (float): Energy level.
        init (TorusField): Iterate close to a solution.
        tol (float): Target L^2 norm of (Delta + h) u - lam p u^(p-1) exp(u^p).
        max_iter (int): Newton step cap.
        restart (int): GMRES restart length.
    Returns:
        SolveReport: The polished solution.
    Raises:
        KrylovBreakdownError: If GMRES reports an illegal input or breakdown.
        MaxIterationsError: If tol is not reached within max_iter.
        NonPositiveSolutionError: If the result is not strictly positive.
    """
    _check_inputs(p, beta)
    shape = (init.n, init.n)
    size = init.n * init.n
    u = init
    logger.info("Newton-Krylov started: p=%.4g beta=%.6g n=%d", p, beta, u.n)

    def preconditioned(field):
        return field.values - fixed_point_map(field, p, beta)

    history = []
    for iteration in range(max_iter + 1):
        lam = lambda_from_u(u, p, beta)
        residual = residual_l2(u, lam, p)
        history.append(residual)
        logger.info("Newton iteration %d: residual %.3e", iteration, residual)
        if residual < tol:
            return _finish(u, p, beta, lam, iteration, history, "newton")
        if iteration == max_iter:
            break

        base = preconditioned(u)
        base_norm = math.sqrt(u.integrate(base * base))

        def jvp(flat, u=u, base=base):
            direction = flat.reshape(shape)
            scale = float(np.max(np.abs(direction)))
            if scale == 0.0:
                return np.zeros(size)
            size_u = max(1.0, float(np.max(np.abs(u.values))))
            eps = math.sqrt(np.finfo(float).eps) * size_u / scale
            shifted = preconditioned(u.with_values(u.values + eps * direction))
            return ((shifted - base) / eps).ravel()

        operator = LinearOperator((size, size), matvec=jvp, dtype=float)
        forcing = max(min(0.1, base_norm), 1e-12)
        step, info = gmres(
            operator,
            -base.ravel(),
            rtol=forcing,
            atol=0.0,
            restart=restart,
            maxiter=20,
        )
        if info < 0:
            raise KrylovBreakdownError(
                f"GMRES breakdown (info={info}) at Newton step {iteration}"
            )
        if info > 0:
            logger.warning(
                "GMRES stopped short of %.1e at Newton step %d", forcing, iteration
            )

        # halve the update while the preconditioned residual grows
        damping = 1.0
        candidate = u.with_values(u.values + step.reshape(shape))
        for _ in range(10):
            trial_residual = preconditioned(candidate)
            trial_norm = math.sqrt(candidate.integrate(trial_residual**2))
            if trial_norm < base_norm:
                break
            damping *= 0.5
            candidate = u.with_values(u.values + damping * step.reshape(shape))
        if damping < 1.0:
            logger.warning("Newton step %d damped to %.3g", iteration, damping)
        u = candidate

    raise MaxIterationsError(f"Newton did not reach {tol:.1e} in {max_iter} steps")
