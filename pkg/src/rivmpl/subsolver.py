"""Inexact solver for the per-iteration strongly convex subproblem.

At a feasible point x the outer method builds the tangent-constrained model

    minimize  <grad f(x), v> + (alpha/2)||v||^2 + (beta/2)||F'(x)v||^2
              + reg(F(x) + F'(x)v) + f(x)      over tangent v,

whose dual in the codomain variable zeta is smooth: a quadratic plus the
negated Moreau envelope of the regularizer. Primal directions are recovered
from any dual point by one tangent projection, so every candidate v is
feasible by construction, and the duality gap certifies inexactness without
knowing the exact minimizer.

Two dual solvers share the same stopping contract: a semismooth Newton-CG
method (Clarke element of the prox inside the generalized Hessian, shifted CG
solve, Armijo backtracking) and an accelerated dual gradient method with
adaptive restart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .blocks import Blocks
from .linalg import cg_solve
from .problems import CompositeProblem, PointOps, spectral_norm_estimate

WEAK_DUALITY_TOL = -1e-10

# Newton-CG constants: CG budget, forcing cap, forcing exponent, Hessian
# shift scale and cap, Armijo slope fraction and backtracking ratio.
SNCG_CG_BUDGET = 100
SNCG_ETA_BAR = 1e-2
SNCG_TAU = 0.1
SNCG_TAU1 = 1.0
SNCG_TAU2 = 1e-3
SNCG_RHO1 = 1e-4
SNCG_DELTA = 0.5
SNCG_MAX_BACKTRACKS = 60


class NotTangent(ValueError):
    """Candidate direction is not tangent at the base point."""


class WeakDualityViolated(AssertionError):
    """Primal value + dual value dipped below the weak-duality floor."""


class LineSearchStalled(RuntimeError):
    """Armijo backtracking exceeded its iteration cap."""


@dataclass(frozen=True)
class SubproblemSpec:
    """Frozen data of one subproblem: base point, weights, cached maps."""

    problem: CompositeProblem
    x: np.ndarray
    alpha: float
    beta: float
    grad_f: np.ndarray
    f_x: float
    F_x: Blocks
    ops: Optional[PointOps] = None

    def __post_init__(self):
        if not self.alpha > 0.0 or not self.beta > 0.0:
            raise ValueError("subproblem weights must be positive")
        err = self.problem.manifold.feasibility_error(self.x)
        if err > 1e-8:
            raise ValueError(f"base point infeasible (error {err:.3e})")
        if self.ops is None:
            object.__setattr__(self, "ops", self.problem.point_ops(self.x))

    def project(self, u: np.ndarray) -> np.ndarray:
        return self.ops.project(u)


def make_subproblem(
    problem: CompositeProblem, x: np.ndarray, alpha: float, beta: float
) -> SubproblemSpec:
    return SubproblemSpec(
        problem=problem,
        x=x,
        alpha=alpha,
        beta=beta,
        grad_f=problem.f_grad(x),
        f_x=problem.f_eval(x),
        F_x=problem.F_eval(x),
    )


@dataclass
class DualState:
    """Dual iterate with its cached primal recovery."""

    zeta: Blocks
    v: np.ndarray
    z: Blocks
    phi: float
    grad_norm: Optional[float] = None


@dataclass
class SubSolveResult:
    v: np.ndarray
    zeta: Blocks
    theta_v: float
    phi: float
    gap: float
    inner_iters: int
    status: str  # "converged" | "budget"
    min_gap: float
    trace: Optional[list] = field(default=None)


def theta_value(spec: SubproblemSpec, v: np.ndarray) -> float:
    """Model objective at a tangent direction v (includes f at the base)."""
    res = spec.problem.manifold.tangency_residual(spec.x, v)
    if res > 1e-6 * max(1.0, float(np.linalg.norm(v))):
        raise NotTangent(f"tangency residual {res:.3e}")
    jv = spec.ops.jvp(v)
    quad = spec.alpha * float(np.vdot(v, v)) + spec.beta * jv.dot(jv)
    lin = spec.F_x + jv
    return (
        float(np.vdot(spec.grad_f, v))
        + 0.5 * quad
        + spec.problem.reg.value(lin)
        + spec.f_x
    )


def theta_at_zero(spec: SubproblemSpec) -> float:
    """Model value at v = 0, which equals the objective at the base point."""
    return spec.f_x + spec.problem.reg.value(spec.F_x)


def dual_value(spec: SubproblemSpec, zeta: Blocks) -> float:
    g = spec.ops.project(spec.ops.vjp(zeta) + spec.grad_f)
    w = spec.F_x + zeta / spec.beta
    return (
        0.5 / spec.alpha * float(np.vdot(g, g))
        + 0.5 / spec.beta * zeta.dot(zeta)
        - spec.problem.reg.moreau(1.0 / spec.beta, w)
    )


def dual_grad(spec: SubproblemSpec, zeta: Blocks) -> Blocks:
    g = spec.ops.project(spec.ops.vjp(zeta) + spec.grad_f)
    w = spec.F_x + zeta / spec.beta
    return (
        spec.ops.jvp(g) / spec.alpha
        + spec.problem.reg.prox(1.0 / spec.beta, w)
        - spec.F_x
    )


def ghess_operator(spec: SubproblemSpec, zeta: Blocks):
    """One element of the generalized Hessian of the dual at zeta, as a map."""
    w = spec.F_x + zeta / spec.beta
    jac = spec.problem.reg.prox_jacobian(1.0 / spec.beta, w)

    def apply(d: Blocks) -> Blocks:
        g = spec.ops.project(spec.ops.vjp(d))
        return spec.ops.jvp(g) / spec.alpha + jac(d) / spec.beta

    return apply


def recover_primal(spec: SubproblemSpec, zeta: Blocks) -> tuple[np.ndarray, Blocks]:
    """Tangent direction and prox point determined by a dual point."""
    v = -spec.ops.project(spec.ops.vjp(zeta) + spec.grad_f) / spec.alpha
    z = spec.problem.reg.prox(1.0 / spec.beta, spec.F_x + zeta / spec.beta)
    return v, z


def inexactness_met(
    spec: SubproblemSpec,
    v: np.ndarray,
    theta_v: float,
    phi: float,
    mu: float,
) -> tuple[bool, float]:
    """Duality-gap acceptance test for an inexact direction.

    Accept when the model did not increase from v = 0 and the gap
    theta(v) + phi(zeta) - f(x) is at most (mu/2)||v||^2. The gap is a bound
    on theta(v) - theta(v*) by weak duality; a gap below the floor signals an
    implementation bug and raises.
    """
    gap = theta_v + phi - spec.f_x
    if gap < WEAK_DUALITY_TOL:
        raise WeakDualityViolated(f"duality gap {gap:.3e} below floor")
    vsq = float(np.vdot(v, v))
    ok = theta_v <= theta_at_zero(spec) and gap <= 0.5 * mu * vsq
    return ok, gap


def _grad_floor(spec: SubproblemSpec) -> float:
    scale = max(1.0, spec.F_x.norm(), float(np.linalg.norm(spec.grad_f)))
    return 1e-13 * scale


def _checkpoint(spec: SubproblemSpec, zeta: Blocks, mu: float):
    v, z = recover_primal(spec, zeta)
    theta_v = theta_value(spec, v)
    phi = dual_value(spec, zeta)
    ok, gap = inexactness_met(spec, v, theta_v, phi, mu)
    return DualState(zeta=zeta, v=v, z=z, phi=phi), theta_v, ok, gap


def sncg_solve(
    spec: SubproblemSpec,
    mu: float,
    zeta0: Optional[Blocks] = None,
    budget: int = 200,
    collect_trace: bool = False,
) -> SubSolveResult:
    """Semismooth Newton-CG on the dual, stopped by the duality-gap test.

    Each step solves the shifted generalized-Hessian system inexactly with
    conjugate gradients and backtracks along the Newton direction, so the
    dual value is monotonically nonincreasing. Also stops when the dual
    gradient hits the numerical floor (the recovered direction is then the
    exact minimizer up to rounding).
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    zeta = zeta0.copy() if zeta0 is not None else Blocks.zeros(spec.problem.z_shapes)
    shapes = spec.problem.z_shapes
    gtol = _grad_floor(spec)
    trace: Optional[list] = [] if collect_trace else None
    min_gap = math.inf
    steps = 0
    while True:
        state, theta_v, ok, gap = _checkpoint(spec, zeta, mu)
        min_gap = min(min_gap, gap)
        if ok:
            return SubSolveResult(
                v=state.v, zeta=zeta, theta_v=theta_v, phi=state.phi, gap=gap,
                inner_iters=steps, status="converged", min_gap=min_gap, trace=trace,
            )
        g = dual_grad(spec, zeta)
        gn = g.norm()
        if gn <= gtol:
            return SubSolveResult(
                v=state.v, zeta=zeta, theta_v=theta_v, phi=state.phi, gap=gap,
                inner_iters=steps, status="converged", min_gap=min_gap, trace=trace,
            )
        if steps >= budget:
            return SubSolveResult(
                v=state.v, zeta=zeta, theta_v=theta_v, phi=state.phi, gap=gap,
                inner_iters=steps, status="budget", min_gap=min_gap, trace=trace,
            )
        eps_l = SNCG_TAU1 * min(SNCG_TAU2, gn)
        eta_l = min(SNCG_ETA_BAR, gn ** (1.0 + SNCG_TAU))
        hess = ghess_operator(spec, zeta)

        def shifted(q: np.ndarray) -> np.ndarray:
            d = Blocks.unravel(q, shapes)
            return (hess(d) + eps_l * d).ravel()

        cg = cg_solve(
            shifted, -g.ravel(), tol=min(0.5, eta_l / gn), max_iter=SNCG_CG_BUDGET
        )
        d = Blocks.unravel(cg.x, shapes)
        slope = g.dot(d)
        if slope >= 0.0:
            # CG direction failed the descent test; fall back to steepest descent.
            d = -g
            slope = -gn * gn
        phi0 = state.phi
        step = 1.0
        for m in range(SNCG_MAX_BACKTRACKS + 1):
            cand = zeta + step * d
            phi_c = dual_value(spec, cand)
            if phi_c <= phi0 + SNCG_RHO1 * step * slope:
                break
            step *= SNCG_DELTA
        else:
            if SNCG_RHO1 * abs(slope) <= 1e-12 * max(1.0, abs(phi0)):
                # The attainable decrease is below float resolution of the
                # dual value: zeta is a minimizer at working precision.
                return SubSolveResult(
                    v=state.v, zeta=zeta, theta_v=theta_v, phi=state.phi,
                    gap=gap, inner_iters=steps, status="converged",
                    min_gap=min_gap, trace=trace,
                )
            raise LineSearchStalled(
                f"no Armijo step after {SNCG_MAX_BACKTRACKS} backtracks"
            )
        if trace is not None:
            trace.append(
                {
                    "phi_before": phi0,
                    "phi_after": phi_c,
                    "armijo_rhs": phi0 + SNCG_RHO1 * step * slope,
                    "gap": gap,
                    "accepted": ok,
                    "grad_norm": gn,
                    "cg_iters": cg.iterations,
                }
            )
        zeta = cand
        steps += 1


def dual_lipschitz_seed(spec: SubproblemSpec) -> float:
    """Initial curvature guess for the dual gradient: (1 + ||F'(x)||)^2 / alpha."""
    def normal_op(u: np.ndarray) -> np.ndarray:
        return spec.ops.vjp(spec.ops.jvp(u))

    op = math.sqrt(max(spectral_norm_estimate(normal_op, spec.x.shape), 0.0))
    return (1.0 + op) ** 2 / spec.alpha


def apg_solve(
    spec: SubproblemSpec,
    mu: float,
    zeta0: Optional[Blocks] = None,
    budget: int = 20000,
    collect_trace: bool = False,
) -> SubSolveResult:
    """Accelerated gradient descent on the dual with adaptive restart.

    Same stopping contract as :func:`sncg_solve`. The step size is 1/L with L
    doubled whenever the quadratic upper bound fails; momentum is reset by a
    plain gradient step whenever the dual value would increase, so the dual
    sequence is nonincreasing at restart points.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    zeta = zeta0.copy() if zeta0 is not None else Blocks.zeros(spec.problem.z_shapes)
    gtol = _grad_floor(spec)
    lip = max(dual_lipschitz_seed(spec), 1e-12)
    trace: Optional[list] = [] if collect_trace else None
    min_gap = math.inf
    y = zeta.copy()
    t = 1.0
    phi_z = dual_value(spec, zeta)
    steps = 0
    while True:
        state, theta_v, ok, gap = _checkpoint(spec, zeta, mu)
        min_gap = min(min_gap, gap)
        if ok:
            return SubSolveResult(
                v=state.v, zeta=zeta, theta_v=theta_v, phi=state.phi, gap=gap,
                inner_iters=steps, status="converged", min_gap=min_gap, trace=trace,
            )
        g_at_zeta = dual_grad(spec, zeta)
        if g_at_zeta.norm() <= gtol:
            return SubSolveResult(
                v=state.v, zeta=zeta, theta_v=theta_v, phi=state.phi, gap=gap,
                inner_iters=steps, status="converged", min_gap=min_gap, trace=trace,
            )
        if steps >= budget:
            return SubSolveResult(
                v=state.v, zeta=zeta, theta_v=theta_v, phi=state.phi, gap=gap,
                inner_iters=steps, status="budget", min_gap=min_gap, trace=trace,
            )

        def forward(point: Blocks, phi_point: float, grad: Blocks):
            nonlocal lip
            gsq = grad.dot(grad)
            while True:
                cand = point - grad / lip
                phi_c = dual_value(spec, cand)
                if phi_c <= phi_point - 0.5 * gsq / lip or lip > 1e18:
                    return cand, phi_c
                lip *= 2.0

        gy = dual_grad(spec, y)
        phi_y = dual_value(spec, y)
        cand, phi_c = forward(y, phi_y, gy)
        restarted = False
        if phi_c > phi_z:
            # Momentum overshoot: restart from the current iterate.
            restarted = True
            t = 1.0
            cand, phi_c = forward(zeta, phi_z, g_at_zeta)
            if phi_c >= phi_z:
                # Even a plain gradient step cannot resolve a decrease:
                # numerical floor reached.
                return SubSolveResult(
                    v=state.v, zeta=zeta, theta_v=theta_v, phi=state.phi,
                    gap=gap, inner_iters=steps, status="converged",
                    min_gap=min_gap, trace=trace,
                )
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = cand + ((t - 1.0) / t_next) * (cand - zeta)
        if trace is not None:
            trace.append(
                {"phi_before": phi_z, "phi_after": phi_c, "restarted": restarted}
            )
        zeta = cand
        phi_z = phi_c
        t = t_next
        steps += 1
