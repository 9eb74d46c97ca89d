"""Outer loop: variable-metric proximal linearization on the manifold.

Per outer iteration the driver seeds the proximal weight from Lipschitz
estimates (Barzilai-Borwein curvature for the smooth term, a dual-vector
quotient for the inner mapping), solves the tangent-space model inexactly in
its dual, tests the sufficient-decrease acceptance condition, and either
retracts the accepted direction or escalates the proximal weight. Runs stop
on a vanishing direction, a relative objective change, an optional
stationarity certificate, or the iteration cap.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .blocks import Blocks
from .manifolds import InfeasiblePoint, RetractionFailure
from .problems import CompositeProblem, spectral_norm_estimate
from .subsolver import (
    SubproblemSpec,
    SubSolveResult,
    apg_solve,
    make_subproblem,
    sncg_solve,
)


class InnerLoopDiverged(RuntimeError):
    """Proximal-weight escalation exhausted its cap without acceptance."""


class RunStatus(str, enum.Enum):
    STATIONARY = "stationary"  # direction norm hit the zero threshold
    REL_CHANGE = "rel_change"  # relative objective change below eps_star
    CERTIFIED = "certified"  # stationarity residuals below stationarity_tol
    MAX_OUTER = "max_outer"


@dataclass
class SolverConfig:
    alpha_min: float = 1e-6
    alpha_max: float = 1e6
    alpha_bar: float = 1e6  # cap on the metric spread; informational
    sigma: float = 2.5
    gamma_bar: float = 1e-5
    mu_max: float = 500.0
    beta0: float = 0.01
    beta_decay: float = 1.1
    beta_floor: float = 1e-6
    beta_period: int = 50
    alpha00: Optional[float] = None  # None: use the problem's seed estimate
    eps_star: float = 1e-8
    max_outer: int = 5000
    max_inner_j: int = 60
    inner: str = "sncg"  # "sncg" | "apg"
    inner_budget: int = 200
    stationarity_tol: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.alpha_min <= self.alpha_max:
            raise ValueError("need 0 < alpha_min <= alpha_max")
        if self.sigma <= 1.0:
            raise ValueError("escalation factor sigma must exceed 1")
        if self.gamma_bar <= 0.0 or self.mu_max <= 0.0 or self.beta0 <= 0.0:
            raise ValueError("gamma_bar, mu_max and beta0 must be positive")
        if self.inner not in ("sncg", "apg"):
            raise ValueError(f"unknown inner solver {self.inner!r}")


@dataclass
class TraceRow:
    k: int
    obj: float
    vnorm: float
    alpha: float
    jk: int
    inner_iters: int
    beta: float
    mu: float
    feas_err: float
    time_ms: float
    # schedule audit fields (not part of the CSV contract)
    alpha0: float = math.nan
    lip_theta: float = math.nan
    l_grad_F: float = math.nan
    l_grad_f: float = math.nan
    bb_degenerate: bool = False


@dataclass
class StationarityCertificate:
    """Witness pair for approximate stationarity at a point.

    ``z_bar`` is the prox point, ``xi_bar`` the subgradient of the
    regularizer it certifies, ``riem_residual`` the norm of the projected
    gradient of the full objective through that subgradient, and
    ``lin_residual`` the distance between F(x) and the prox point.
    """

    z_bar: Blocks
    xi_bar: Blocks
    riem_residual: float
    lin_residual: float
    membership_residual: float

    @property
    def epsilon(self) -> float:
        return max(self.riem_residual, self.lin_residual)


@dataclass
class RunResult:
    x: np.ndarray
    objective: float
    status: RunStatus
    iterations: int
    trace: list[TraceRow]
    certificate: Optional[StationarityCertificate]
    min_gap: float
    subproblems: int
    inner_iterations: int
    config: SolverConfig = field(repr=False, default=None)


def mu_schedule(k: int, cfg: SolverConfig) -> float:
    """Inexactness weight: mu_max at k = 0, then max(mu_max / sqrt(k), 1)."""
    if k <= 0:
        return cfg.mu_max
    return max(cfg.mu_max / math.sqrt(k), 1.0)


def beta_schedule(k: int, beta_k: float, cfg: SolverConfig) -> float:
    """Metric coupling weight: decay by beta_decay every beta_period steps."""
    if k % cfg.beta_period == 0:
        return max(beta_k / cfg.beta_decay, cfg.beta_floor)
    return beta_k


def relative_objective_stop(theta_new: float, theta_prev: float, eps_star: float) -> bool:
    """Stop test |change| / max(1, |objective|) <= eps_star."""
    return abs(theta_new - theta_prev) <= eps_star * max(1.0, abs(theta_new))


@dataclass
class _PrevStep:
    dx: np.ndarray
    dy: np.ndarray
    zeta: Blocks
    alpha_accepted: float


def alpha_init(
    k: int,
    prev: Optional[_PrevStep],
    problem: CompositeProblem,
    x: np.ndarray,
    cfg: SolverConfig,
) -> tuple[float, float, float, float, bool]:
    """Seed proximal weight for iteration k.

    Returns (alpha0, lip_theta, L_gradF, L_gradf, bb_degenerate). For k >= 1
    the curvature estimate is lip(reg) * L_gradF + L_gradf with L_gradF from
    the latest dual vector and L_gradf from the Barzilai-Borwein quotients;
    degenerate quotients fall back to the last accepted weight divided by the
    0.2 tightening factor.
    """
    if k == 0 or prev is None:
        a00 = cfg.alpha00 if cfg.alpha00 is not None else problem.alpha00_hint
        return float(a00), math.nan, math.nan, math.nan, False
    lip_theta = problem.reg.lipschitz_bound()
    znorm = prev.zeta.norm()
    if znorm > 0.0:
        l_grad_F = float(np.linalg.norm(problem.F_vjp(x, prev.zeta))) / znorm
    else:
        def normal_op(u: np.ndarray) -> np.ndarray:
            return problem.F_vjp(x, problem.F_jvp(x, u))

        l_grad_F = math.sqrt(max(spectral_norm_estimate(normal_op, x.shape), 0.0))
    dx_sq = float(np.vdot(prev.dx, prev.dx))
    dy_sq = float(np.vdot(prev.dy, prev.dy))
    inner = abs(float(np.vdot(prev.dx, prev.dy)))
    degenerate = False
    if dx_sq == 0.0:
        degenerate = True
        l_grad_f = math.nan
    elif dy_sq == 0.0:
        l_grad_f = 0.0
    elif inner == 0.0:
        degenerate = True
        l_grad_f = math.nan
    else:
        l_grad_f = max(dy_sq / inner, inner / dx_sq)
    if degenerate:
        curvature = prev.alpha_accepted / 0.2
    else:
        curvature = lip_theta * l_grad_F + l_grad_f
    alpha0 = 0.2 * min(max(curvature, cfg.alpha_min), cfg.alpha_max)
    return alpha0, lip_theta, l_grad_F, l_grad_f, degenerate


def stationarity_measure(
    problem: CompositeProblem, x: np.ndarray, zeta: Blocks, beta: float
) -> StationarityCertificate:
    """Build the stationarity witness from a dual point at x.

    The prox point z_bar = prox_{reg/beta}(F(x) + zeta/beta) carries the
    subgradient xi_bar = zeta - beta (z_bar - F(x)); membership is certified
    by the proximal characterization z_bar = prox_reg(z_bar + xi_bar).
    """
    F_x = problem.F_eval(x)
    z_bar = problem.reg.prox(1.0 / beta, F_x + zeta / beta)
    xi_bar = zeta - beta * (z_bar - F_x)
    ambient = problem.f_grad(x) + problem.F_vjp(x, xi_bar)
    riem = float(np.linalg.norm(problem.manifold.tangent_project(x, ambient)))
    lin = (F_x - z_bar).norm()
    membership = (z_bar - problem.reg.prox(1.0, z_bar + xi_bar)).norm()
    return StationarityCertificate(
        z_bar=z_bar,
        xi_bar=xi_bar,
        riem_residual=riem,
        lin_residual=lin,
        membership_residual=membership,
    )


def _zero_direction(v: np.ndarray, x: np.ndarray) -> bool:
    return float(np.linalg.norm(v)) <= 1e-12 * max(1.0, float(np.linalg.norm(x)))


def run(
    problem: CompositeProblem,
    x0: np.ndarray,
    cfg: Optional[SolverConfig] = None,
    clock: Callable[[], float] = time.perf_counter,
) -> RunResult:
    """Run the outer method from a feasible starting point."""
    cfg = cfg if cfg is not None else SolverConfig()
    manifold = problem.manifold
    x = np.array(x0, dtype=float)
    feas0 = manifold.feasibility_error(x)
    if feas0 > 1e-8:
        raise InfeasiblePoint(f"starting point infeasible (error {feas0:.3e})")
    solve = sncg_solve if cfg.inner == "sncg" else apg_solve

    theta_x = problem.objective(x)
    beta = cfg.beta0
    zeta_warm = Blocks.zeros(problem.z_shapes)
    prev: Optional[_PrevStep] = None
    trace: list[TraceRow] = []
    min_gap = math.inf
    subproblems = 0
    inner_iterations = 0
    status = RunStatus.MAX_OUTER
    certificate: Optional[StationarityCertificate] = None

    for k in range(cfg.max_outer):
        t0 = clock()
        mu = mu_schedule(k, cfg)
        alpha0, lip_theta, l_gradF, l_gradf, bb_degen = alpha_init(k, prev, problem, x, cfg)
        alpha = alpha0
        grad_fx = problem.f_grad(x)
        f_x = problem.f_eval(x)
        F_x = problem.F_eval(x)
        ops = problem.point_ops(x)
        inner_total = 0
        accepted = False
        res: Optional[SubSolveResult] = None
        x_new = None
        theta_new = math.nan
        for j in range(cfg.max_inner_j):
            spec = SubproblemSpec(
                problem=problem, x=x, alpha=alpha, beta=beta,
                grad_f=grad_fx, f_x=f_x, F_x=F_x, ops=ops,
            )
            res = solve(spec, mu, zeta_warm, cfg.inner_budget)
            subproblems += 1
            inner_total += res.inner_iters
            min_gap = min(min_gap, res.min_gap)
            zeta_warm = res.zeta
            vnorm = float(np.linalg.norm(res.v))
            if _zero_direction(res.v, x):
                trace.append(TraceRow(
                    k=k, obj=theta_x, vnorm=vnorm, alpha=alpha, jk=j,
                    inner_iters=inner_total, beta=beta, mu=mu,
                    feas_err=manifold.feasibility_error(x),
                    time_ms=(clock() - t0) * 1e3,
                    alpha0=alpha0, lip_theta=lip_theta, l_grad_F=l_gradF,
                    l_grad_f=l_gradf, bb_degenerate=bb_degen,
                ))
                inner_iterations += inner_total
                certificate = stationarity_measure(problem, x, res.zeta, beta)
                status = RunStatus.STATIONARY
                return RunResult(
                    x=x, objective=theta_x, status=status, iterations=k + 1,
                    trace=trace, certificate=certificate, min_gap=min_gap,
                    subproblems=subproblems, inner_iterations=inner_iterations,
                    config=cfg,
                )
            try:
                x_cand = manifold.retract(x, res.v)
            except RetractionFailure:
                if j == cfg.max_inner_j - 1:
                    raise
                alpha = cfg.sigma * alpha
                continue
            theta_cand = problem.objective(x_cand)
            if theta_cand <= res.theta_v - 0.5 * cfg.gamma_bar * vnorm * vnorm:
                accepted = True
                x_new = x_cand
                theta_new = theta_cand
                break
            alpha = cfg.sigma * alpha
        if not accepted:
            raise InnerLoopDiverged(
                f"no acceptable step at iteration {k} "
                f"(alpha escalated to {alpha:.3e}); check problem derivatives"
            )

        vnorm = float(np.linalg.norm(res.v))
        trace.append(TraceRow(
            k=k, obj=theta_x, vnorm=vnorm, alpha=alpha, jk=j,
            inner_iters=inner_total, beta=beta, mu=mu,
            feas_err=manifold.feasibility_error(x),
            time_ms=(clock() - t0) * 1e3,
            alpha0=alpha0, lip_theta=lip_theta, l_grad_F=l_gradF,
            l_grad_f=l_gradf, bb_degenerate=bb_degen,
        ))
        inner_iterations += inner_total

        if cfg.stationarity_tol is not None:
            cert = stationarity_measure(problem, x, res.zeta, beta)
            if cert.epsilon <= cfg.stationarity_tol:
                certificate = cert
                status = RunStatus.CERTIFIED
                return RunResult(
                    x=x, objective=theta_x, status=status, iterations=k + 1,
                    trace=trace, certificate=certificate, min_gap=min_gap,
                    subproblems=subproblems, inner_iterations=inner_iterations,
                    config=cfg,
                )

        grad_new = problem.f_grad(x_new)
        prev = _PrevStep(
            dx=x_new - x, dy=grad_new - grad_fx, zeta=res.zeta,
            alpha_accepted=alpha,
        )
        theta_prev = theta_x
        x = x_new
        theta_x = theta_new
        if relative_objective_stop(theta_x, theta_prev, cfg.eps_star):
            status = RunStatus.REL_CHANGE
            break
        beta = beta_schedule(k, beta, cfg)

    if certificate is None:
        # Fresh dual solve at the final point so the certificate refers to it.
        spec = make_subproblem(
            problem, x,
            alpha=max(prev.alpha_accepted if prev else 1.0, cfg.alpha_min),
            beta=beta,
        )
        res_f = solve(spec, 1.0, zeta_warm, cfg.inner_budget)
        min_gap = min(min_gap, res_f.min_gap)
        certificate = stationarity_measure(problem, x, res_f.zeta, beta)

    return RunResult(
        x=x, objective=theta_x, status=status,
        iterations=len(trace), trace=trace, certificate=certificate,
        min_gap=min_gap, subproblems=subproblems,
        inner_iterations=inner_iterations, config=cfg,
    )
