"""Implicit time stepping for the constrained community model.

Each step solves the backward-Euler system with a damped Newton iteration.
Internally Newton works in logit coordinates y = ln(x/(1-x)) for every
fraction (gamma stays untransformed): the open box (0,1)^m maps onto all of
R^m so trial points can never leave the admissible set, and the barrier
force becomes 2*kp*sinh(y), which evaluates without cancellation however
hard a variable is pinned against a bound.  This is equivalent to a diagonal
right-preconditioner dx/dy = x(1-x) on the Newton system plus a curvilinear
line search; the converged iterate satisfies the plain residual in the
original variables.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .model import (
    ModelParams,
    SimState,
    _jacobian_smooth,
    _residual_smooth,
    dissipation_rate,
    pack_state,
    unpack_state,
)

if TYPE_CHECKING:
    from .scenarios import ScenarioConfig

# Largest logit move per damped Newton update; keeps the linearization honest
# across the sigmoid knee while leaving the quadratic phase untouched.
_TRUST = 4.0
# Substep counts tried, in order, to build an initial guess when Newton
# fails from the previous state (sharp constraint-activation events).
_GUESS_LADDER = (4, 16, 64)


class SolverError(RuntimeError):
    pass


class NonConvergenceError(SolverError):
    """Newton exhausted its iteration budget."""

    def __init__(self, step_index: int, best_norm: float):
        super().__init__(
            f"Newton did not converge at step {step_index}; "
            f"best residual norm {best_norm:.3e}")
        self.step_index = step_index
        self.best_norm = best_norm


class SingularJacobianError(SolverError):
    """The dense LU factorization (partial pivoting) broke down."""

    def __init__(self, step_index: int):
        super().__init__(f"singular Jacobian at step {step_index}")
        self.step_index = step_index


@dataclass(frozen=True)
class SolverSettings:
    """Numerical controls for the implicit stepper.

    residual_tolerance     accept a step when the residual inf-norm falls
                           below this (J/m^3)
    max_newton_iterations  per Newton solve
    max_halvings           line-search halvings per Newton update
    dt                     time-step size
    steps                  number of steps a run takes
    steady_state_tolerance early stop when the per-step state change
                           inf-norm falls below this; 0 disables
    """

    residual_tolerance: float = 1e-10
    max_newton_iterations: int = 120
    max_halvings: int = 10
    dt: float = 1e-4
    steps: int = 1500
    steady_state_tolerance: float = 1e-8

    def __post_init__(self):
        if self.residual_tolerance <= 0.0:
            raise ValueError("residual_tolerance must be positive")
        if self.max_newton_iterations < 1 or self.max_halvings < 1:
            raise ValueError("iteration counts must be at least 1")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        if self.steady_state_tolerance < 0.0:
            raise ValueError("steady_state_tolerance must be non-negative")


@dataclass(frozen=True)
class StepDiagnostics:
    """Convergence and balance record for one accepted step."""

    newton_iterations: int
    final_residual_norm: float
    dissipation: float
    constraint_violation: float


@dataclass(frozen=True)
class Termination:
    """Why a run stopped: 'completed', 'steady-state' or 'failure'."""

    reason: str
    step: int
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.reason in ("completed", "steady-state")


@dataclass
class Trajectory:
    """Ordered states plus per-step diagnostics for one scenario run."""

    states: list[SimState]
    diagnostics: list[StepDiagnostics]
    config: "ScenarioConfig | None"
    termination: Termination

    def __post_init__(self):
        times = [s.t for s in self.states]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("trajectory time stamps must increase strictly")

    @property
    def n(self) -> int:
        return self.states[0].n

    def time(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def phi0(self) -> np.ndarray:
        return np.array([s.phi0 for s in self.states])

    def phi(self) -> np.ndarray:
        return np.array([s.phi for s in self.states])

    def psi(self) -> np.ndarray:
        return np.array([s.psi for s in self.states])

    def gamma(self) -> np.ndarray:
        return np.array([s.gamma for s in self.states])


def _sigmoid(y: np.ndarray) -> np.ndarray:
    out = np.empty_like(y)
    pos = y >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-y[pos]))
    e = np.exp(y[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _logit(x: np.ndarray) -> np.ndarray:
    return np.log(x) - np.log1p(-x)


class _Stalled(Exception):
    def __init__(self, norm: float):
        self.norm = norm


def _kp_full(params: ModelParams) -> np.ndarray:
    return np.concatenate(([params.kp0], params.kp, params.kp))


def _newton(guess: np.ndarray, u_old: np.ndarray, dt: float,
            params: ModelParams, c: float, alpha: float,
            settings: SolverSettings, step_index: int) -> tuple[np.ndarray, int, float]:
    """Damped Newton in logit coordinates; returns (u_new, iterations, norm)."""
    n = params.n
    m = 2 * n + 1
    kp = _kp_full(params)
    y = _logit(guess[:m])
    gamma = guess[-1]

    def evaluate(y, gamma):
        u = np.empty(2 * n + 2)
        u[:m] = _sigmoid(y)
        u[-1] = gamma
        R = _residual_smooth(u, u_old, dt, params, c, alpha)
        R[:m] += 2.0 * kp * np.sinh(y)
        return u, R

    u, R = evaluate(y, gamma)
    norm = float(np.abs(R).max())
    converged = False
    polish_left = 2
    for it in range(1, settings.max_newton_iterations + 1):
        if norm <= settings.residual_tolerance:
            # polish: a couple of extra updates push the iterate to the
            # floating-point floor, so the accepted state depends on the
            # equations rather than on where the iteration happened to stop
            # (this keeps relabeled runs in lockstep)
            converged = True
            if polish_left == 0:
                return u, it - 1, norm
            polish_left -= 1
        J = _jacobian_smooth(u, u_old, dt, params, c, alpha)
        scale = u[:m] * (1.0 - u[:m])                  # dx/dy
        Jy = np.empty_like(J)
        Jy[:, :m] = J[:, :m] * scale
        Jy[:, -1] = J[:, -1]
        idx = np.arange(m)
        Jy[idx, idx] += 2.0 * kp * np.cosh(y)
        try:
            w = np.linalg.solve(Jy, -R)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobianError(step_index) from exc
        lam = min(1.0, _TRUST / max(1e-300, float(np.abs(w[:m]).max())))
        merit = 0.5 * float(R @ R)
        accepted = False
        for _ in range(settings.max_halvings + 1):
            y_try = y + lam * w[:m]
            gamma_try = gamma + lam * w[-1]
            with np.errstate(over="ignore", invalid="ignore"):
                u_try, R_try = evaluate(y_try, gamma_try)
                merit_try = 0.5 * float(R_try @ R_try)
            if np.isfinite(merit_try) and merit_try <= merit * (1.0 - 2e-4 * lam):
                y, gamma, u, R = y_try, gamma_try, u_try, R_try
                norm = float(np.abs(R).max())
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            if converged:
                return u, it, norm
            raise _Stalled(norm)
    if converged:
        return u, settings.max_newton_iterations, norm
    raise _Stalled(norm)


def solve_step(old: SimState, dt: float, params: ModelParams,
               c_signal, alpha_signal, step_index: int,
               settings: SolverSettings) -> tuple[SimState, StepDiagnostics]:
    """Advance one backward-Euler step; forcing evaluated at the new level.

    `step_index` is the index assigned to the state being computed; the
    forcing signals receive (old.t + dt, step_index).  The Newton iteration
    starts from the previous state.  If it stalls (the constraint-activation
    kinks produce strongly curved root paths), a sequence of shorter
    backward-Euler substeps builds a better starting guess and the full-step
    system is re-solved from there, so the accepted state always satisfies
    the full-step residual at the requested tolerance.
    """
    t_new = old.t + dt
    c = float(c_signal.at(t_new, step_index))
    alpha = float(alpha_signal.at(t_new, step_index))
    u_old = pack_state(old)

    total_iters = 0
    best_norm = np.inf
    u_new = None
    try:
        u_new, iters, norm = _newton(u_old, u_old, dt, params, c, alpha,
                                     settings, step_index)
        total_iters += iters
    except _Stalled as stall:
        best_norm = min(best_norm, stall.norm)
        for substeps in _GUESS_LADDER:
            try:
                guess = u_old
                h = dt / substeps
                for j in range(substeps):
                    guess, it_sub, _ = _newton(guess, guess, h, params, c,
                                               alpha, settings, step_index)
                    total_iters += it_sub
                u_new, iters, norm = _newton(guess, u_old, dt, params, c,
                                             alpha, settings, step_index)
                total_iters += iters
                break
            except _Stalled as stall:
                best_norm = min(best_norm, stall.norm)
                continue
        else:
            raise NonConvergenceError(step_index, best_norm) from None

    new = unpack_state(u_new, t_new, params.n)
    rates = (u_new[:2 * params.n + 1] - u_old[:2 * params.n + 1]) / dt
    diss = dissipation_rate(new, rates[0], rates[1:1 + params.n],
                            rates[1 + params.n:], params)
    diag = StepDiagnostics(
        newton_iterations=total_iters,
        final_residual_norm=norm,
        dissipation=diss,
        constraint_violation=new.constraint_violation(),
    )
    return new, diag


def run(config: "ScenarioConfig") -> Trajectory:
    """Integrate a scenario for config.settings.steps steps.

    Records every state with its diagnostics.  Stops early when the per-step
    state change drops below the steady-state tolerance (if enabled).  Step
    failures terminate the run with the prefix retained and the failure
    recorded in the termination field.
    """
    params = config.params
    settings = config.settings
    state = config.initial_state()
    states = [state]
    diagnostics = [StepDiagnostics(0, 0.0, 0.0, state.constraint_violation())]

    termination = Termination("completed", settings.steps)
    for k in range(1, settings.steps + 1):
        try:
            new, diag = solve_step(state, settings.dt, params, config.nutrient,
                                   config.antibiotic, k, settings)
        except SolverError as exc:
            termination = Termination("failure", k, str(exc))
            break
        states.append(new)
        diagnostics.append(diag)
        if settings.steady_state_tolerance > 0.0:
            change = np.abs(pack_state(new) - pack_state(state)).max()
            if change <= settings.steady_state_tolerance:
                state = new
                termination = Termination("steady-state", k)
                break
        state = new
    return Trajectory(states=states, diagnostics=diagnostics, config=config,
                      termination=termination)
