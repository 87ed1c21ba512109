"""Core material model for a multi-species biofilm community.

State per material point: the empty-space volume fraction phi0, one volume
fraction phi_i and one living fraction psi_i per species, and the Lagrange
multiplier gamma that enforces phi0 + sum(phi) = 1.

Unknown ordering used by every vector/matrix in this module:

    u = (phi0, phi_1..phi_n, psi_1..psi_n, gamma)        length 2n+2

Residual rows follow the same ordering: the phi0 closure equation, the n
volume-fraction equations, the n living-fraction equations, and the volume
constraint.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Initial fractions sitting exactly on 0 or 1 are pulled inside by this much
# so the logarithmic barrier is finite at the first step.
BOUNDARY_CLAMP = 1e-9


class DomainError(ValueError):
    """A fraction left the open interval (0, 1) where the barrier is defined."""


def _as_vector(x, n: int, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {v.shape}")
    return v


@dataclass(frozen=True)
class ModelParams:
    """Time-independent parameters of an n-species community.

    A          symmetric n x n growth-coefficient matrix, dimensionless
    b          length-n antibiotic-sensitivity vector, dimensionless
    eta        length-n viscosity vector, kg/(m * time), strictly positive
    eta0       empty-space viscosity, same units, strictly positive
    barrier_scale  factor k_b; per-variable penalty K_p,i = eta_i * k_b
    gamma_in_psi   couple the multiplier into the living-fraction equations
                   (off by default; see README on the closure choices)
    """

    n: int
    A: np.ndarray
    b: np.ndarray
    eta: np.ndarray
    eta0: float = 1.0
    barrier_scale: float = 1e-4
    gamma_in_psi: bool = False

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError("species count n must be a positive integer")
        object.__setattr__(self, "n", int(self.n))
        A = np.asarray(self.A, dtype=float)
        if A.shape != (self.n, self.n):
            raise ValueError(f"A must be {self.n}x{self.n}, got {A.shape}")
        if not np.array_equal(A, A.T):
            raise ValueError("growth-coefficient matrix A must equal its transpose exactly")
        b = _as_vector(self.b, self.n, "b")
        eta = _as_vector(self.eta, self.n, "eta")
        if not np.all(eta > 0.0):
            raise ValueError("all viscosities eta_i must be strictly positive")
        if not self.eta0 > 0.0:
            raise ValueError("empty-space viscosity eta0 must be strictly positive")
        if not self.barrier_scale > 0.0:
            raise ValueError("barrier_scale must be strictly positive")
        for name, arr in (("A", A), ("b", b), ("eta", eta)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "eta0", float(self.eta0))
        object.__setattr__(self, "barrier_scale", float(self.barrier_scale))

    @property
    def kp(self) -> np.ndarray:
        """Barrier penalties K_p,i = eta_i * k_b for the species variables."""
        return self.eta * self.barrier_scale

    @property
    def kp0(self) -> float:
        """Barrier penalty for the empty-space fraction."""
        return self.eta0 * self.barrier_scale


@dataclass(frozen=True)
class Constant:
    """Forcing that is constant in time (J/m^3)."""

    value: float

    def at(self, t: float, step: float) -> float:
        return self.value


@dataclass(frozen=True)
class Sinusoid:
    """offset + amplitude * sin(angular_frequency * clock).

    The clock is continuous simulation time by default; set clock="step" to
    drive the argument with the step index instead.
    """

    offset: float
    amplitude: float
    angular_frequency: float
    clock: str = "time"

    def __post_init__(self):
        if self.clock not in ("time", "step"):
            raise ValueError("clock must be 'time' or 'step'")

    def at(self, t: float, step: float) -> float:
        arg = t if self.clock == "time" else step
        return self.offset + self.amplitude * np.sin(self.angular_frequency * arg)


@dataclass(frozen=True)
class Step:
    """Piecewise-constant forcing switching from `before` to `after`.

    The switch threshold is a step index by default (value `after` holds
    strictly beyond `switch_step`); set clock="time" to compare against
    continuous time instead.
    """

    switch_step: float
    before: float
    after: float
    clock: str = "step"

    def __post_init__(self):
        if self.clock not in ("time", "step"):
            raise ValueError("clock must be 'time' or 'step'")

    def at(self, t: float, step: float) -> float:
        arg = step if self.clock == "step" else t
        return self.after if arg > self.switch_step else self.before


ForcingSignal = Constant | Sinusoid | Step


@dataclass(frozen=True)
class SimState:
    """One solution point of the constrained system.

    t      simulation time
    phi0   empty-space volume fraction
    phi    length-n volume fractions
    psi    length-n living fractions
    gamma  Lagrange multiplier, J/m^3
    """

    t: float
    phi0: float
    phi: np.ndarray
    psi: np.ndarray
    gamma: float

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        psi = np.asarray(self.psi, dtype=float)
        if phi.ndim != 1 or phi.shape != psi.shape:
            raise ValueError("phi and psi must be 1-d vectors of equal length")
        phi.setflags(write=False)
        psi.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "phi0", float(self.phi0))
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def n(self) -> int:
        return self.phi.shape[0]

    def constraint_violation(self) -> float:
        return abs(self.phi0 + self.phi.sum() - 1.0)


def pack_state(state: SimState) -> np.ndarray:
    """Flatten a state into the documented unknown ordering."""
    n = state.n
    u = np.empty(2 * n + 2)
    u[0] = state.phi0
    u[1:1 + n] = state.phi
    u[1 + n:1 + 2 * n] = state.psi
    u[-1] = state.gamma
    return u


def unpack_state(u: np.ndarray, t: float, n: int) -> SimState:
    """Inverse of pack_state."""
    return SimState(t=t, phi0=u[0], phi=u[1:1 + n].copy(),
                    psi=u[1 + n:1 + 2 * n].copy(), gamma=u[-1])


def living_fractions(phi, psi) -> np.ndarray:
    """Volume share occupied by living cells, phi_i * psi_i."""
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if phi.shape != psi.shape:
        raise ValueError(f"phi and psi shapes differ: {phi.shape} vs {psi.shape}")
    return phi * psi


def dead_fractions(phi, psi) -> np.ndarray:
    """Volume share occupied by dead cells, phi_i * (1 - psi_i)."""
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if phi.shape != psi.shape:
        raise ValueError(f"phi and psi shapes differ: {phi.shape} vs {psi.shape}")
    return phi * (1.0 - psi)


def interaction_drive(phibar, A) -> np.ndarray:
    """Growth interaction term A @ phibar (full symmetric product)."""
    phibar = np.asarray(phibar, dtype=float)
    A = np.asarray(A, dtype=float)
    if A.shape != (phibar.size, phibar.size):
        raise ValueError(f"A shape {A.shape} does not match phibar length {phibar.size}")
    return A @ phibar


def free_energy_density(state: SimState, params: ModelParams,
                        c: float, alpha: float) -> float:
    """Free-energy density: nutrient gain on living biomass, antibiotic cost.

    Returns -c/2 * phibar.A.phibar + alpha/2 * sum(b_i psi_i^2), in J/m^3.
    """
    if state.n != params.n:
        raise ValueError("state dimension does not match params")
    phibar = living_fractions(state.phi, state.psi)
    return (-0.5 * c * phibar @ (params.A @ phibar)
            + 0.5 * alpha * np.sum(params.b * state.psi ** 2))


def barrier_force(x, kp):
    """Derivative of the log barrier -kp*(ln x + ln(1-x)); keeps x in (0, 1).

    Accepts scalars or arrays (elementwise).  Raises DomainError outside the
    open interval, which signals a failed step to the caller.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0) or np.any(x >= 1.0):
        raise DomainError(f"barrier argument outside (0, 1): {x!r}")
    out = kp * (1.0 / (1.0 - x) - 1.0 / x)
    return out if out.ndim else float(out)


def barrier_curvature(x, kp):
    """Second derivative of the log barrier, kp*(1/(1-x)^2 + 1/x^2)."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0) or np.any(x >= 1.0):
        raise DomainError(f"barrier argument outside (0, 1): {x!r}")
    out = kp * (1.0 / (1.0 - x) ** 2 + 1.0 / x ** 2)
    return out if out.ndim else float(out)


def dissipation_potential(phi, psi, phi0_rate, phi_rates, psi_rates,
                          params: ModelParams) -> float:
    """Dissipation potential, quadratic in the rates.

    Couples phi and psi rates through the living-biomass rate
    d(phi_i psi_i)/dt = phidot_i psi_i + phi_i psidot_i, and includes the
    empty-space closure term eta0/2 * phi0dot^2.
    """
    phi = _as_vector(phi, params.n, "phi")
    psi = _as_vector(psi, params.n, "psi")
    phi_rates = _as_vector(phi_rates, params.n, "phi_rates")
    psi_rates = _as_vector(psi_rates, params.n, "psi_rates")
    phibar_rates = phi_rates * psi + phi * psi_rates
    return 0.5 * float(
        np.sum(params.eta * (phibar_rates ** 2 + phi_rates ** 2))
        + params.eta0 * phi0_rate ** 2
    )


def dissipation_rate(state: SimState, phi0_rate, phi_rates, psi_rates,
                     params: ModelParams) -> float:
    """Instantaneous dissipation monitor, twice the dissipation potential.

    Non-negative for every input by construction (sum of weighted squares).
    """
    if state.n != params.n:
        raise ValueError("state dimension does not match params")
    return 2.0 * dissipation_potential(state.phi, state.psi, phi0_rate,
                                       phi_rates, psi_rates, params)


def _residual_smooth(u_new: np.ndarray, u_old: np.ndarray, dt: float,
                     params: ModelParams, c: float, alpha: float) -> np.ndarray:
    """Backward-Euler residual without the barrier terms (array fast path)."""
    n = params.n
    phi0, phi, psi, gamma = u_new[0], u_new[1:1 + n], u_new[1 + n:1 + 2 * n], u_new[-1]
    dphi0 = (phi0 - u_old[0]) / dt
    dphi = (phi - u_old[1:1 + n]) / dt
    dpsi = (psi - u_old[1 + n:1 + 2 * n]) / dt
    drive = params.A @ (phi * psi)
    R = np.empty(2 * n + 2)
    R[0] = params.eta0 * dphi0 + gamma
    R[1:1 + n] = (-c * psi * drive
                  + params.eta * (dphi * psi ** 2 + phi * psi * dpsi + dphi)
                  + gamma)
    R[1 + n:1 + 2 * n] = (-c * phi * drive + alpha * params.b * psi
                          + params.eta * (dpsi * phi ** 2 + phi * psi * dphi))
    if params.gamma_in_psi:
        R[1 + n:1 + 2 * n] += gamma
    R[-1] = phi0 + phi.sum() - 1.0
    return R


def _jacobian_smooth(u_new: np.ndarray, u_old: np.ndarray, dt: float,
                     params: ModelParams, c: float, alpha: float) -> np.ndarray:
    """Analytic derivative of _residual_smooth with respect to u_new."""
    n = params.n
    D = 1.0 / dt
    phi, psi = u_new[1:1 + n], u_new[1 + n:1 + 2 * n]
    dphi = (phi - u_old[1:1 + n]) / dt
    dpsi = (psi - u_old[1 + n:1 + 2 * n]) / dt
    drive = params.A @ (phi * psi)
    J = np.zeros((2 * n + 2, 2 * n + 2))
    iphi = slice(1, 1 + n)
    ipsi = slice(1 + n, 1 + 2 * n)
    J[0, 0] = params.eta0 * D
    J[0, -1] = 1.0
    J[iphi, iphi] = (-c * np.outer(psi, psi) * params.A
                     + np.diag(params.eta * (D * psi ** 2 + psi * dpsi + D)))
    J[iphi, ipsi] = (-c * (np.diag(drive) + np.outer(psi, phi) * params.A)
                     + np.diag(params.eta * (2.0 * dphi * psi + phi * dpsi + phi * psi * D)))
    J[iphi, -1] = 1.0
    J[ipsi, iphi] = (-c * (np.diag(drive) + np.outer(phi, psi) * params.A)
                     + np.diag(params.eta * (2.0 * dpsi * phi + psi * dphi + phi * psi * D)))
    J[ipsi, ipsi] = (-c * np.outer(phi, phi) * params.A
                     + np.diag(alpha * params.b + params.eta * (D * phi ** 2 + phi * dphi)))
    if params.gamma_in_psi:
        J[ipsi, -1] = 1.0
    J[-1, 0] = 1.0
    J[-1, iphi] = 1.0
    return J


def _check_step_args(new: SimState, old: SimState, dt: float, params: ModelParams):
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if new.n != params.n or old.n != params.n:
        raise ValueError("state dimensions do not match params")
    fr = np.concatenate(([new.phi0], new.phi, new.psi))
    if np.any(fr <= 0.0) or np.any(fr >= 1.0):
        raise DomainError("fractions of the trial state left the open interval (0, 1)")


def residual(new: SimState, old: SimState, dt: float, params: ModelParams,
             c_value: float, alpha_value: float) -> np.ndarray:
    """Discrete residual of the evolution equations, rows in unknown order.

    Rates are backward differences (new - old)/dt and every state-dependent
    term is evaluated at `new` (fully implicit).  Rows:

        R_phi0 = eta0*phi0dot + gamma + barrier(phi0)
        R_phi_i = -c*psi_i*(A phibar)_i
                  + eta_i*(phidot_i psi_i^2 + phi_i psi_i psidot_i + phidot_i)
                  + gamma + barrier(phi_i)
        R_psi_i = -c*phi_i*(A phibar)_i + alpha*b_i*psi_i
                  + eta_i*(psidot_i phi_i^2 + phi_i psi_i phidot_i)
                  [+ gamma if params.gamma_in_psi] + barrier(psi_i)
        R_gamma = phi0 + sum(phi) - 1
    """
    _check_step_args(new, old, dt, params)
    u_new = pack_state(new)
    u_old = pack_state(old)
    R = _residual_smooth(u_new, u_old, dt, params, c_value, alpha_value)
    n = params.n
    R[0] += barrier_force(new.phi0, params.kp0)
    R[1:1 + n] += barrier_force(new.phi, params.kp)
    R[1 + n:1 + 2 * n] += barrier_force(new.psi, params.kp)
    return R


def jacobian(new: SimState, old: SimState, dt: float, params: ModelParams,
             c_value: float, alpha_value: float) -> np.ndarray:
    """Analytic Jacobian of `residual` with respect to the entries of `new`."""
    _check_step_args(new, old, dt, params)
    u_new = pack_state(new)
    u_old = pack_state(old)
    J = _jacobian_smooth(u_new, u_old, dt, params, c_value, alpha_value)
    n = params.n
    diag = np.empty(2 * n + 1)
    diag[0] = barrier_curvature(new.phi0, params.kp0)
    diag[1:1 + n] = barrier_curvature(new.phi, params.kp)
    diag[1 + n:] = barrier_curvature(new.psi, params.kp)
    idx = np.arange(2 * n + 1)
    J[idx, idx] += diag
    return J


def clamp_fraction(x):
    """Pull values lying exactly on 0 or 1 inside by BOUNDARY_CLAMP."""
    return np.clip(np.asarray(x, dtype=float), BOUNDARY_CLAMP, 1.0 - BOUNDARY_CLAMP)


def initial_state(initial_phi, initial_psi=None) -> SimState:
    """Build the t=0 state: phi0 closes the constraint exactly, gamma = 0."""
    phi = np.asarray(initial_phi, dtype=float)
    if initial_psi is None:
        psi = np.ones_like(phi)
    else:
        psi = np.asarray(initial_psi, dtype=float)
        if psi.shape != phi.shape:
            raise ValueError("initial_psi length does not match initial_phi")
    if phi.sum() >= 1.0:
        raise ValueError("initial volume fractions must sum to less than 1")
    phi = clamp_fraction(phi)
    psi = clamp_fraction(psi)
    phi0 = 1.0 - phi.sum()
    if not 0.0 < phi0 < 1.0:
        phi0 = float(clamp_fraction(phi0))
    return SimState(t=0.0, phi0=phi0, phi=phi, psi=psi, gamma=0.0)
