"""Independent numerical oracles for the model and the stepper.

Three finite-difference checks validate the analytic force terms and the
Jacobian against the potentials they are supposed to derive from.  A
reference integrator re-derives the dynamics on an independent code path:
differentiating the volume constraint turns the implicit system into a
rate-linear problem M(state) * (rates, gamma) = f(state), which an implicit
stiff ODE method integrates between output points.  Figure-level checks
assert the qualitative outcomes of the built-in scenarios.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .model import (
    ModelParams,
    SimState,
    barrier_force,
    dissipation_potential,
    free_energy_density,
    jacobian,
    pack_state,
    residual,
    unpack_state,
)
from .scenarios import PRESET_NAMES, ScenarioConfig, preset
from .solver import StepDiagnostics, Termination, Trajectory, run

FD_STEP = 1e-6
FD_RTOL = 1e-6
FD_ATOL = 1e-10


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one verification check."""

    name: str
    passed: bool
    worst_error: float
    location: str
    seed: int | None = None


def _random_interior_state(rng, n: int, t: float = 0.0) -> SimState:
    """State with all fractions away from the bounds and a modest multiplier."""
    phi = rng.uniform(0.15, 0.85 / n, n)
    psi = rng.uniform(0.15, 0.85, n)
    phi0 = rng.uniform(0.05, max(0.06, 1.0 - phi.sum() - 0.05))
    gamma = rng.uniform(-50.0, 50.0)
    return SimState(t=t, phi0=phi0, phi=phi, psi=psi, gamma=gamma)


def _fd_gradient(f, x0: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    grad = np.empty_like(x0)
    for i in range(x0.size):
        xp = x0.copy()
        xm = x0.copy()
        xp[i] += h
        xm[i] -= h
        grad[i] = (f(xp) - f(xm)) / (2.0 * h)
    return grad


def check_energy_gradient(params: ModelParams, sample_count: int,
                          seed: int = 0) -> CheckReport:
    """Energy force terms versus central differences of the energy density.

    At randomized interior states the analytic driving terms of the volume
    and living-fraction equations (residual minus barrier at zero rates and
    zero multiplier) must match d(free_energy_density)/d(phi_i, psi_i).
    """
    rng = np.random.default_rng(seed)
    n = params.n
    worst = 0.0
    where = ""
    for k in range(sample_count):
        state = _random_interior_state(rng, n)
        state = SimState(state.t, state.phi0, state.phi, state.psi, gamma=0.0)
        c = rng.uniform(0.0, 150.0)
        alpha = rng.uniform(0.0, 20.0)
        R = residual(state, state, 1.0, params, c, alpha)
        analytic_phi = R[1:1 + n] - barrier_force(state.phi, params.kp)
        analytic_psi = R[1 + n:1 + 2 * n] - barrier_force(state.psi, params.kp)

        def energy_phi(phi):
            s = SimState(state.t, state.phi0, phi, state.psi, 0.0)
            return free_energy_density(s, params, c, alpha)

        def energy_psi(psi):
            s = SimState(state.t, state.phi0, state.phi, psi, 0.0)
            return free_energy_density(s, params, c, alpha)

        fd = np.concatenate([_fd_gradient(energy_phi, state.phi.copy()),
                             _fd_gradient(energy_psi, state.psi.copy())])
        analytic = np.concatenate([analytic_phi, analytic_psi])
        # relative to the gradient scale: per-component ratios on near-zero
        # entries would only measure the rounding noise of the differences
        scale = max(float(np.abs(fd).max()), FD_ATOL / FD_RTOL)
        err = np.abs(analytic - fd) / scale
        i = int(np.argmax(err))
        if err[i] > worst:
            worst = float(err[i])
            where = f"sample {k}, component {i}"
    return CheckReport("energy-gradient", worst <= FD_RTOL, worst, where, seed)


def check_dissipation_gradient(params: ModelParams, sample_count: int,
                               seed: int = 1) -> CheckReport:
    """Viscous force terms versus central differences of the rate potential.

    The rate-dependent part of the residual (difference of residuals with
    moving and frozen history) must equal the gradient of the dissipation
    potential with respect to the rates.
    """
    rng = np.random.default_rng(seed)
    n = params.n
    worst = 0.0
    where = ""
    for k in range(sample_count):
        new = _random_interior_state(rng, n)
        dt = 10.0 ** rng.uniform(-4.0, -1.0)
        rates = rng.uniform(-3.0, 3.0, 2 * n + 1)
        old_vec = pack_state(new)
        old_vec[:2 * n + 1] -= dt * rates
        old = unpack_state(old_vec, new.t - dt, n)
        c = rng.uniform(0.0, 150.0)
        alpha = rng.uniform(0.0, 20.0)
        analytic = (residual(new, old, dt, params, c, alpha)
                    - residual(new, new, dt, params, c, alpha))[:2 * n + 1]

        def potential(r):
            return dissipation_potential(new.phi, new.psi, r[0], r[1:1 + n],
                                         r[1 + n:], params)

        fd = _fd_gradient(potential, rates.copy())
        scale = max(float(np.abs(fd).max()), FD_ATOL / FD_RTOL)
        err = np.abs(analytic - fd) / scale
        i = int(np.argmax(err))
        if err[i] > worst:
            worst = float(err[i])
            where = f"sample {k}, rate component {i}"
    return CheckReport("dissipation-gradient", worst <= FD_RTOL, worst, where, seed)


def check_jacobian(params: ModelParams, sample_count: int,
                   seed: int = 2) -> CheckReport:
    """Analytic Jacobian versus a central-difference Jacobian of the residual."""
    rng = np.random.default_rng(seed)
    n = params.n
    m = 2 * n + 2
    worst = 0.0
    where = ""
    for k in range(sample_count):
        new = _random_interior_state(rng, n)
        dt = 10.0 ** rng.uniform(-3.0, -1.0)
        old_vec = pack_state(new)
        old_vec[:2 * n + 1] += rng.uniform(-0.03, 0.03, 2 * n + 1)
        old = unpack_state(old_vec, new.t - dt, n)
        c = rng.uniform(0.0, 150.0)
        alpha = rng.uniform(0.0, 20.0)
        J = jacobian(new, old, dt, params, c, alpha)
        u0 = pack_state(new)
        J_fd = np.empty((m, m))
        for s in range(m):
            up = u0.copy()
            um = u0.copy()
            up[s] += FD_STEP
            um[s] -= FD_STEP
            J_fd[:, s] = (residual(unpack_state(up, new.t, n), old, dt, params, c, alpha)
                          - residual(unpack_state(um, new.t, n), old, dt, params, c, alpha)
                          ) / (2.0 * FD_STEP)
        scale = max(1.0, float(np.abs(J).max()))
        err = float(np.abs(J - J_fd).max()) / scale
        if err > worst:
            worst = err
            r, s = np.unravel_index(int(np.argmax(np.abs(J - J_fd))), (m, m))
            where = f"sample {k}, entry ({r},{s})"
    return CheckReport("jacobian", worst <= FD_RTOL, worst, where, seed)


# ---------------------------------------------------------------------------
# reference integrator (independent path; only ModelParams is shared)

def _reference_rate_system(z: np.ndarray, params: ModelParams,
                           c: float, alpha: float) -> np.ndarray:
    """Solve M(state) * (rates, gamma) = f(state) for the index-reduced rates.

    All force expressions are written out locally so this path stays
    independent of the residual/jacobian implementation.
    """
    n = params.n
    phi0, phi, psi = z[0], z[1:1 + n], z[1 + n:1 + 2 * n]
    phibar = phi * psi
    drive = params.A @ phibar
    kp = params.eta * params.barrier_scale
    kp0 = params.eta0 * params.barrier_scale

    def bf(x, k):
        return k * (1.0 / (1.0 - x) - 1.0 / x)

    size = 2 * n + 2
    M = np.zeros((size, size))
    f = np.zeros(size)
    M[0, 0] = params.eta0
    M[0, -1] = 1.0
    f[0] = -bf(phi0, kp0)
    for i in range(n):
        r = 1 + i
        M[r, 1 + i] = params.eta[i] * (psi[i] ** 2 + 1.0)
        M[r, 1 + n + i] = params.eta[i] * phi[i] * psi[i]
        M[r, -1] = 1.0
        f[r] = c * psi[i] * drive[i] - bf(phi[i], kp[i])
        r = 1 + n + i
        M[r, 1 + i] = params.eta[i] * phi[i] * psi[i]
        M[r, 1 + n + i] = params.eta[i] * phi[i] ** 2
        if params.gamma_in_psi:
            M[r, -1] = 1.0
        f[r] = (c * phi[i] * drive[i] - alpha * params.b[i] * psi[i]
                - bf(psi[i], kp[i]))
    M[-1, 0] = 1.0
    M[-1, 1:1 + n] = 1.0
    return np.linalg.solve(M, f)


def reference_trajectory(config: ScenarioConfig, substep_factor: int = 10,
                         rtol: float = 1e-8, atol: float = 1e-12) -> Trajectory:
    """Integrate the scenario with an implicit stiff method between outputs.

    Output points coincide with the main solver's grid.  The integrator's
    internal step never exceeds dt/substep_factor.  The barrier forces make
    the rate system extremely stiff whenever a fraction is pinned near a
    bound, so an L-stable implicit method (Radau IIA) does the sub-stepping;
    an explicit scheme would need steps around a thousandth of dt to stay
    stable in those phases.
    """
    if substep_factor < 10:
        raise ValueError("substep_factor must be at least 10")
    params = config.params
    dt = config.settings.dt
    steps = config.settings.steps
    n = params.n
    m = 2 * n + 1

    def rhs(t, z):
        c = float(config.nutrient.at(t, t / dt))
        alpha = float(config.antibiotic.at(t, t / dt))
        return _reference_rate_system(z, params, c, alpha)[:m]

    start = config.initial_state()
    z0 = pack_state(start)[:m]
    grid = np.arange(steps + 1) * dt
    if steps == 0:
        sol_y = z0[:, None]
    else:
        sol = solve_ivp(rhs, (0.0, steps * dt), z0, method="Radau",
                        t_eval=grid, rtol=rtol, atol=atol,
                        max_step=dt / substep_factor)
        if sol.status != 0 or not sol.success:
            raise RuntimeError(f"reference integration failed at t={sol.t[-1]:.6g}: "
                               f"{sol.message}")
        sol_y = sol.y

    states = []
    diagnostics = []
    for k in range(sol_y.shape[1]):
        z = sol_y[:, k]
        t = grid[k]
        c = float(config.nutrient.at(t, float(k)))
        alpha = float(config.antibiotic.at(t, float(k)))
        v = _reference_rate_system(z, params, c, alpha)
        gamma = float(v[-1])
        states.append(SimState(t=t, phi0=z[0], phi=z[1:1 + n].copy(),
                               psi=z[1 + n:].copy(), gamma=gamma))
        rates = v[:m]
        phibar_rates = rates[1:1 + n] * z[1 + n:] + z[1:1 + n] * rates[1 + n:]
        diss = float(np.sum(params.eta * (phibar_rates ** 2 + rates[1:1 + n] ** 2))
                     + params.eta0 * rates[0] ** 2)
        diagnostics.append(StepDiagnostics(0, 0.0, diss,
                                           abs(z[0] + z[1:1 + n].sum() - 1.0)))
    return Trajectory(states=states, diagnostics=diagnostics, config=config,
                      termination=Termination("completed", steps))


def compare_fractions(a: Trajectory, b: Trajectory, skip_first: bool = True) -> float:
    """Max absolute difference of (phi0, phi, psi) across matching steps.

    The multiplier is excluded: it is an algebraic readout whose value at a
    grid point depends on the discretization, not part of the state proper.
    """
    ka = len(a.states)
    kb = len(b.states)
    count = min(ka, kb)
    start = 1 if skip_first else 0
    worst = 0.0
    for k in range(start, count):
        sa, sb = a.states[k], b.states[k]
        d = max(abs(sa.phi0 - sb.phi0),
                float(np.abs(sa.phi - sb.phi).max()),
                float(np.abs(sa.psi - sb.psi).max()))
        worst = max(worst, d)
    return worst


# ---------------------------------------------------------------------------
# figure-level checks on the built-in scenarios

def _space_exhaustion_step(traj: Trajectory, threshold: float = 0.01) -> int:
    phi0 = traj.phi0()
    hits = np.nonzero(phi0 < threshold)[0]
    return int(hits[0]) if hits.size else -1


def _report(name: str, passed: bool, margin: float, location: str) -> CheckReport:
    return CheckReport(name, bool(passed), float(margin), location)


def figure_checks(trajectories: dict[str, Trajectory] | None = None) -> list[CheckReport]:
    """Run every preset and test the scenario-level claims about the outcomes.

    A pre-computed {name: trajectory} map may be passed to avoid re-running.
    """
    if trajectories is None:
        trajectories = {}
    for name in PRESET_NAMES:
        if name not in trajectories:
            trajectories[name] = run(preset(name))

    reports: list[CheckReport] = []
    for name in PRESET_NAMES:
        term = trajectories[name].termination
        reports.append(_report(f"{name}-completes", term.ok, 0.0,
                               f"termination: {term.reason} at step {term.step}"))

    dt = preset("two-1").settings.dt

    # two-1: by the time space is exhausted, species 2 is already receding
    tr = trajectories["two-1"]
    phi = tr.phi()
    psi = tr.psi()
    evt = _space_exhaustion_step(tr)
    if evt > 0:
        p2 = phi[evt, 1]
        slope = (phi[evt, 1] - phi[evt - 1, 1]) / dt
        reports.append(_report("two-1-exclusion-onset",
                               0.05 <= p2 <= 0.15 and slope < 0.0, p2,
                               f"step {evt}, phi2={p2:.4f}, dphi2/dt={slope:+.3f}"))
    else:
        reports.append(_report("two-1-exclusion-onset", False, -1.0,
                               "empty space never fell below 0.01"))
    crossed = np.nonzero(phi[:, 1] < 0.05)[0]
    final_psi2 = psi[-1, 1]
    reports.append(_report(
        "two-1-species2-decline",
        crossed.size > 0 and phi[-1, 0] > phi[-1, 1] and final_psi2 < 0.5,
        final_psi2,
        f"phi2<0.05 at step {crossed[0] if crossed.size else -1}, "
        f"final psi2={final_psi2:.12f}"))

    # two-2: slower species 2 is still expanding when space runs out, and the
    # long-run outcome matches two-1
    tr = trajectories["two-2"]
    phi = tr.phi()
    evt = _space_exhaustion_step(tr)
    if evt > 0:
        p2 = phi[evt, 1]
        slope = (phi[evt, 1] - phi[evt - 1, 1]) / dt
        reports.append(_report("two-2-lagged-onset",
                               0.25 <= p2 <= 0.35 and slope > 0.0, p2,
                               f"step {evt}, phi2={p2:.4f}, dphi2/dt={slope:+.3f}"))
    else:
        reports.append(_report("two-2-lagged-onset", False, -1.0,
                               "empty space never fell below 0.01"))
    gap = abs(phi[-1, 1] - trajectories["two-1"].phi()[-1, 1])
    reports.append(_report("two-2-matches-two-1-endstate", gap < 0.05, gap,
                           f"|final phi2 difference| = {gap:.2e}"))

    # two-3: cooperation keeps both species alive
    phi = trajectories["two-3"].phi()
    reports.append(_report("two-3-coexistence",
                           phi[-1, 0] > 0.05 and phi[-1, 1] > 0.05,
                           float(phi[-1].min()),
                           f"final phi = ({phi[-1, 0]:.4f}, {phi[-1, 1]:.4f})"))

    # two-4 / two-5: initial-volume advantage decides the winner
    phi = trajectories["two-4"].phi()
    reports.append(_report("two-4-species2-prevails", phi[-1, 1] > phi[-1, 0],
                           phi[-1, 1] - phi[-1, 0],
                           f"final phi = ({phi[-1, 0]:.4f}, {phi[-1, 1]:.4f})"))
    phi = trajectories["two-5"].phi()
    reports.append(_report("two-5-species1-prevails", phi[-1, 0] > phi[-1, 1],
                           phi[-1, 0] - phi[-1, 1],
                           f"final phi = ({phi[-1, 0]:.4f}, {phi[-1, 1]:.4f})"))

    # two-6: the slower species wins the inhibitory contest with its living
    # fraction intact
    tr = trajectories["two-6"]
    phi = tr.phi()
    min_psi = tr.psi().min(axis=0)
    reports.append(_report("two-6-slow-species-dominates",
                           phi[-1, 1] > phi[-1, 0], phi[-1, 1] - phi[-1, 0],
                           f"final phi = ({phi[-1, 0]:.4f}, {phi[-1, 1]:.4f})"))
    reports.append(_report("two-6-living-fractions-high",
                           bool(np.all(min_psi >= 0.5)), float(min_psi.min()),
                           f"min psi over time = ({min_psi[0]:.4f}, {min_psi[1]:.4f})"))

    # four-1: graded sensitivity, species 4 keeps a living reserve, species 1
    # ends dominant
    tr = trajectories["four-1"]
    min_psi4 = float(tr.psi()[:, 3].min())
    winner = int(np.argmax(tr.phi()[-1]))
    reports.append(_report("four-1-species4-reserve",
                           0.15 <= min_psi4 <= 0.30, min_psi4,
                           f"min psi4 = {min_psi4:.4f}"))
    reports.append(_report("four-1-species1-dominates", winner == 0,
                           float(winner),
                           f"largest final phi is species {winner + 1}"))

    # four-2: the head start persists
    phi = trajectories["four-2"].phi()
    reports.append(_report("four-2-headstart-persists",
                           phi[-1, 3] > phi[-1, 2], phi[-1, 3] - phi[-1, 2],
                           f"final phi3={phi[-1, 2]:.4f}, phi4={phi[-1, 3]:.4f}"))

    # four-4: the pulse kills the sensitive species almost immediately and the
    # resistant one takes the space
    tr = trajectories["four-4"]
    psi = tr.psi()
    switch = 500
    latest = -1
    for i in range(3):
        below = np.nonzero(psi[:, i] < 0.1)[0]
        first = int(below[0]) if below.size else 10 ** 9
        latest = max(latest, first)
    winner = int(np.argmax(tr.phi()[-1]))
    reports.append(_report("four-4-rapid-kill",
                           switch < latest <= switch + 100, float(latest),
                           f"last sensitive species under 0.1 at step {latest}"))
    reports.append(_report("four-4-resistant-takeover", winner == 3,
                           float(winner),
                           f"largest final phi is species {winner + 1}"))
    return reports


# ---------------------------------------------------------------------------
# orchestration

def _check_params() -> dict[int, ModelParams]:
    one = ModelParams(n=1, A=np.array([[1.5]]), b=np.array([0.7]),
                      eta=np.array([1.2]))
    two = preset("two-1").params
    four = preset("four-1").params
    return {1: one, 2: two, 4: four}


def run_verification(quick: bool = False) -> list[CheckReport]:
    """Full verification battery; `quick` trims samples and skips the
    reference-integrator comparison."""
    samples = 25 if quick else 100
    jac_samples = 15 if quick else 50
    reports: list[CheckReport] = []
    for n, params in _check_params().items():
        for check, count in ((check_energy_gradient, samples),
                             (check_dissipation_gradient, samples),
                             (check_jacobian, jac_samples)):
            rep = check(params, count)
            reports.append(CheckReport(f"{rep.name}-n{n}", rep.passed,
                                       rep.worst_error, rep.location, rep.seed))
    trajectories: dict[str, Trajectory] = {}
    reports.extend(figure_checks(trajectories))
    if not quick:
        config = preset("two-1")
        ref = reference_trajectory(config, substep_factor=10)
        gap = compare_fractions(trajectories["two-1"], ref)
        reports.append(CheckReport("reference-agreement-two-1", gap <= 1e-3,
                                   gap, f"max fraction discrepancy {gap:.3e}"))
    return reports


def write_report(reports: list[CheckReport], path) -> None:
    """Machine-readable summary, one row per check."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["check", "passed", "worst_error", "location", "seed"])
        for r in reports:
            writer.writerow([r.name, str(r.passed).lower(),
                             format(r.worst_error, ".17g"), r.location,
                             "" if r.seed is None else str(r.seed)])
