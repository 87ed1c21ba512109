"""CSV serialization of trajectories.

Column order is fixed: step, t, phi0, phi_1..phi_n, psi_1..psi_n,
phibar_1..phibar_n, gamma, nutrient, antibiotic, dissipation,
newton_iterations, residual_norm.  Numbers carry 17 significant digits so
files reproduce bit-identical runs.
"""
from __future__ import annotations

import csv
import io

from .model import living_fractions
from .solver import Trajectory


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def csv_header(n: int) -> list[str]:
    cols = ["step", "t", "phi0"]
    cols += [f"phi_{i}" for i in range(1, n + 1)]
    cols += [f"psi_{i}" for i in range(1, n + 1)]
    cols += [f"phibar_{i}" for i in range(1, n + 1)]
    cols += ["gamma", "nutrient", "antibiotic", "dissipation",
             "newton_iterations", "residual_norm"]
    return cols


def render_trajectory(traj: Trajectory) -> str:
    """Render the trajectory as CSV text, thinned by the configured stride."""
    if traj.config is None:
        raise ValueError("trajectory carries no scenario configuration")
    stride = traj.config.output_stride
    nutrient = traj.config.nutrient
    antibiotic = traj.config.antibiotic
    n = traj.n
    buff = io.StringIO()
    writer = csv.writer(buff, lineterminator="\n")
    writer.writerow(csv_header(n))
    last = len(traj.states) - 1
    for k, (state, diag) in enumerate(zip(traj.states, traj.diagnostics)):
        if k % stride != 0 and k != last:
            continue
        phibar = living_fractions(state.phi, state.psi)
        row = [str(k), _fmt(state.t), _fmt(state.phi0)]
        row += [_fmt(v) for v in state.phi]
        row += [_fmt(v) for v in state.psi]
        row += [_fmt(v) for v in phibar]
        row += [
            _fmt(state.gamma),
            _fmt(nutrient.at(state.t, k)),
            _fmt(antibiotic.at(state.t, k)),
            _fmt(diag.dissipation),
            str(diag.newton_iterations),
            _fmt(diag.final_residual_norm),
        ]
        writer.writerow(row)
    return buff.getvalue()


def write_trajectory(traj: Trajectory, destination) -> None:
    """Write the trajectory CSV to a path; the file ends with a newline."""
    text = render_trajectory(traj)
    with open(destination, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
