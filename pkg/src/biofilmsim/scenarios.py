"""Scenario configuration: schema, validation, text format, and presets.

The configuration text format is a line-oriented sectioned key=value file:

    [model]
    n = 2
    row1 = 2, 0
    row2 = 0, 1
    # optional: eta0, barrier_scale, gamma_in_psi

    [species.1]
    b = 0
    eta = 1
    phi0_initial = 0.2
    # optional: psi_initial (default 1)

    [forcing.nutrient]
    kind = "constant"
    value = 100

    [forcing.antibiotic]
    kind = "step"
    switch_step = 500
    before = 0
    after = 100

    [solver]          # optional section
    dt = 1e-4
    steps = 1500

    [output]          # optional section
    stride = 1
    path = "run.csv"

Values are decimal numbers, quoted strings, or comma-separated numeric
lists; '#' starts a comment.
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, replace

import numpy as np

from .model import (
    Constant,
    ForcingSignal,
    ModelParams,
    SimState,
    Sinusoid,
    Step,
    initial_state,
)
from .solver import SolverSettings


class ConfigError(ValueError):
    """Configuration rejected; `code` identifies the rule that failed."""

    def __init__(self, message: str, code: str, line: int | None = None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where} [{code}]")
        self.code = code
        self.line = line


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to run one simulation."""

    params: ModelParams
    initial_phi: np.ndarray
    initial_psi: np.ndarray
    nutrient: ForcingSignal
    antibiotic: ForcingSignal
    settings: SolverSettings
    output_path: str | None = None
    output_stride: int = 1
    name: str = ""

    def __post_init__(self):
        phi = np.asarray(self.initial_phi, dtype=float)
        psi = np.asarray(self.initial_psi, dtype=float)
        n = self.params.n
        if phi.shape != (n,):
            raise ConfigError(f"initial_phi must have length {n}", "bad-dimension")
        if psi.shape != (n,):
            raise ConfigError(f"initial_psi must have length {n}", "bad-dimension")
        if np.any(phi < 0.0) or np.any(phi > 1.0) or np.any(psi < 0.0) or np.any(psi > 1.0):
            raise ConfigError("initial fractions must lie in [0, 1]", "initial-range")
        if phi.sum() >= 1.0:
            raise ConfigError("initial volume fractions must sum to less than 1",
                              "initial-phi-sum")
        if self.output_stride < 1:
            raise ConfigError("output stride must be at least 1", "bad-stride")
        phi.setflags(write=False)
        psi.setflags(write=False)
        object.__setattr__(self, "initial_phi", phi)
        object.__setattr__(self, "initial_psi", psi)

    def initial_state(self) -> SimState:
        return initial_state(self.initial_phi, self.initial_psi)


def permute_species(config: ScenarioConfig, perm) -> ScenarioConfig:
    """Relabel species by `perm`: new species i is old species perm[i]."""
    perm = np.asarray(perm, dtype=int)
    p = config.params
    if sorted(perm.tolist()) != list(range(p.n)):
        raise ValueError(f"perm must be a permutation of 0..{p.n - 1}")
    params = ModelParams(
        n=p.n,
        A=p.A[np.ix_(perm, perm)],
        b=p.b[perm],
        eta=p.eta[perm],
        eta0=p.eta0,
        barrier_scale=p.barrier_scale,
        gamma_in_psi=p.gamma_in_psi,
    )
    return replace(config, params=params,
                   initial_phi=config.initial_phi[perm],
                   initial_psi=config.initial_psi[perm],
                   name=f"{config.name}-perm" if config.name else "perm")


# ---------------------------------------------------------------------------
# presets

_TWO_SPECIES_FORCING = (Constant(100.0), Constant(10.0))

# columns: A entries (a11, a12, a22), b, eta, initial phi, steps
_TWO_SPECIES_TABLE = {
    "two-1": ((2.0, 0.0, 1.0), (0.0, 0.0), (1.0, 1.0), (0.2, 0.2), 1000),
    "two-2": ((1.0, 0.0, 1.0), (0.0, 0.0), (1.0, 2.0), (0.2, 0.2), 1500),
    "two-3": ((1.0, 1.0, 1.0), (0.0, 0.0), (1.0, 2.0), (0.2, 0.2), 1500),
    "two-4": ((1.0, 0.0, 1.0), (1.0, 2.0), (1.0, 2.0), (0.2, 0.3), 1500),
    "two-5": ((1.0, 0.0, 1.0), (1.0, 2.0), (1.0, 2.0), (0.25, 0.3), 1500),
    "two-6": ((1.0, -1.0, 1.0), (0.0, 0.0), (1.0, 2.0), (0.2, 0.2), 1500),
    # variations on cases 4 and 5: viscosities switched, then equalized
    "two-4s": ((1.0, 0.0, 1.0), (1.0, 2.0), (2.0, 1.0), (0.2, 0.3), 1500),
    "two-5s": ((1.0, 0.0, 1.0), (1.0, 2.0), (2.0, 1.0), (0.25, 0.3), 1500),
    "two-4ss": ((1.0, 0.0, 1.0), (1.0, 2.0), (1.0, 1.0), (0.2, 0.3), 1500),
    "two-5ss": ((1.0, 0.0, 1.0), (1.0, 2.0), (1.0, 1.0), (0.25, 0.3), 1500),
}

_FOUR_SPECIES_A = 0.5 * np.array([
    [1.0, 5.0, 5.0, 5.0],
    [5.0, 1.0, 3.0, 3.0],
    [5.0, 3.0, 1.0, 2.0],
    [5.0, 3.0, 2.0, 1.0],
])
_FOUR_SPECIES_ETA = (0.8, 1.0, 1.5, 2.0)

# columns: b, initial phi, nutrient signal, antibiotic signal
_FOUR_SPECIES_TABLE = {
    "four-1": ((0.4, 0.3, 0.2, 0.1), (0.02, 0.02, 0.02, 0.02),
               Constant(100.0), Constant(10.0)),
    "four-2": ((0.4, 0.3, 0.2, 0.1), (0.02, 0.02, 0.02, 0.2),
               Constant(100.0), Constant(10.0)),
    "four-3": ((0.4, 0.3, 0.2, 0.1), (0.02, 0.02, 0.02, 0.02),
               Sinusoid(offset=50.0, amplitude=50.0, angular_frequency=500.0),
               Constant(10.0)),
    "four-4": ((10.0, 2.0, 1.0, 0.01), (0.02, 0.02, 0.02, 0.02),
               Constant(100.0), Step(switch_step=500, before=0.0, after=100.0)),
}

PRESET_DESCRIPTIONS = {
    "two-1": "two species, unequal growth coefficients, no interaction",
    "two-2": "two species, unequal viscosities, no interaction",
    "two-3": "two species, mutually beneficial interaction",
    "two-4": "two species, antibiotic-sensitive, head start for species 2",
    "two-5": "two species, antibiotic-sensitive, closer initial fractions",
    "two-6": "two species, mutually inhibitory interaction",
    "two-4s": "variant of two-4 with the viscosities switched",
    "two-5s": "variant of two-5 with the viscosities switched",
    "two-4ss": "variant of two-4 with equal viscosities",
    "two-5ss": "variant of two-5 with equal viscosities",
    "four-1": "four species, equal starts, graded antibiotic sensitivity",
    "four-2": "four species, head start for species 4",
    "four-3": "four species, sinusoidal nutrient supply",
    "four-4": "four species, antibiotic pulse switched on at step 500",
}

PRESET_NAMES = tuple(PRESET_DESCRIPTIONS)


def preset(name: str) -> ScenarioConfig:
    """Return the published parameterization for one of the 14 scenarios."""
    # Preset runs use a fixed step count, so the early stop stays disabled.
    if name in _TWO_SPECIES_TABLE:
        (a11, a12, a22), b, eta, phi, steps = _TWO_SPECIES_TABLE[name]
        params = ModelParams(n=2, A=np.array([[a11, a12], [a12, a22]]),
                             b=np.array(b), eta=np.array(eta))
        nutrient, antibiotic = _TWO_SPECIES_FORCING
        settings = SolverSettings(steps=steps, steady_state_tolerance=0.0)
    elif name in _FOUR_SPECIES_TABLE:
        b, phi, nutrient, antibiotic = _FOUR_SPECIES_TABLE[name]
        params = ModelParams(n=4, A=_FOUR_SPECIES_A, b=np.array(b),
                             eta=np.array(_FOUR_SPECIES_ETA))
        settings = SolverSettings(steps=1500, steady_state_tolerance=0.0)
    else:
        known = ", ".join(PRESET_NAMES)
        raise KeyError(f"unknown preset {name!r}; valid names: {known}")
    return ScenarioConfig(
        params=params,
        initial_phi=np.array(phi),
        initial_psi=np.ones(params.n),
        nutrient=nutrient,
        antibiotic=antibiotic,
        settings=settings,
        name=name,
    )


# ---------------------------------------------------------------------------
# text format

_FORCING_KEYS = {
    "constant": ("value",),
    "sinusoid": ("offset", "amplitude", "angular_frequency"),
    "step": ("switch_step", "before", "after"),
}


def _parse_value(raw: str, section: str, key: str):
    """Decode a number, a quoted string, or a comma-separated number list."""
    raw = raw.strip()
    if not raw:
        raise ConfigError(f"empty value for {section}.{key}", "bad-value")
    if raw[0] in "\"'":
        if len(raw) < 2 or raw[-1] != raw[0]:
            raise ConfigError(f"unterminated string for {section}.{key}", "bad-value")
        return raw[1:-1]
    parts = [p.strip() for p in raw.split(",")]
    try:
        numbers = [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"cannot parse number(s) for {section}.{key}: {raw!r}",
                          "bad-value") from None
    return numbers if len(numbers) > 1 or "," in raw else numbers[0]


class _SectionView:
    def __init__(self, name: str, items: dict):
        self.name = name
        self._items = dict(items)
        self._used = set()

    def take(self, key: str, default=None, required: bool = False):
        if key not in self._items:
            if required:
                raise ConfigError(f"missing required key {self.name}.{key}",
                                  "missing-key")
            return default
        self._used.add(key)
        return _parse_value(self._items[key], self.name, key)

    def unused(self):
        return sorted(set(self._items) - self._used)


def _number(view: _SectionView, key: str, default=None, required=False) -> float | None:
    value = view.take(key, default=default, required=required)
    if value is None:
        return None
    if isinstance(value, list) or isinstance(value, str):
        raise ConfigError(f"{view.name}.{key} must be a single number", "bad-value")
    return float(value)


def _forcing_from_section(view: _SectionView) -> ForcingSignal:
    kind = view.take("kind", required=True)
    if not isinstance(kind, str):
        raise ConfigError(f"{view.name}.kind must be a quoted string", "bad-value")
    if kind not in _FORCING_KEYS:
        raise ConfigError(f"{view.name}.kind must be one of constant, sinusoid, step",
                          "unknown-kind")
    clock = view.take("clock")
    if clock is not None and clock not in ("time", "step"):
        raise ConfigError(f"{view.name}.clock must be 'time' or 'step'", "bad-value")
    if kind == "constant":
        return Constant(_number(view, "value", required=True))
    if kind == "sinusoid":
        sig = Sinusoid(
            offset=_number(view, "offset", required=True),
            amplitude=_number(view, "amplitude", required=True),
            angular_frequency=_number(view, "angular_frequency", required=True),
        )
        return replace(sig, clock=clock) if clock else sig
    sig = Step(
        switch_step=_number(view, "switch_step", required=True),
        before=_number(view, "before", required=True),
        after=_number(view, "after", required=True),
    )
    return replace(sig, clock=clock) if clock else sig


def parse_config(text: str) -> ScenarioConfig:
    """Parse and fully validate a configuration document."""
    cp = configparser.ConfigParser(
        delimiters=("=",),
        comment_prefixes=("#",),
        inline_comment_prefixes=("#",),
        interpolation=None,
        strict=True,
    )
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("content before the first section header", "syntax",
                          line=exc.lineno) from exc
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if getattr(exc, "errors", None) else None
        raise ConfigError(f"cannot parse document: {exc.message.splitlines()[0]}",
                          "syntax", line=line) from exc
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse document: {exc}", "syntax") from exc

    sections = {name: _SectionView(name, cp[name]) for name in cp.sections()}

    def section(name: str, required: bool = True) -> _SectionView | None:
        if name not in sections:
            if required:
                raise ConfigError(f"missing required section [{name}]", "missing-section")
            return None
        return sections[name]

    model = section("model")
    n_raw = _number(model, "n", required=True)
    if n_raw is None or n_raw != int(n_raw) or int(n_raw) < 1:
        raise ConfigError("model.n must be a positive integer", "bad-value")
    n = int(n_raw)

    rows = []
    for i in range(1, n + 1):
        row = model.take(f"row{i}", required=True)
        if not isinstance(row, list):
            row = [row]
        if len(row) != n or not all(isinstance(v, float) for v in row):
            raise ConfigError(f"model.row{i} must list {n} numbers", "bad-value")
        rows.append(row)
    A = np.array(rows)
    if not np.array_equal(A, A.T):
        raise ConfigError("growth matrix rows are not symmetric", "asymmetric-matrix")

    eta0 = _number(model, "eta0", default=1.0)
    barrier_scale = _number(model, "barrier_scale", default=1e-4)
    gamma_in_psi = _number(model, "gamma_in_psi", default=0.0)
    if barrier_scale <= 0.0:
        raise ConfigError("model.barrier_scale must be positive", "nonpositive-barrier")
    if eta0 <= 0.0:
        raise ConfigError("model.eta0 must be positive", "nonpositive-viscosity")

    b = np.empty(n)
    eta = np.empty(n)
    phi = np.empty(n)
    psi = np.empty(n)
    for i in range(1, n + 1):
        sp = section(f"species.{i}")
        b[i - 1] = _number(sp, "b", required=True)
        eta[i - 1] = _number(sp, "eta", required=True)
        phi[i - 1] = _number(sp, "phi0_initial", required=True)
        psi[i - 1] = _number(sp, "psi_initial", default=1.0)
    if not np.all(eta > 0.0):
        raise ConfigError("species viscosities must be strictly positive",
                          "nonpositive-viscosity")

    nutrient = _forcing_from_section(section("forcing.nutrient"))
    antibiotic = _forcing_from_section(section("forcing.antibiotic"))

    solver = section("solver", required=False)
    kwargs = {}
    if solver is not None:
        for key, sname in (("dt", "dt"), ("steps", "steps"),
                           ("residual_tolerance", "residual_tolerance"),
                           ("steady_state_tolerance", "steady_state_tolerance"),
                           ("max_newton_iterations", "max_newton_iterations"),
                           ("max_halvings", "max_halvings")):
            value = _number(solver, key)
            if value is not None:
                if sname in ("steps", "max_newton_iterations", "max_halvings"):
                    if value != int(value):
                        raise ConfigError(f"solver.{key} must be an integer", "bad-value")
                    value = int(value)
                kwargs[sname] = value
    try:
        settings = SolverSettings(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc), "bad-solver-value") from exc

    output = section("output", required=False)
    stride = 1
    path = None
    if output is not None:
        stride_raw = _number(output, "stride", default=1.0)
        if stride_raw != int(stride_raw) or int(stride_raw) < 1:
            raise ConfigError("output.stride must be a positive integer", "bad-stride")
        stride = int(stride_raw)
        path = output.take("path")
        if path is not None and not isinstance(path, str):
            raise ConfigError("output.path must be a quoted string", "bad-value")

    allowed = {"model", "solver", "output", "forcing.nutrient", "forcing.antibiotic"}
    allowed |= {f"species.{i}" for i in range(1, n + 1)}
    for name, view in sections.items():
        if name not in allowed:
            raise ConfigError(f"unknown section [{name}]", "unknown-section")
        extra = view.unused()
        if extra:
            raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(extra)}",
                              "unknown-key")

    try:
        params = ModelParams(n=n, A=A, b=b, eta=eta, eta0=eta0,
                             barrier_scale=barrier_scale,
                             gamma_in_psi=bool(gamma_in_psi))
    except ValueError as exc:
        raise ConfigError(str(exc), "bad-model") from exc
    return ScenarioConfig(params=params, initial_phi=phi, initial_psi=psi,
                          nutrient=nutrient, antibiotic=antibiotic,
                          settings=settings, output_path=path,
                          output_stride=stride)


def _format_number(x: float) -> str:
    return repr(float(x))


def _forcing_lines(section: str, signal: ForcingSignal) -> list[str]:
    lines = [f"[{section}]"]
    if isinstance(signal, Constant):
        lines += ['kind = "constant"', f"value = {_format_number(signal.value)}"]
    elif isinstance(signal, Sinusoid):
        lines += [
            'kind = "sinusoid"',
            f"offset = {_format_number(signal.offset)}",
            f"amplitude = {_format_number(signal.amplitude)}",
            f"angular_frequency = {_format_number(signal.angular_frequency)}",
        ]
        if signal.clock != "time":
            lines.append(f'clock = "{signal.clock}"')
    elif isinstance(signal, Step):
        lines += [
            'kind = "step"',
            f"switch_step = {_format_number(signal.switch_step)}",
            f"before = {_format_number(signal.before)}",
            f"after = {_format_number(signal.after)}",
        ]
        if signal.clock != "step":
            lines.append(f'clock = "{signal.clock}"')
    else:
        raise TypeError(f"unknown forcing signal type {type(signal)!r}")
    return lines


def serialize_config(config: ScenarioConfig) -> str:
    """Render a config as a document that parse_config reads back identically."""
    p = config.params
    lines = ["[model]", f"n = {p.n}"]
    for i in range(p.n):
        lines.append(f"row{i + 1} = " + ", ".join(_format_number(v) for v in p.A[i]))
    lines.append(f"eta0 = {_format_number(p.eta0)}")
    lines.append(f"barrier_scale = {_format_number(p.barrier_scale)}")
    if p.gamma_in_psi:
        lines.append("gamma_in_psi = 1")
    for i in range(p.n):
        lines += [
            "",
            f"[species.{i + 1}]",
            f"b = {_format_number(p.b[i])}",
            f"eta = {_format_number(p.eta[i])}",
            f"phi0_initial = {_format_number(config.initial_phi[i])}",
            f"psi_initial = {_format_number(config.initial_psi[i])}",
        ]
    lines.append("")
    lines += _forcing_lines("forcing.nutrient", config.nutrient)
    lines.append("")
    lines += _forcing_lines("forcing.antibiotic", config.antibiotic)
    s = config.settings
    lines += [
        "",
        "[solver]",
        f"dt = {_format_number(s.dt)}",
        f"steps = {s.steps}",
        f"residual_tolerance = {_format_number(s.residual_tolerance)}",
        f"steady_state_tolerance = {_format_number(s.steady_state_tolerance)}",
        f"max_newton_iterations = {s.max_newton_iterations}",
        f"max_halvings = {s.max_halvings}",
        "",
        "[output]",
        f"stride = {config.output_stride}",
    ]
    if config.output_path is not None:
        lines.append(f'path = "{config.output_path}"')
    return "\n".join(lines) + "\n"


def load_config(path) -> ScenarioConfig:
    """Read and parse a configuration file."""
    with io.open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
