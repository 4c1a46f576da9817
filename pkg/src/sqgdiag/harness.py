"""Run configuration, orchestration, persistence and reporting.

A run is described by a flat key = value config file (``#`` starts a
comment; keys match RunConfig field names exactly) and produces binary
checkpoints (see solver.write_checkpoint), a ``series.csv`` time series and
a ``report.json``.  Reports are JSON; time series are CSV with a one-line
header, so standard plotting tools consume both directly.

All randomness derives from the single 64-bit config seed through the
documented splitting rule: numpy Generators are seeded with the sequence
[seed, purpose, counter], where purpose 0 is initial data, 1 Monte Carlo
sampling, 2 calibration families.  Any individual diagnostic can therefore
be re-run in isolation, bit-identically.
"""

import json
import os
import time
from dataclasses import asdict, dataclass, fields

import numpy as np

from .degiorgi import (
    ISOPERIMETRIC_CONSTANT,
    WeightedRegion,
    isoperimetric_check,
    isoperimetric_family,
    linear_reference_profile,
)
from .extension import calibrate_dtn_constant, extend, neumann_trace, trace_ladder
from .solver import (
    SolverConfig,
    audit_energy,
    check_l2_monotone,
    check_linf_decay,
    read_checkpoint,
    run,
    write_checkpoint,
)
from .spectral import (
    Grid,
    ScalarField,
    fractional_laplacian,
    l2_norm,
    random_band_limited,
)
from .oscillation import calibrate_tail_constant, tail_series

DIAGNOSTIC_NAMES = ("l2_monotone", "energy_audit", "linf_decay", "tail")
INITIAL_CONDITIONS = ("single_mode", "random_band_limited", "file")


@dataclass(frozen=True)
class RunConfig:
    """One simulation plus its enabled diagnostics."""

    n: int = 64
    side_length: float = 2.0 * np.pi
    alpha: float = 1.0
    dt: float = 1e-3
    t_end: float = 1.0
    seed: int = 0
    initial_condition: str = "single_mode"
    ic_k_max: int = 4
    ic_amplitude: float = 1.0
    ic_file: str = ""
    snapshot_interval: float = 0.1
    diagnostics: tuple = ()
    output_dir: str = "out"
    dealias: bool = True
    integrator: str = "etd_rk4"

    def __post_init__(self):
        if self.initial_condition not in INITIAL_CONDITIONS:
            raise ValueError(f"unknown initial condition {self.initial_condition!r}")
        for d in self.diagnostics:
            if d not in DIAGNOSTIC_NAMES:
                raise ValueError(f"unknown diagnostic {d!r}")

    def to_text(self):
        lines = ["# sqgdiag run configuration"]
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "diagnostics":
                v = ",".join(v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


def parse_config(text):
    """Parse the flat key = value format back into a RunConfig."""
    field_types = {f.name: f.type for f in fields(RunConfig)}
    kwargs = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {ln}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in field_types:
            raise ValueError(f"config line {ln}: unknown key {key!r}")
        if key == "diagnostics":
            kwargs[key] = tuple(v.strip() for v in value.split(",") if v.strip())
        elif key in ("n", "seed", "ic_k_max"):
            kwargs[key] = int(value)
        elif key in ("dealias",):
            if value not in ("true", "false"):
                raise ValueError(f"config line {ln}: boolean must be true/false")
            kwargs[key] = value == "true"
        elif key in ("initial_condition", "ic_file", "output_dir", "integrator"):
            kwargs[key] = value
        else:
            kwargs[key] = float(value)
    return RunConfig(**kwargs)


def load_config(path):
    with open(path, "r") as fh:
        return parse_config(fh.read())


def initial_field(config):
    grid = Grid(config.n, config.side_length)
    if config.initial_condition == "single_mode":
        x1, _ = grid.coordinates()
        unit = 2.0 * np.pi / config.side_length
        values = config.ic_amplitude * np.sin(unit * x1)
        return ScalarField(grid, values)
    if config.initial_condition == "random_band_limited":
        return random_band_limited(
            grid, config.ic_k_max, [config.seed, 0, 0], config.ic_amplitude
        )
    field, _, _ = read_checkpoint(config.ic_file, side_length=config.side_length)
    return field


@dataclass
class RunReport:
    config_echo: dict
    sections: list
    timings: dict
    passed: bool

    def to_json(self, indent=2):
        return json.dumps(
            {
                "config": self.config_echo,
                "sections": self.sections,
                "timings": self.timings,
                "passed": self.passed,
            },
            indent=indent,
            default=float,
        )


def _config_echo(config):
    d = asdict(config)
    d["diagnostics"] = list(config.diagnostics)
    return d


def echo_to_config(echo):
    d = dict(echo)
    d["diagnostics"] = tuple(d.get("diagnostics", ()))
    return RunConfig(**d)


def snapshot_schedule(config):
    k = int(np.floor(config.t_end / config.snapshot_interval + 1e-9))
    times = [i * config.snapshot_interval for i in range(k + 1)]
    if times[-1] < config.t_end - 1e-12:
        times.append(config.t_end)
    return times


def simulate(config, out_dir=None):
    """Run the configured simulation; write checkpoints, series and report.

    Returns (checkpoint paths, RunReport).  Bit-identical output for the
    same config and seed.
    """
    out = out_dir or config.output_dir
    os.makedirs(out, exist_ok=True)
    t0 = time.perf_counter()
    theta0 = initial_field(config)
    sc = SolverConfig(
        alpha=config.alpha,
        dt=config.dt,
        t_end=config.t_end,
        dealias=config.dealias,
        integrator=config.integrator,
    )
    result = run(theta0, sc, snapshot_times=snapshot_schedule(config))
    wall = time.perf_counter() - t0

    paths = []
    for i, snap in enumerate(result.history):
        path = os.path.join(out, f"checkpoint_{i:04d}.sqgd")
        write_checkpoint(path, snap, config.alpha)
        paths.append(path)
    series_path = os.path.join(out, "series.csv")
    with open(series_path, "w") as fh:
        fh.write("time,l2_norm,linf_norm\n")
        for t, a, b in zip(result.times, result.l2_norms, result.linf_norms):
            fh.write(f"{t!r},{a!r},{b!r}\n")

    report = RunReport(
        config_echo=_config_echo(config),
        sections=[
            {
                "name": "simulation",
                "passed": True,
                "snapshots": len(paths),
                "final_time": float(result.final.time_stamp),
                "final_l2": l2_norm(result.final),
                "final_linf": float(np.max(np.abs(result.final.values))),
            }
        ],
        timings={"simulate_seconds": wall},
        passed=True,
    )
    with open(os.path.join(out, "report.json"), "w") as fh:
        fh.write(report.to_json())
    return paths, report


def load_checkpoints(paths, side_length=2.0 * np.pi):
    """Decode a checkpoint series; grids and alpha must agree."""
    history = []
    alpha = None
    for p in paths:
        field, a, _ = read_checkpoint(p, side_length=side_length)
        if alpha is None:
            alpha = a
            n = field.grid.n
        elif a != alpha or field.grid.n != n:
            raise ValueError(f"checkpoint {p} disagrees on grid or alpha")
        history.append(field)
    history.sort(key=lambda f: f.time_stamp)
    return history, alpha


def diagnose(paths, toggles, side_length=2.0 * np.pi, config=None):
    """Fan out the enabled diagnostics over a checkpoint series.

    Each toggle contributes exactly one report section; the report passes
    iff every enabled check passes.
    """
    for t in toggles:
        if t not in DIAGNOSTIC_NAMES:
            raise ValueError(f"unknown diagnostic {t!r}")
    t0 = time.perf_counter()
    history, alpha = load_checkpoints(paths, side_length=side_length)
    sections = []
    center = (0.5 * side_length, 0.5 * side_length)

    if toggles:
        theta0 = history[0]
        l2_initial = l2_norm(theta0)
        levels = np.linspace(theta0.values.min(), theta0.values.max(), 16)
        audit = None
        if "energy_audit" in toggles or "l2_monotone" in toggles or "linf_decay" in toggles:
            audit = audit_energy(history, levels, alpha)
        for name in toggles:
            if name == "energy_audit":
                sections.append(
                    {
                        "name": name,
                        "passed": audit.passed,
                        "levels": [float(v) for v in levels],
                        "violations": audit.violations[:20],
                    }
                )
            elif name == "l2_monotone":
                ok = check_l2_monotone(audit.ledger)
                sections.append({"name": name, "passed": bool(ok)})
            elif name == "linf_decay":
                try:
                    fit = check_linf_decay(audit.ledger, l2_initial, alpha)
                    sections.append(
                        {
                            "name": name,
                            "passed": bool(fit.passed),
                            "constant": fit.constant,
                            "slope": fit.slope,
                        }
                    )
                except ValueError as exc:
                    sections.append({"name": name, "passed": False, "error": str(exc)})
            elif name == "tail":
                constant = calibrate_tail_constant([history], [l2_initial], center)
                series = tail_series(history, center, l2_initial, constant, alpha)
                sections.append(
                    {
                        "name": name,
                        "passed": bool(all(e.passed for e in series)),
                        "constant": constant,
                        "worst_ratio": max(
                            e.tail_value / e.bound_basic for e in series
                        ),
                    }
                )

    passed = all(s["passed"] for s in sections)
    report = RunReport(
        config_echo=_config_echo(config) if config else {},
        sections=sections,
        timings={"diagnose_seconds": time.perf_counter() - t0},
        passed=passed,
    )
    return report


def extension_report(epsilons=(0.0, 0.05, 0.1), n=64, seed=0):
    """DtN verification: trace matches the spectral operator per epsilon."""
    grid = Grid(n)
    sections = []
    for eps in epsilons:
        ds = [calibrate_dtn_constant(grid, eps, wavenumber=k) for k in (1, 2, 4, 8)]
        spread = (max(ds) - min(ds)) / abs(np.mean(ds))
        theta = random_band_limited(grid, 6, [seed, 0, 0], amplitude=1.0)
        ext = extend(theta, trace_ladder(grid), eps)
        trace = neumann_trace(ext)
        target = fractional_laplacian(theta, 1.0 - eps)
        rel = l2_norm(
            ScalarField(grid, trace.values / ds[0] - target.values)
        ) / l2_norm(target)
        sections.append(
            {
                "name": f"dtn_eps_{eps}",
                "passed": bool(rel <= 0.01 and spread <= 0.005),
                "d_eps": ds[0],
                "mode_spread": spread,
                "trace_rel_error": rel,
            }
        )
    return RunReport(
        config_echo={}, sections=sections, timings={}, passed=all(s["passed"] for s in sections)
    )


def isoperimetric_report(count=20, epsilons=(0.0, 0.1), seed=2025, samples=100_000):
    """Family sweep against the frozen isoperimetric constant."""
    sections = []
    for eps in epsilons:
        mc = WeightedRegion(weight_exponent=eps, sample_count=samples, seed=seed)
        fields = [linear_reference_profile(eps)] + isoperimetric_family(count, eps, seed)
        results = [
            isoperimetric_check(ext, eps, ISOPERIMETRIC_CONSTANT, mc) for ext in fields
        ]
        sections.append(
            {
                "name": f"isoperimetric_eps_{eps}",
                "passed": bool(all(r.passed for r in results)),
                "constant": ISOPERIMETRIC_CONSTANT,
                "family_size": len(results),
                "worst_margin": min(
                    r.rhs + 3 * np.hypot(r.lhs_std_error, r.rhs_std_error) - r.lhs
                    for r in results
                ),
            }
        )
    return RunReport(
        config_echo={}, sections=sections, timings={}, passed=all(s["passed"] for s in sections)
    )
