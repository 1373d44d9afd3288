"""Command-line front end: config-driven simulation, sweeps, and tomography runs.

Configuration files are flat ``key = value`` text with ``#`` comments and a
required ``mode`` key.  Benches come either from a named preset (``fig1``,
``lyot``, ``two_crystal``, ``rotated_crystals``) or from repeated inline
``element = crystal(length, angle)`` / ``element = hwp(angle)`` /
``element = qwp(angle)`` lines, applied in file order.

Every mode emits a CSV dataset (LF line endings, ``,`` separator, mandatory
header).  Angle columns carry six decimals; other numeric columns use
12-significant-digit shortest form, so outputs are bit-stable across runs
and across ``--jobs`` settings.

Exit codes: 0 success, 1 configuration/validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .bench_sim import BenchConfig, Crystal, Waveplate, affine_map, propagate
from .channel_analysis import chi_eigenvalues, chi_from_kraus, pauli_feasible, polar_decompose
from .depolarizer import (
    REFLECTION_COMPENSATION,
    DepolarizerSettings,
    build_bench,
    build_bench_rotated_crystals,
    build_lyot,
    build_two_crystal,
    dop_isotropic,
    in_reachable_region,
    isotropic_theta1_angles,
    radii_closed_form,
)
from .tomography import TomoSettings, qpt_mle, simulate_counts

MODES = ("simulate", "sweep", "tomo", "feasibility", "region")
PRESETS = ("fig1", "lyot", "two_crystal", "rotated_crystals")

ENV_SEED = "POLARCHAN_SEED"

#: hard ceiling on feasibility grid size
_MAX_GRID_POINTS = 4_000_000

_KNOWN_KEYS = {
    "mode", "preset", "element", "theta1", "theta2",
    "theta2_start", "theta2_stop", "theta2_step",
    "length", "length1", "length2", "angle", "rotation",
    "tomo", "n", "seed", "counts_out", "out", "r_step", "grid_n",
}


class ConfigError(Exception):
    """Carries one message per configuration problem, with line numbers."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class RunConfig:
    """Validated run description assembled from a config file."""

    mode: str
    preset: Optional[str] = None
    elements: tuple = ()
    theta1: Optional[float] = None
    theta2: Optional[float] = None
    theta2_start: Optional[float] = None
    theta2_stop: Optional[float] = None
    theta2_step: Optional[float] = None
    length: Fraction = Fraction(1)
    length1: Fraction = Fraction(1)
    length2: Fraction = Fraction(2)
    angle: Optional[float] = None
    rotation: Optional[float] = None
    tomo: bool = False
    n: int = 10_000
    seed: Optional[int] = None
    counts_out: Optional[str] = None
    out: Optional[str] = None
    r_step: float = 0.01
    grid_n: int = 451


_ELEMENT_RE = re.compile(r"^(crystal|hwp|qwp)\s*\(([^()]*)\)$")


def _parse_element(value: str, lineno: int, errors: list):
    match = _ELEMENT_RE.match(value.strip())
    if not match:
        errors.append(f"line {lineno}: malformed element {value!r} "
                      "(expected crystal(length, angle), hwp(angle) or qwp(angle))")
        return None
    name, argtext = match.group(1), match.group(2)
    args = [a.strip() for a in argtext.split(",")] if argtext.strip() else []
    try:
        if name == "crystal":
            if len(args) != 2:
                raise ValueError("crystal takes (length, angle)")
            return Crystal(Fraction(args[0]), float(args[1]))
        if len(args) != 1:
            raise ValueError(f"{name} takes (angle)")
        kind = "half" if name == "hwp" else "quarter"
        return Waveplate(kind, float(args[0]))
    except (ValueError, ZeroDivisionError) as exc:
        errors.append(f"line {lineno}: malformed element {value!r} ({exc})")
        return None


def parse_config(text: str) -> RunConfig:
    """Parse and validate a config file; raises ConfigError on any problem."""
    errors: list = []
    pairs: list = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {line!r}")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KNOWN_KEYS:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        pairs.append((lineno, key, value))

    seen: dict = {}
    elements: list = []
    values: dict = {}
    for lineno, key, value in pairs:
        if key == "element":
            el = _parse_element(value, lineno, errors)
            if el is not None:
                elements.append(el)
            continue
        if key in seen:
            errors.append(f"line {lineno}: duplicate key {key!r} (first on line {seen[key]})")
            continue
        seen[key] = lineno
        values[(lineno, key)] = value

    def take(key, parser, kind):
        for (lineno, k), value in values.items():
            if k != key:
                continue
            try:
                return parser(value)
            except (ValueError, ZeroDivisionError):
                errors.append(f"line {lineno}: malformed {kind} for key {key!r}: {value!r}")
                return None
        return None

    def parse_bool(value: str) -> bool:
        if value.lower() == "true":
            return True
        if value.lower() == "false":
            return False
        raise ValueError(value)

    mode = take("mode", str, "mode")
    if mode is None:
        errors.append("missing required key: mode")
    elif mode not in MODES:
        errors.append(f"line {seen['mode']}: unknown mode {mode!r} (choose from {', '.join(MODES)})")

    preset = take("preset", str, "preset")
    if preset is not None and preset not in PRESETS:
        errors.append(f"line {seen['preset']}: unknown preset {preset!r} "
                      f"(choose from {', '.join(PRESETS)})")

    cfg_kwargs = dict(
        theta1=take("theta1", float, "angle"),
        theta2=take("theta2", float, "angle"),
        theta2_start=take("theta2_start", float, "angle"),
        theta2_stop=take("theta2_stop", float, "angle"),
        theta2_step=take("theta2_step", float, "angle"),
        angle=take("angle", float, "angle"),
        rotation=take("rotation", float, "angle"),
        seed=take("seed", int, "integer"),
        counts_out=take("counts_out", str, "path"),
        out=take("out", str, "path"),
    )
    length = take("length", Fraction, "length")
    length1 = take("length1", Fraction, "length")
    length2 = take("length2", Fraction, "length")
    n = take("n", int, "integer")
    tomo = take("tomo", parse_bool, "boolean")
    r_step = take("r_step", float, "number")
    grid_n = take("grid_n", int, "integer")

    if mode in MODES:
        _validate_mode(mode, preset, elements, cfg_kwargs, seen, errors,
                       r_step=r_step, n=n, grid_n=grid_n)

    if errors:
        raise ConfigError(errors)

    cfg = RunConfig(mode=mode, preset=preset, elements=tuple(elements), **cfg_kwargs)
    if length is not None:
        cfg.length = length
    if length1 is not None:
        cfg.length1 = length1
    if length2 is not None:
        cfg.length2 = length2
    if n is not None:
        cfg.n = n
    if tomo is not None:
        cfg.tomo = tomo
    if r_step is not None:
        cfg.r_step = r_step
    if grid_n is not None:
        cfg.grid_n = grid_n
    return cfg


def _validate_mode(mode, preset, elements, kw, seen, errors, r_step, n, grid_n):
    needs_bench = mode in ("simulate", "tomo")
    if needs_bench:
        if preset is None and not elements:
            errors.append(f"mode {mode!r} needs a 'preset' or inline 'element' lines")
        if preset is not None and elements:
            errors.append("preset and inline elements are mutually exclusive")
        if preset == "fig1" and kw["theta2"] is None:
            errors.append("preset fig1 requires 'theta2'")
        if preset == "two_crystal" and kw["angle"] is None:
            errors.append("preset two_crystal requires 'angle'")
        if preset == "rotated_crystals" and kw["rotation"] is None:
            errors.append("preset rotated_crystals requires 'rotation'")
    if not needs_bench and elements:
        errors.append(f"inline elements are not supported in {mode!r} mode")
    if mode == "sweep":
        if preset not in (None, "fig1"):
            errors.append("sweep mode supports only the fig1 preset")
        missing = [k for k in ("theta2_start", "theta2_stop", "theta2_step") if kw[k] is None]
        if missing:
            errors.append(f"sweep mode requires {', '.join(missing)}")
        else:
            step = kw["theta2_step"]
            if step <= 0 or kw["theta2_stop"] < kw["theta2_start"]:
                errors.append(f"line {seen.get('theta2_step', '?')}: degenerate range "
                              f"(step {step}, start {kw['theta2_start']}, stop {kw['theta2_stop']})")
    if mode == "feasibility" and r_step is not None:
        if r_step <= 0:
            errors.append(f"line {seen['r_step']}: degenerate range (r_step {r_step})")
        else:
            npts = (int(np.floor(2.0 / r_step)) + 1) ** 2
            if npts > _MAX_GRID_POINTS:
                errors.append(f"feasibility grid of {npts} points exceeds the "
                              f"{_MAX_GRID_POINTS} limit; increase r_step")
    if mode == "tomo" and n is not None and n < 1:
        errors.append(f"line {seen['n']}: n must be at least 1 for tomography")
    if mode == "region" and grid_n is not None and grid_n < 2:
        errors.append(f"line {seen['grid_n']}: grid_n must be at least 2")


# ---------------------------------------------------------------------------
# bench construction and CSV helpers
# ---------------------------------------------------------------------------

def bench_from_config(cfg: RunConfig, theta2: Optional[float] = None) -> BenchConfig:
    if cfg.elements:
        return BenchConfig(cfg.elements)
    if cfg.preset == "fig1":
        theta1 = cfg.theta1 if cfg.theta1 is not None else isotropic_theta1_angles()[1]
        t2 = theta2 if theta2 is not None else cfg.theta2
        return build_bench(DepolarizerSettings(theta1, t2, cfg.length1, cfg.length2))
    if cfg.preset == "lyot":
        return build_lyot(cfg.length)
    if cfg.preset == "two_crystal":
        return build_two_crystal(cfg.angle)
    if cfg.preset == "rotated_crystals":
        return build_bench_rotated_crystals(cfg.rotation)
    raise ConfigError([f"no bench defined for preset {cfg.preset!r}"])


def _fmt(x) -> str:
    return format(float(x), ".12g")


def _fmt_angle(x) -> str:
    return format(float(x), ".6f")


def _write_csv(path: Optional[str], lines) -> None:
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# modes
# ---------------------------------------------------------------------------

def run_simulate(cfg: RunConfig) -> list:
    bench = bench_from_config(cfg)
    kraus = propagate(bench)
    amap = affine_map(kraus)
    report = polar_decompose(amap.matrix)
    lams = chi_eigenvalues(chi_from_kraus(kraus))
    header = (
        [f"m{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3)]
        + ["t1", "t2", "t3", "r1", "r2", "r3", "det_sign", "axis_aligned"]
        + [f"lambda{i}" for i in (1, 2, 3, 4)]
    )
    row = (
        [_fmt(v) for v in amap.matrix.ravel()]
        + [_fmt(v) for v in amap.translation]
        + [_fmt(v) for v in report.radii]
        + [_fmt(report.det_sign), "true" if report.axis_aligned else "false"]
        + [_fmt(v) for v in lams]
    )
    return [",".join(header), ",".join(row)]


def _sweep_thetas(cfg: RunConfig) -> list:
    values = []
    k = 0
    while True:
        t2 = cfg.theta2_start + k * cfg.theta2_step
        if t2 > cfg.theta2_stop + 1e-9:
            break
        values.append(t2)
        k += 1
    return values


def _sweep_row(cfg: RunConfig, theta1: float, theta2: float, row_seed: int, iso_roots) -> str:
    r1c, r2c, r3c = radii_closed_form(theta1, theta2)
    on_iso_line = any(abs(theta1 - root) < 1e-6 for root in iso_roots)
    dop = _fmt(dop_isotropic(theta2)) if on_iso_line else ""

    bench = build_bench(DepolarizerSettings(theta1, theta2, cfg.length1, cfg.length2))
    kraus = propagate(bench)
    compensated = REFLECTION_COMPENSATION @ affine_map(kraus).matrix
    sim = polar_decompose(compensated).radii
    lams = chi_eigenvalues(chi_from_kraus(kraus))

    cells = [_fmt_angle(theta2), _fmt(r1c), _fmt(r2c), _fmt(r3c), dop]
    cells += [_fmt(v) for v in sim]
    cells += [_fmt(v) for v in lams]
    if cfg.tomo:
        settings = TomoSettings(shots=cfg.n, seed=row_seed)
        fit = qpt_mle(simulate_counts(kraus, settings))
        cells += [_fmt(v) for v in chi_eigenvalues(fit.chi)]
        cells.append(str(row_seed))
    else:
        cells += ["", "", "", "", ""]
    return ",".join(cells)


def run_sweep(cfg: RunConfig, jobs: int, seed: int) -> list:
    theta1 = cfg.theta1 if cfg.theta1 is not None else isotropic_theta1_angles()[1]
    thetas = _sweep_thetas(cfg)
    iso_roots = isotropic_theta1_angles()
    header = (
        ["theta2", "r1_closed", "r2_closed", "r3_closed", "dop_closed",
         "r1_sim", "r2_sim", "r3_sim"]
        + [f"lambda{i}" for i in (1, 2, 3, 4)]
        + [f"lambda{i}_mle" for i in (1, 2, 3, 4)]
        + ["seed"]
    )
    # rows are keyed by sweep index, so output order and per-row seeds are
    # independent of the worker count
    tasks = [(t2, seed + i) for i, t2 in enumerate(thetas)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(
                lambda task: _sweep_row(cfg, theta1, task[0], task[1], iso_roots), tasks
            ))
    else:
        rows = [_sweep_row(cfg, theta1, t2, s, iso_roots) for t2, s in tasks]
    return [",".join(header)] + rows


def run_tomo(cfg: RunConfig, seed: int) -> list:
    bench = bench_from_config(cfg)
    kraus = propagate(bench)
    settings = TomoSettings(shots=cfg.n, seed=seed)
    record = simulate_counts(kraus, settings)
    if cfg.counts_out:
        record.to_csv(cfg.counts_out)
    fit = qpt_mle(record)
    truth = chi_eigenvalues(chi_from_kraus(kraus))
    recon = chi_eigenvalues(fit.chi)
    header = (
        [f"lambda{i}_mle" for i in (1, 2, 3, 4)]
        + [f"lambda{i}_true" for i in (1, 2, 3, 4)]
        + ["tp_deviation", "nll", "converged", "iterations", "n", "seed"]
    )
    row = (
        [_fmt(v) for v in recon]
        + [_fmt(v) for v in truth]
        + [_fmt(fit.tp_deviation), _fmt(fit.nll),
           "true" if fit.converged else "false", str(fit.iterations),
           str(cfg.n), str(seed)]
    )
    return [",".join(header), ",".join(row)]


def run_feasibility(cfg: RunConfig) -> list:
    values = np.arange(-1.0, 1.0 + cfg.r_step / 2, cfg.r_step)
    header = ["r1", "r2", "lambda0", "lambda1", "lambda2", "lambda3",
              "feasible", "reachable"]
    lines = [",".join(header)]
    for r1 in values:
        for r2 in values:
            feasible, lam = pauli_feasible(r1, r2, r2)
            reachable = bool(in_reachable_region(r1, r2))
            if reachable and not feasible:
                raise AssertionError(
                    f"reachable point ({r1}, {r2}) is outside the feasible set"
                )
            lines.append(",".join(
                [_fmt(r1), _fmt(r2)]
                + [_fmt(v) for v in lam]
                + ["true" if feasible else "false", "true" if reachable else "false"]
            ))
    return lines


def run_region(cfg: RunConfig) -> list:
    angles = np.linspace(0.0, 45.0, cfg.grid_n)
    t1, t2 = np.meshgrid(angles, angles, indexing="ij")
    r1, r2, _ = radii_closed_form(t1, t2)
    lines = [",".join(["theta1", "theta2", "r1", "r2"])]
    for a1, a2, v1, v2 in zip(t1.ravel(), t2.ravel(), r1.ravel(), r2.ravel()):
        lines.append(",".join([_fmt_angle(a1), _fmt_angle(a2), _fmt(v1), _fmt(v2)]))
    return lines


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    # validation failures exit 1 (argparse defaults to 2, reserved here for I/O)
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


_EPILOG = f"""modes:
  simulate     one-shot channel report (Stokes map, radii, eigenvalue spectrum)
  sweep        fig1 control-angle sweep: closed-form vs simulated radii,
               eigenvalue spectrum, optional tomography reconstruction
  tomo         simulated process tomography of one bench (counts + MLE fit)
  feasibility  (R1, R2=R3) grid: physicality and reachability flags
  region       closed-form (R1, R2) scan of the reachable zone

presets: {", ".join(PRESETS)}

the {ENV_SEED} environment variable supplies a default seed; --seed and the
config 'seed' key take precedence (in that order)."""


def _resolve_seed(args_seed, cfg_seed) -> int:
    if args_seed is not None:
        return args_seed
    if cfg_seed is not None:
        return cfg_seed
    env = os.environ.get(ENV_SEED)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError([f"environment variable {ENV_SEED}={env!r} is not an integer"])
    return 0


def main(argv=None) -> int:
    parser = _Parser(
        prog="polarchan",
        description="Simulate crystal/wave-plate depolarizing channels and their tomography.",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("mode", choices=MODES, help="run mode (must match the config file)")
    parser.add_argument("--config", required=True, help="path to a key = value config file")
    parser.add_argument("--out", help="output CSV path (default: stdout)")
    parser.add_argument("--jobs", type=int, default=1, help="concurrent sweep workers")
    parser.add_argument("--seed", type=int, help="tomography seed override")

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        with open(args.config, "r") as fh:
            text = fh.read()
    except OSError as exc:
        sys.stderr.write(f"polarchan: cannot read config {args.config!r}: {exc}\n")
        return 2

    try:
        cfg = parse_config(text)
        if cfg.mode != args.mode:
            raise ConfigError([f"mode mismatch: command line says {args.mode!r}, "
                               f"config says {cfg.mode!r}"])
        seed = _resolve_seed(args.seed, cfg.seed)
        if args.jobs < 1:
            raise ConfigError([f"--jobs must be at least 1, got {args.jobs}"])

        if cfg.mode == "simulate":
            lines = run_simulate(cfg)
        elif cfg.mode == "sweep":
            lines = run_sweep(cfg, args.jobs, seed)
        elif cfg.mode == "tomo":
            lines = run_tomo(cfg, seed)
        elif cfg.mode == "feasibility":
            lines = run_feasibility(cfg)
        else:
            lines = run_region(cfg)
    except ConfigError as exc:
        for message in exc.errors:
            sys.stderr.write(f"polarchan: {message}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"polarchan: I/O failure while running {args.mode}: {exc}\n")
        return 2

    out_path = args.out if args.out is not None else cfg.out
    try:
        _write_csv(out_path, lines)
    except OSError as exc:
        sys.stderr.write(f"polarchan: cannot write output {out_path!r}: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
