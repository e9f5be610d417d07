"""Command-line front end: solve, analyze, blowup, oracle and report.

Every command reads a plain ``key=value`` config (``--config FILE``) that
can be overridden by ``key=value`` arguments on the command line.  Unknown
keys are rejected.  Exit codes: 0 ok, 1 config error, 2 numeric failure,
3 failed precondition.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import blowup, freeboundary, oracle1d, plotting, testcases
from .errors import (
    BallOutsideDomain,
    ConfigError,
    DomainTooSmall,
    EmptyFreeBoundary,
    MissingInput,
    NotAFreeBoundaryPoint,
    NumericFailure,
    OutOfDomain,
    RadiusOutOfRange,
    TooFewPoints,
)
from .fields import Grid, QuadratureConfig, ScalarField, check_ball, read_field, write_field
from .scaling import ForcingMode
from .solver import DEFAULT_EPSILONS, ProblemSpec, solve, solve_nested
from .weiss import WeissConfig, omega_half, wbar_scan

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_PRECONDITION = 0, 1, 2, 3

PRECONDITION_ERRORS = (
    NotAFreeBoundaryPoint,
    BallOutsideDomain,
    MissingInput,
    DomainTooSmall,
    OutOfDomain,
    TooFewPoints,
    EmptyFreeBoundary,
    RadiusOutOfRange,
)


# -- config ------------------------------------------------------------------


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.replace(";", ",").split(",") if t.strip())


def _opt_float(text: str) -> float | None:
    return None if text.strip().lower() in ("", "none", "auto", "optimal") else float(text)


def _opt_floats(text: str) -> tuple[float, ...] | None:
    return None if text.strip().lower() in ("", "none", "auto") else _floats(text)


def _opt_int(text: str) -> int | None:
    return None if text.strip().lower() in ("", "none", "auto") else int(text)


def _mode(text: str) -> ForcingMode:
    return ForcingMode.parse(text)


def _opt_mode(text: str) -> ForcingMode | None:
    return None if text.strip().lower() in ("", "none", "auto") else ForcingMode.parse(text)


def _path(text: str) -> Path:
    return Path(text).expanduser().resolve()


def _opt_path(text: str) -> Path | None:
    return None if text.strip().lower() in ("", "none") else _path(text)


_QUAD_KEYS = {
    "n_theta": (int, 1024),
    "n_rad": (int, 512),
    "interp_order": (int, 1),
}

SCHEMAS: dict[str, dict[str, tuple[Callable[[str], Any], Any]]] = {
    "solve": {
        "problem": (str, "planar"),
        "h": (_opt_float, None),
        "mode": (_opt_mode, None),
        "omega": (_opt_float, None),
        "tol": (float, 1e-10),
        "max_sweeps": (int, 200_000),
        "epsilons": (_floats, DEFAULT_EPSILONS),
        "levels": (int, 1),
        "energy_check_every": (int, 1),
    },
    "analyze": {
        "field": (_opt_path, None),
        "center": (_opt_floats, None),
        "radii": (_opt_floats, None),
        "growth_radii": (_opt_floats, None),
        "mode": (_mode, ForcingMode.LOGARITHMIC),
        "gamma": (float, 0.5),
        **_QUAD_KEYS,
    },
    "blowup": {
        "field": (_opt_path, None),
        "synthetic": (str, "none"),
        "center": (_opt_floats, None),
        "radii": (_opt_floats, None),
        "mode": (_opt_mode, None),
        "gamma": (float, 0.5),
        "tol": (_opt_float, None),
        **_QUAD_KEYS,
        "interp_order": (_opt_int, None),
    },
    "oracle": {
        "x_seed": (float, 1e-6),
        "x_max": (float, 0.5),
        "mode": (_mode, ForcingMode.LOGARITHMIC),
        "terms": (int, 4),
    },
    "report": {
        "problem": (str, "planar"),
        "h": (_opt_float, None),
        "levels": (int, 4),
        "radii": (_opt_floats, None),
        "gamma": (float, 0.5),
        **_QUAD_KEYS,
    },
}

COMMON_KEYS = {"out": (_path, Path("out").resolve()), "seed": (int, 0)}


@dataclass
class RunConfig:
    command: str
    values: dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    output_dir: Path = Path("out")

    def __getitem__(self, key: str) -> Any:
        return self.values[key]


def parse_keyvalue(lines, source: str = "<config>") -> dict[str, str]:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are ignored."""
    out: dict[str, str] = {}
    for no, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{no}: expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{no}: empty key")
        out[key] = value
    return out


def build_config(command: str, file_values: dict[str, str], overrides: dict[str, str]) -> RunConfig:
    schema = {**SCHEMAS[command], **COMMON_KEYS}
    raw = {**file_values, **overrides}
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config key(s) for '{command}': {', '.join(unknown)}")
    values = {}
    for key, (parse, default) in schema.items():
        if key in raw:
            try:
                values[key] = parse(raw[key])
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad value for '{key}': {raw[key]!r} ({exc})") from None
        else:
            values[key] = default
    seed = values.pop("seed")
    out = values.pop("out")
    return RunConfig(command, values, seed, out)


def _quadrature(cfg: RunConfig, order_default: int = 1) -> QuadratureConfig:
    order = cfg["interp_order"] if cfg["interp_order"] is not None else order_default
    try:
        return QuadratureConfig(cfg["n_theta"], cfg["n_rad"], order)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# -- output helpers ----------------------------------------------------------


class Output:
    def __init__(self, directory: Path, quiet: bool):
        self.dir = directory
        self.quiet = quiet
        self.dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.dir / name

    def text(self, name: str, content: str) -> Path:
        p = self.path(name)
        p.write_text(content)
        return p

    def say(self, line: str) -> None:
        if not self.quiet:
            print(line)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# -- problems ----------------------------------------------------------------


def random_boundary_problem(seed: int, h: float, mode: ForcingMode) -> ProblemSpec:
    """Unit square with smooth non-negative data below 1 built from a seeded sine series."""
    rng = np.random.default_rng(seed)
    grid = Grid.box([0.0, 0.0], [1.0, 1.0], h)
    x, y = grid.coords()
    s = np.where(np.isclose(y, 0) | np.isclose(y, 1), x, y)
    s = np.where(np.isclose(x, 1) & ~np.isclose(y, 0), 1 + y, s)
    s = np.where(np.isclose(y, 1) & ~np.isclose(x, 1), 3 - x, s)
    s = np.where(np.isclose(x, 0) & ~np.isclose(y, 0), 4 - y, s)
    coef = rng.normal(size=4)
    wave = sum(c * np.sin((k + 1) * np.pi * s / 2) for k, c in enumerate(coef))
    data = 0.4 * np.maximum(wave, 0.0) ** 2 / max(1.0, float(np.max(np.maximum(wave, 0.0) ** 2)))
    return ProblemSpec(grid, data, mode=mode, relax_omega=None)


def make_problem(name: str, h: float | None, mode: ForcingMode | None, seed: int) -> ProblemSpec:
    name = name.strip().lower()
    if name == "classical-1d":
        spec = testcases.classical_1d(h or 1 / 512)
    elif name == "singular-1d":
        spec = testcases.singular_1d(h or 1 / 1024)
    elif name == "planar":
        spec = testcases.planar_2d(h or 1 / 512)
    elif name in ("zero-1d", "zero-2d"):
        dim = 1 if name == "zero-1d" else 2
        grid = Grid.box([-1.0] * dim, [1.0] * dim, h or 1 / 64)
        spec = ProblemSpec(grid, np.zeros(grid.shape), mode=mode or ForcingMode.LOGARITHMIC, relax_omega=None)
    elif name == "random-2d":
        spec = random_boundary_problem(seed, h or 1 / 128, mode or ForcingMode.LOGARITHMIC)
    else:
        raise ConfigError(f"unknown problem {name!r}")
    if mode is not None and mode is not spec.mode:
        spec = ProblemSpec(spec.grid, spec.boundary, mode=mode, relax_omega=None)
    return spec


def synthetic_field(name: str) -> ScalarField:
    grid = Grid.box([-1.0, -1.0], [1.0, 1.0], 1 / 256)
    if name == "paraboloid":
        return ScalarField.from_function(grid, lambda x, y: 0.25 * (x * x + y * y))
    if name == "halfspace":
        return ScalarField.from_function(grid, lambda x, y: 0.5 * np.maximum(x, 0.0) ** 2)
    raise ConfigError(f"unknown synthetic field {name!r}")


# -- commands ----------------------------------------------------------------


def _run_solve(spec: ProblemSpec, levels: int):
    if levels > 1:
        return solve_nested(spec, levels)
    return solve(spec)


def cmd_solve(cfg: RunConfig, out: Output) -> int:
    spec = make_problem(cfg["problem"], cfg["h"], cfg["mode"], cfg.seed)
    try:
        spec = ProblemSpec(
            spec.grid,
            spec.boundary,
            mode=spec.mode,
            epsilons=cfg["epsilons"],
            relax_omega=cfg["omega"],
            tol=cfg["tol"],
            max_sweeps=cfg["max_sweeps"],
            energy_check_every=cfg["energy_check_every"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    u, report = _run_solve(spec, cfg["levels"])
    write_field(out.path("field.bin"), u)
    out.text("report.json", report.to_json() + "\n")
    out.text("report.txt", report.to_keyvalue())
    out.say(f"solve: energy={report.final_energy:.12g} sweeps={report.sweeps_used} kkt={report.kkt_violation:.3e}")
    return EXIT_OK


def _load_field(path: Path | None) -> ScalarField:
    if path is None:
        raise ConfigError("missing required key 'field'")
    if not path.is_file():
        raise MissingInput(f"field file not found: {path}")
    return read_field(path)


def _default_center(u: ScalarField, fb) -> np.ndarray:
    mid = np.asarray(u.grid.origin) + 0.5 * np.asarray(u.grid.extent)
    return freeboundary.snap_to_contact(u, fb, mid)


def _fitting(u: ScalarField, x0: np.ndarray, radii) -> np.ndarray:
    keep = []
    for r in radii:
        try:
            check_ball(u.grid, x0, r)
            keep.append(r)
        except BallOutsideDomain:
            pass
    return np.asarray(keep, dtype=float)


DEFAULT_SCAN_RADII = tuple(np.geomspace(0.3, 0.05, 15))


def cmd_analyze(cfg: RunConfig, out: Output) -> int:
    u = _load_field(cfg["field"])
    fb = freeboundary.extract(u)
    fb.to_csv(out.path("free_boundary.csv"))
    plotting.plot_free_boundary(u, fb, out.path("free_boundary.svg"))
    if len(fb) == 0:
        out.say("analyze: no free boundary")
        return EXIT_OK
    x0 = np.asarray(cfg["center"], dtype=float) if cfg["center"] is not None else _default_center(u, fb)
    freeboundary.require_free_boundary_point(u, x0, fb)
    q = _quadrature(cfg)

    growth_radii = cfg["growth_radii"]
    if growth_radii is None:
        growth_radii = _fitting(u, x0, np.geomspace(0.1, max(4 * u.grid.h, 1e-3), 12))
    if len(growth_radii):
        stats = freeboundary.growth_stats(u, x0, growth_radii, q, fb)
        stats.to_csv(out.path("growth.csv"))
        plotting.plot_growth(stats, out.path("growth.svg"))

    radii = cfg["radii"] if cfg["radii"] is not None else _fitting(u, x0, DEFAULT_SCAN_RADII)
    if len(radii) == 0:
        raise BallOutsideDomain("no scan radius fits inside the domain")
    wcfg = WeissConfig(cfg["gamma"], q, mode=cfg["mode"])
    scan = wbar_scan(u, x0, sorted(radii, reverse=True), wcfg)
    scan.to_csv(out.path("weiss_scan.csv"))
    out.text("weiss_scan.json", scan.to_json() + "\n")
    plotting.plot_wbar(scan, out.path("wbar.svg"), omega_half(u.grid.dim))
    out.say(
        f"analyze: {len(fb)} interface points, center={[float(c) for c in x0]}, "
        f"min K={float(np.min(scan.column('K'))):.3e}, Wbar_limit={scan.Wbar_limit_estimate:.6g}"
    )
    return EXIT_OK


def cmd_blowup(cfg: RunConfig, out: Output) -> int:
    synthetic = cfg["synthetic"].strip().lower()
    if synthetic != "none":
        if cfg["field"] is not None:
            raise ConfigError("give either 'field' or 'synthetic', not both")
        u = synthetic_field(synthetic)
        mode = cfg["mode"] or ForcingMode.CONSTANT
        order = 3
        default_radii = (0.8, 0.4, 0.2, 0.1)
    else:
        u = _load_field(cfg["field"])
        mode = cfg["mode"] or ForcingMode.LOGARITHMIC
        order = 1
        default_radii = blowup.DYADIC_RADII
    if cfg["center"] is not None:
        x0 = np.asarray(cfg["center"], dtype=float)
    elif synthetic != "none":
        x0 = np.zeros(u.grid.dim)
    else:
        x0 = _default_center(u, freeboundary.extract(u))
    if synthetic == "none":
        # synthetic profiles vanish at the origin by construction
        freeboundary.require_free_boundary_point(u, x0)
    q = _quadrature(cfg, order)
    wcfg = WeissConfig(cfg["gamma"], q, mode=mode)
    radii = cfg["radii"] if cfg["radii"] is not None else default_radii
    result = blowup.analyze_point(u, x0, radii, wcfg, cfg["tol"])
    for k, p in enumerate(result.profiles):
        p.to_csv(out.path(f"profile_{k:02d}.csv"))
    rows = ["r,fit_residual,hdefect,nu"]
    for p in result.profiles:
        nu = ";".join(_fmt(c) for c in p.best_nu)
        rows.append(f"{_fmt(p.r)},{_fmt(p.fit_residual)},{_fmt(p.hdefect)},{nu}")
    out.text("profiles.csv", "\n".join(rows) + "\n")
    if result.decay is not None:
        out.text("decay.json", result.decay.to_json() + "\n")
    out.text("classification.json", json.dumps(result.summary(), indent=2, sort_keys=True) + "\n")
    plotting.plot_profiles(result.profiles, out.path("profiles.svg"))
    verdict = result.classification.value
    line = (
        f"{verdict} Wbar(0+)={result.scan.Wbar_limit_estimate:.6g} "
        f"blowup_density={result.density_estimate:.6g} omega_n/2={omega_half(u.grid.dim):.6g}"
    )
    if result.flagged:
        line += " FLAGGED"
    # the verdict is the command's result and is printed even when quiet
    print(line)
    return EXIT_OK


def cmd_oracle(cfg: RunConfig, out: Output) -> int:
    sol = oracle1d.shoot(cfg["x_seed"], cfg["x_max"], cfg["mode"], cfg["terms"])
    sol.to_csv(out.path("oracle.csv"))
    summary = {
        "mode": sol.mode.value,
        "x_seed": sol.x_seed,
        "x_max": sol.x_max,
        "samples": len(sol.x),
        "residual_max": sol.residual_max,
        "terms": sol.terms,
    }
    out.text("oracle.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    plotting.plot_oracle(sol, out.path("oracle.svg"))
    out.say(f"oracle: {len(sol.x)} samples, residual_max={sol.residual_max:.3e}")
    return EXIT_OK


def cmd_report(cfg: RunConfig, out: Output) -> int:
    """Solve a reference problem, then write every diagnostic table and figure."""
    spec = make_problem(cfg["problem"], cfg["h"], None, cfg.seed)
    u, report = _run_solve(spec, cfg["levels"])
    write_field(out.path("field.bin"), u)
    out.text("report.json", report.to_json() + "\n")
    fb = freeboundary.extract(u)
    fb.to_csv(out.path("free_boundary.csv"))
    plotting.plot_free_boundary(u, fb, out.path("free_boundary.svg"))
    rows = [("final_energy", report.final_energy), ("sweeps", report.sweeps_used), ("kkt", report.kkt_violation)]
    if len(fb) == 0:
        out.say("report: no free boundary")
    else:
        x0 = _default_center(u, fb)
        q = QuadratureConfig(cfg["n_theta"], cfg["n_rad"], cfg["interp_order"])
        wcfg = WeissConfig(cfg["gamma"], q, mode=spec.mode)
        scan_radii = cfg["radii"] if cfg["radii"] is not None else DEFAULT_SCAN_RADII
        scan_radii = _fitting(u, x0, scan_radii)
        if len(scan_radii):
            scan = wbar_scan(u, x0, sorted(scan_radii, reverse=True), wcfg)
            scan.to_csv(out.path("weiss_scan.csv"))
            plotting.plot_wbar(scan, out.path("wbar.svg"), omega_half(u.grid.dim))
            rows.append(("min_K", float(np.min(scan.column("K")))))
        growth_radii = _fitting(u, x0, np.geomspace(0.1, max(4 * u.grid.h, 1e-3), 12))
        if len(growth_radii):
            stats = freeboundary.growth_stats(u, x0, growth_radii, q, fb)
            stats.to_csv(out.path("growth.csv"))
            plotting.plot_growth(stats, out.path("growth.svg"))
        dyadic = _fitting(u, x0, blowup.DYADIC_RADII)
        if len(dyadic) >= 3:
            result = blowup.analyze_point(u, x0, dyadic, wcfg)
            for k, p in enumerate(result.profiles):
                p.to_csv(out.path(f"profile_{k:02d}.csv"))
            plotting.plot_profiles(result.profiles, out.path("profiles.svg"))
            if result.decay is not None:
                out.text("decay.json", result.decay.to_json() + "\n")
            rows += [
                ("Wbar_limit", result.scan.Wbar_limit_estimate),
                ("blowup_density", result.density_estimate),
                ("omega_half", omega_half(u.grid.dim)),
                ("classification", result.classification.value),
            ]
    out.text("summary.csv", "\n".join(["key,value"] + [f"{k},{_fmt(v) if isinstance(v, float) else v}" for k, v in rows]) + "\n")
    for k, v in rows:
        out.say(f"{k}={v}")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "analyze": cmd_analyze,
    "blowup": cmd_blowup,
    "oracle": cmd_oracle,
    "report": cmd_report,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="logobs", description="Numerics for the obstacle problem with logarithmic forcing.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", type=Path, help="key=value config file")
    parser.add_argument("--out", help="output directory (default ./out)")
    parser.add_argument("--seed", type=int, help="seed for randomised inputs")
    parser.add_argument("--quiet", action="store_true", help="suppress progress lines")
    parser.add_argument("overrides", nargs="*", metavar="key=value")
    return parser


def main(argv=None) -> int:
    # flags and key=value overrides may be interleaved
    args = build_parser().parse_intermixed_args(argv)
    try:
        file_values = {}
        if args.config is not None:
            if not args.config.is_file():
                raise ConfigError(f"config file not found: {args.config}")
            file_values = parse_keyvalue(args.config.read_text().splitlines(), str(args.config))
        overrides = parse_keyvalue(args.overrides, "<command line>")
        if args.out is not None:
            overrides["out"] = args.out
        if args.seed is not None:
            overrides["seed"] = str(args.seed)
        cfg = build_config(args.command, file_values, overrides)
        out = Output(cfg.output_dir, args.quiet)
        return COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericFailure as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except PRECONDITION_ERRORS as exc:
        print(f"precondition failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
