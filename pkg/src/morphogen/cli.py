"""Command-line driver: ``morphogen {solve2d,solve1d,sweep,norms,plot}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .analysis import SweepError, compute_norms, run_sweep
from .discretization import build_grid1d, build_grid2d
from .io import save_solution, write_json, load_solution
from .linear import LinearSolveError
from .model import ModelParams, reference_params
from .picard import PicardError, PicardOptions, solve_stationary_1d, solve_stationary_2d

log = logging.getLogger("morphogen")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_SOLVER = 4
EXIT_OUTPUT = 5

REFERENCE_H_LIST = [1, 1 / 3, 1 / 5, 1 / 10, 1 / 15, 1 / 20, 1 / 25, 1 / 30, 1 / 35, 1 / 40, 1 / 45, 1 / 50]
FORMATS = ("csv", "json", "svg")

EPILOG = f"""\
exit codes:
  {EXIT_OK}  success
  {EXIT_USAGE}  command-line usage error
  {EXIT_CONFIG}  configuration could not be parsed or is invalid
  {EXIT_SOLVER}  solver failure (failure.json written to the output directory)
  {EXIT_OUTPUT}  output directory not writable

configuration files are JSON: either a bare parameter document
{{"b": [..5..], "c": [..5..], "p": [..5..], "d": .., "h": ..}} or
{{"params": {{...}}, "grid": "401x41", "h_list": [1, 0.5], "tol": 1e-10,
  "max_outer": 200, "formats": ["csv", "json"], "out": "results", "seed": 0}}.
Command-line flags override the file. Without parameters the reference
set b=[100,10,10,10,10], c=[10,10,1,10,10], p=[100,0,100,0,0], d=0.1 is used.
"""


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    params: ModelParams
    n1: int = 401
    n2: int = 41
    h_list: list[float] = field(default_factory=list)
    tol: float = 1e-10
    max_outer: int = 200
    out: Path = Path("results")
    formats: tuple[str, ...] = ("csv", "json")
    seed: int = 0
    log: bool = False
    workers: int = 1

    def picard_options(self) -> PicardOptions:
        return PicardOptions(tol=self.tol, max_outer=self.max_outer)


def _parse_h(token) -> float:
    try:
        return float(Fraction(str(token).strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot parse h value {token!r}") from exc


def _parse_h_list(value) -> list[float]:
    if isinstance(value, str):
        if value.strip().lower() == "reference":
            return list(REFERENCE_H_LIST)
        value = [v for v in value.split(",") if v.strip()]
    return [_parse_h(v) for v in value]


def _parse_grid(value) -> tuple[int, int | None]:
    if isinstance(value, (list, tuple)):
        parts = list(value)
    else:
        parts = str(value).lower().split("x")
    try:
        nums = [int(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"cannot parse grid {value!r}; expected N1xN2") from exc
    if len(nums) == 1:
        return nums[0], None
    if len(nums) != 2:
        raise ConfigError(f"cannot parse grid {value!r}; expected N1xN2")
    return nums[0], nums[1]


def _parse_formats(value) -> tuple[str, ...]:
    items = value.split(",") if isinstance(value, str) else list(value)
    items = [i.strip().lower() for i in items if i.strip()]
    bad = [i for i in items if i not in FORMATS]
    if bad:
        raise ConfigError(f"unknown output formats {bad}; choose from {FORMATS}")
    return tuple(f for f in FORMATS if f in items)


def load_config(args: argparse.Namespace) -> RunConfig:
    raw: dict = {}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
    try:
        pdata = raw.get("params", raw if "b" in raw else None)
        params = ModelParams.from_dict(pdata) if pdata is not None else reference_params()
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid model parameters: {exc}") from exc

    cfg = RunConfig(params=params)
    if "grid" in raw:
        n1, n2 = _parse_grid(raw["grid"])
        cfg.n1, cfg.n2 = n1, n2 or cfg.n2
    if args.grid:
        n1, n2 = _parse_grid(args.grid)
        cfg.n1, cfg.n2 = n1, n2 or cfg.n2
    if "h_list" in raw:
        cfg.h_list = _parse_h_list(raw["h_list"])
    if args.h_list:
        cfg.h_list = _parse_h_list(args.h_list)
    if args.h is not None:
        cfg.h_list = [_parse_h(args.h)]
    if not cfg.h_list:
        cfg.h_list = [params.h]
    for key, attr, conv in (("tol", "tol", float), ("max_outer", "max_outer", int), ("seed", "seed", int)):
        if key in raw:
            setattr(cfg, attr, conv(raw[key]))
        flag = getattr(args, attr, None)
        if flag is not None:
            setattr(cfg, attr, conv(flag))
    if "formats" in raw:
        cfg.formats = _parse_formats(raw["formats"])
    if args.formats:
        cfg.formats = _parse_formats(args.formats)
    if "out" in raw:
        cfg.out = Path(raw["out"])
    if args.out:
        cfg.out = Path(args.out)
    cfg.log = bool(getattr(args, "log", False))
    cfg.workers = int(getattr(args, "workers", 1) or 1)

    try:
        build_grid2d(cfg.n1, cfg.n2)
        if any(b >= a for a, b in zip(cfg.h_list, cfg.h_list[1:])):
            raise ConfigError("h_list must be strictly decreasing")
        for h in cfg.h_list:
            params.with_h(h)
        cfg.picard_options()
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def ensure_writable(out: Path) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=out):
            pass
    except OSError as exc:
        raise PermissionError(f"output directory {out} is not writable: {exc}") from exc


def _write_outputs(sol, cfg: RunConfig, stem: str, title: str | None = None) -> dict:
    written = {}
    if "csv" in cfg.formats or "json" in cfg.formats:
        paths = save_solution(sol, cfg.out, stem, extra={"seed": cfg.seed})
        if "json" not in cfg.formats:
            paths.pop("sidecar").unlink()
        if "csv" not in cfg.formats:
            for key in ("bulk", "boundary"):
                if key in paths:
                    paths.pop(key).unlink()
        written.update({k: v.name for k, v in paths.items()})
    if "svg" in cfg.formats:
        from .plots import plot_heatmap, plot_profile

        if sol.is_2d:
            written["heatmap"] = plot_heatmap(sol, cfg.out / f"{stem}_u1.svg", title).name
        else:
            written["profile"] = plot_profile(sol, cfg.out / f"{stem}_profile.svg").name
    if cfg.log:
        path = cfg.out / f"{stem}_convergence.csv"
        with open(path, "w", newline="") as fh:
            sol.write_log(fh)
        written["log"] = path.name
    return written


def _failure(cfg: RunConfig, exc: Exception) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, PicardError):
        payload["history"] = [list(h) for h in exc.history]
    if isinstance(exc, LinearSolveError):
        payload["residual_history"] = exc.residual_history
    write_json(cfg.out / "failure.json", payload)
    log.error("%s", exc)
    return EXIT_SOLVER


def cmd_solve2d(cfg: RunConfig) -> int:
    if len(cfg.h_list) != 1:
        raise ConfigError("solve2d needs a single h; use sweep for several")
    params = cfg.params.with_h(cfg.h_list[0])
    try:
        sol = solve_stationary_2d(params, build_grid2d(cfg.n1, cfg.n2), cfg.picard_options())
    except (PicardError, LinearSolveError) as exc:
        return _failure(cfg, exc)
    _write_outputs(sol, cfg, "solution2d")
    log.info("converged in %d iterations", sol.iterations)
    return EXIT_OK


def cmd_solve1d(cfg: RunConfig) -> int:
    try:
        sol = solve_stationary_1d(cfg.params, build_grid1d(cfg.n1), cfg.picard_options())
    except (PicardError, LinearSolveError) as exc:
        return _failure(cfg, exc)
    _write_outputs(sol, cfg, "solution1d")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    grid2 = build_grid2d(cfg.n1, cfg.n2)
    status = EXIT_OK
    try:
        report = run_sweep(cfg.params, cfg.h_list, grid2, opts=cfg.picard_options(), workers=cfg.workers)
    except SweepError as exc:
        report = exc.report
        status = EXIT_SOLVER
        log.error("%s", exc)
    except (PicardError, LinearSolveError) as exc:
        return _failure(cfg, exc)

    members = []
    for i, row in enumerate(report.rows):
        files = _write_outputs(report.solutions[row.h], cfg, f"h{i:02d}", title=f"h = {row.h:.4g}")
        members.append({"index": i, "h": row.h, "status": "ok", "files": files})
    for fail in report.failures:
        members.append({"h": fail["h"], "status": "failed", "error": fail["error"]})
    if report.reference is not None:
        ref_files = _write_outputs(report.reference, cfg, "reference1d")
    else:
        ref_files = {}
    if "json" in cfg.formats:
        (cfg.out / "sweep.json").write_text(report.to_json())
    if "csv" in cfg.formats:
        (cfg.out / "sweep.csv").write_text(report.to_csv())
    if "svg" in cfg.formats:
        if len(report.rows) > 1:
            from .plots import plot_sweep_summary

            plot_sweep_summary(report, cfg.out / "summary.svg")
        else:
            log.warning("single-h sweep: summary plot skipped")
    write_json(
        cfg.out / "manifest.json",
        {"members": members, "reference": ref_files, "complete": status == EXIT_OK},
    )
    if status == EXIT_OK and not report.uniform_bound_ok:
        log.warning("composite norm ratio %.3g exceeds %.3g", report.composite_ratio, report.bound_factor)
    return status


def cmd_norms(args: argparse.Namespace) -> int:
    sol = load_solution(args.solution)
    report = compute_norms(sol, args.p, args.q).to_dict()
    text = json.dumps(report, indent=2) + "\n"
    if args.out:
        out = Path(args.out)
        ensure_writable(out)
        (out / "norms.json").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_plot(args: argparse.Namespace) -> int:
    from .plots import plot_heatmap, plot_profile

    src = Path(args.solution)
    sol = load_solution(src)
    out = Path(args.out) if args.out else src.parent
    ensure_writable(out)
    if sol.is_2d:
        plot_heatmap(sol, out / f"{src.stem}_u1.svg")
    else:
        plot_profile(sol, out / f"{src.stem}_profile.svg")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--out", help="output directory (default: results)")
    common.add_argument("--formats", help="comma-separated subset of csv,json,svg")
    common.add_argument("--grid", help="N1xN2 node counts (N1 odd); solve1d uses N1")
    hgroup = common.add_mutually_exclusive_group()
    hgroup.add_argument("--h", help="thickness, e.g. 0.1 or 1/10")
    hgroup.add_argument("--h-list", dest="h_list", help="decreasing list, e.g. 1,1/3,1/5 or 'reference'")
    common.add_argument("--tol", type=float, help="relative Picard update tolerance")
    common.add_argument("--max-outer", dest="max_outer", type=int, help="Picard iteration cap")
    common.add_argument("--seed", type=int, help="seed for randomised test fields")
    common.add_argument("--log", action="store_true", help="write the convergence history as CSV")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="morphogen",
        description="Stationary bulk/surface morphogen transport solver.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("solve2d", "solve the 2D stationary problem for one h"),
        ("solve1d", "solve the reduced 1D problem"),
        ("sweep", "solve for a list of h and compare with the 1D limit"),
    ):
        p = sub.add_parser(name, parents=[common], help=help_, epilog=EPILOG,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        if name == "sweep":
            p.add_argument("--workers", type=int, default=1, help="parallel processes for sweep members")
    p = sub.add_parser("norms", help="norm report of a saved solution")
    p.add_argument("solution", help="JSON sidecar of a saved solution")
    p.add_argument("--p", type=float, default=1.5)
    p.add_argument("--q", type=float, default=4.0)
    p.add_argument("--out")
    p.add_argument("-v", "--verbose", action="store_true")
    p = sub.add_parser("plot", help="render a saved solution to SVG")
    p.add_argument("solution", help="JSON sidecar of a saved solution")
    p.add_argument("--out")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    try:
        if args.command == "norms":
            return cmd_norms(args)
        if args.command == "plot":
            return cmd_plot(args)
        cfg = load_config(args)
        ensure_writable(cfg.out)
        return {"solve2d": cmd_solve2d, "solve1d": cmd_solve1d, "sweep": cmd_sweep}[args.command](cfg)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except PermissionError as exc:
        log.error("%s", exc)
        return EXIT_OUTPUT
    except (OSError, ValueError, KeyError) as exc:
        if args.command in ("norms", "plot"):
            log.error("cannot read solution: %s", exc)
            return EXIT_CONFIG
        raise


if __name__ == "__main__":
    sys.exit(main())
