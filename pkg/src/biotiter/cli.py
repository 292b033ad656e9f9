"""Command-line runner: ``biotiter {run, sweep, verify, list-cases}``.

Run configurations are INI-style files::

    [global]
    tol = 1e-8
    max_iter = 100
    out = results

    [experiment newton-case1]
    problem = test1
    case = 1
    scheme = newton
    h = 0.1
    tau = 0.1
    T = 1

Keys before the first section header form one unnamed experiment.
``[verify]`` toggles the self-checks (``jacobian``, ``kinematics``,
``consistency``; yes/no).
"""
from __future__ import annotations

import argparse
import configparser
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import bench, verify
from .model import TABLE1, table1_case
from .schemes import SchemeKind

OUT_ENV = "BIOTITER_OUT"
DEFAULT_OUT = "biotiter-out"

EXPERIMENT_KEYS = {
    "problem": str,
    "case": int,
    "scheme": str,
    "h": float,
    "tau": float,
    "t": float,
    "l_s": float,
    "tol": float,
    "max_iter": int,
    "regime": str,
    "theta_final": float,
    "mu": float,
    "alpha": float,
    "k": float,
    "c_p": float,
    "phi": float,
    "lam": float,
    "expect": str,
}
GLOBAL_KEYS = {"tol": float, "max_iter": int, "out": str}
VERIFY_KEYS = ("jacobian", "kinematics", "consistency")
_SPEC_FIELD = {"t": "T", "l_s": "L_s"}
_DEFAULT_SECTION = "__default__"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    experiments: list
    out: str | None = None
    verify: dict = field(default_factory=dict)


def _line_numbers(text: str) -> dict:
    """(section, key) -> 1-based line number, for error messages."""
    where = {}
    section = _DEFAULT_SECTION
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            section = m.group(1).strip()
        elif s and s[0] not in "#;":
            key = re.split(r"[=:]", s, maxsplit=1)[0].strip().lower()
            where.setdefault((section, key), i)
    return where


def _convert(section, key, raw, kind, where):
    try:
        return kind(raw)
    except ValueError:
        line = where.get((section, key))
        at = f"line {line}: " if line else ""
        raise ConfigError(f"{at}invalid value {raw!r} for '{key}' in [{section}]") from None


def parse_config(text: str) -> RunConfig:
    """Parse and validate a run configuration."""
    where = _line_numbers(text)
    cp = configparser.ConfigParser(interpolation=None, strict=True)
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError:
        try:
            cp.read_string(f"[{_DEFAULT_SECTION}]\n" + text)
        except configparser.Error as exc:
            raise ConfigError(_shift_lines(str(exc), -1)) from None
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None

    glob = {}
    checks = {}
    specs = []
    for name in cp.sections():
        sec = cp[name]
        if name == "global":
            for key, raw in sec.items():
                if key not in GLOBAL_KEYS:
                    raise ConfigError(_unknown(name, key, where))
                glob[key] = _convert(name, key, raw, GLOBAL_KEYS[key], where)
        elif name == "verify":
            for key in sec:
                if key not in VERIFY_KEYS:
                    raise ConfigError(_unknown(name, key, where))
                try:
                    checks[key] = sec.getboolean(key)
                except ValueError:
                    raise ConfigError(f"line {where.get((name, key), '?')}: '{key}' must be yes or no") from None
        elif name == _DEFAULT_SECTION or name == "experiment" or name.startswith("experiment "):
            label = name.split(" ", 1)[1].strip() if " " in name else "experiment"
            specs.append((name, label, sec))
        else:
            raise ConfigError(f"line {_section_line(text, name)}: unknown section [{name}]")

    if not specs:
        raise ConfigError("no experiments")

    experiments = []
    for name, label, sec in specs:
        kwargs = {"name": label}
        for key, raw in sec.items():
            if key not in EXPERIMENT_KEYS:
                raise ConfigError(_unknown(name, key, where))
            kwargs[_SPEC_FIELD.get(key, key)] = _convert(name, key, raw, EXPERIMENT_KEYS[key], where)
        for key in ("tol", "max_iter"):
            if key in glob and key not in kwargs:
                kwargs[key] = glob[key]
        try:
            experiments.append(bench.ExperimentSpec(**kwargs))
        except ValueError as exc:
            raise ConfigError(f"[{name if name != _DEFAULT_SECTION else 'experiment'}]: {exc}") from None
    labels = [e.name for e in experiments]
    dup = sorted({x for x in labels if labels.count(x) > 1})
    if dup:
        raise ConfigError(f"duplicate experiment name {dup[0]!r}")
    return RunConfig(experiments, glob.get("out"), checks)


def _unknown(section, key, where) -> str:
    line = where.get((section, key))
    sec = "experiment" if section == _DEFAULT_SECTION else section
    at = f"line {line}: " if line else ""
    return f"{at}unknown key '{key}' in [{sec}]"


def _section_line(text, name):
    for i, line in enumerate(text.splitlines(), start=1):
        if line.strip() == f"[{name}]":
            return i
    return "?"


def _shift_lines(msg: str, delta: int) -> str:
    return re.sub(r"line (\d+)", lambda m: f"line {int(m.group(1)) + delta}", msg)


# -- output --------------------------------------------------------------------


def write_atomic(path: str, lines) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def write_reports(rows, out_dir: str, stem: str = "report") -> list:
    """Write ``<stem>.csv`` and ``<stem>_iterations.csv``; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    report = os.path.join(out_dir, f"{stem}.csv")
    iters = os.path.join(out_dir, f"{stem}_iterations.csv")
    write_atomic(report, bench.report_lines(rows))
    write_atomic(iters, bench.iteration_lines(rows))
    return [report, iters]


def _run_rows(specs, threads: int):
    run = bench._safe(bench.run_experiment)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(run, specs))
    return [run(s) for s in specs]


def _out_dir(args, cfg=None) -> str:
    if args.out:
        return args.out
    if cfg is not None and cfg.out:
        return cfg.out
    return os.environ.get(OUT_ENV, DEFAULT_OUT)


def _summarise(rows) -> int:
    bad = [r for r in rows if not r.ok]
    for r in rows:
        print(f"{r.experiment}: {r.status} after {r.iters} iterations")
    if bad:
        print(f"error: {len(bad)} experiment(s) did not reach the expected status "
              f"(first: {bad[0].experiment}: {bad[0].status})", file=sys.stderr)
        return 1
    return 0


def cmd_run(args) -> int:
    with open(args.config) as fh:
        cfg = parse_config(fh.read())
    rows = _run_rows(cfg.experiments, args.threads)
    out = _out_dir(args, cfg)
    paths = write_reports(rows, out)
    if not args.no_plots:
        from .plotting import plot_histories

        plot_histories(rows, os.path.join(out, "report_iterations.png"))
    for p in paths:
        print(f"wrote {p}")
    return _summarise(rows)


def _parse_values(text: str) -> list:
    return [v.strip() for v in text.split(",") if v.strip()]


def cmd_sweep(args) -> int:
    if args.config:
        with open(args.config) as fh:
            cfg = parse_config(fh.read())
        bases = cfg.experiments
        out = _out_dir(args, cfg)
    else:
        base = bench.ExperimentSpec(name=f"{args.problem}-case{args.case}", problem=args.problem, case=args.case)
        kinds = list(SchemeKind) if args.scheme == "all" else [SchemeKind(args.scheme)]
        bases = [base.replace(name=f"{base.name}-{k.value}", scheme=k) for k in kinds]
        out = _out_dir(args)
    values = _parse_values(args.values)
    rows, xs = [], []
    with ThreadPoolExecutor(max_workers=args.threads) if args.threads > 1 else _NullContext() as ex:
        for b in bases:
            rows += bench.sweep(b, args.axis, values, executor=ex)
            xs += values
    paths = write_reports(rows, out, f"sweep_{args.axis}")
    if not args.no_plots and args.axis != "scheme":
        from .plotting import plot_sweep

        plot_sweep(rows, args.axis, xs, os.path.join(out, f"sweep_{args.axis}.png"))
    for p in paths:
        print(f"wrote {p}")
    return _summarise(rows)


class _NullContext:
    def __enter__(self):
        return None

    def __exit__(self, *exc):
        return False


def cmd_verify(args) -> int:
    toggles = {k: True for k in VERIFY_KEYS}
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
        cp = configparser.ConfigParser(interpolation=None)
        cp.read_string(text)
        if cp.has_section("verify"):
            for key in cp["verify"]:
                if key not in VERIFY_KEYS:
                    raise ConfigError(f"unknown key '{key}' in [verify]")
                toggles[key] = cp["verify"].getboolean(key)
    results = []
    if toggles["jacobian"]:
        results += verify.jacobian_suite(args.samples, args.seed)
    if toggles["kinematics"]:
        results += verify.kinematics_suite(args.seed)
    if toggles["consistency"]:
        results += verify.consistency_suite()
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    if failed:
        print(f"error: {len(failed)} check(s) failed", file=sys.stderr)
        return 1
    return 0


def cmd_list_cases(args) -> int:
    print(f"{'case':>4}  {'b(p)':<24} {'c(x)':<28} {'alpha_b':>9} {'L_b':>9} {'L_c':>9}")
    for case in sorted(TABLE1):
        m = table1_case(case)
        print(f"{case:>4}  {m.b_label:<24} {m.c_label:<28} {m.alpha_b:>9.4g} {m.L_b:>9.4g} {m.L_c:>9.4g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="biotiter", description="Iterative solvers for nonlinear Biot poroelasticity.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./{DEFAULT_OUT})")
        sp.add_argument("--threads", type=int, default=1, help="experiments run in parallel")
        sp.add_argument("--no-plots", action="store_true", help="skip the PNG figures")

    r = sub.add_parser("run", help="run the experiments of a config file")
    r.add_argument("--config", required=True)
    common(r)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="vary one parameter")
    s.add_argument("--axis", required=True, choices=bench.SWEEP_AXES)
    s.add_argument("--values", required=True, help="comma-separated values")
    s.add_argument("--config", help="base experiments (default: all four schemes on test problem 1)")
    s.add_argument("--problem", default="test1", choices=bench.PROBLEMS)
    s.add_argument("--case", type=int, default=1)
    s.add_argument("--scheme", default="all", choices=["all"] + [k.value for k in SchemeKind])
    common(s)
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="run the self-checks")
    v.add_argument("--config")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--samples", type=int, default=100, help="random samples per regime in the Jacobian check")
    v.set_defaults(func=cmd_verify)

    lc = sub.add_parser("list-cases", help="print the nonlinearity table")
    lc.set_defaults(func=cmd_list_cases)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be at least 1")
    try:
        return args.func(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
