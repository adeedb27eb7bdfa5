"""Config-file driven batch runner.

Usage: ``fracflow --config run.json [--out DIR] [--seed N]``.

The config is a flat JSON object. ``mode`` selects the job and decides which
other keys are allowed; unknown keys are rejected. Any number may be given
as a fraction string such as ``"1/1000"``. See ``docs/config.md`` for the
full schema.

Exit status: 0 success, 2 config error, 3 numerical failure, 4 a check on
the results failed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from fracflow import harness, reference
from fracflow.grid import UniformGrid2D
from fracflow.problem import (
    MultiTermProblem,
    Term,
    example1_problem,
    manufactured_problem,
    oldroyd_to_multiterm,
)
from fracflow.scheme import RunRecord, StepError, run
from fracflow.solvers import IndefiniteMatrixError, NonConvergenceError

log = logging.getLogger("fracflow")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_CHECK = 0, 2, 3, 4

MODES = ("solve", "converge-space", "converge-time", "lemmas", "example1", "example2")

_COMMON = {"mode", "seed", "out", "solver", "rel_tol"}
_COEFFS = {"gamma", "a", "alpha", "c", "beta", "d", "b1", "b2", "b3"}
_ALLOWED = {
    "solve": _COMMON | _COEFFS | {"data", "Lx", "Ly", "Mx", "My", "h", "tau", "T", "snapshots"},
    "converge-space": _COMMON | _COEFFS | {"h", "tau", "T", "t_eval"},
    "converge-time": _COMMON | _COEFFS | {"tau", "T", "t_eval", "q"},
    "lemmas": _COMMON | {"samples", "check"},
    "example1": _COMMON | {"cases", "studies", "check"},
    "example2": _COMMON | {"lambda", "nu", "alpha", "beta", "theta", "A", "L", "d", "h",
                           "tau", "T", "snapshots", "check"},
}
DATA_KINDS = ("manufactured", "zero", "unforced-mode")
U64_MAX = 2**64 - 1


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class RunConfig:
    mode: str
    params: dict[str, Any]
    seed: int = 0
    out: str = "fracflow-out"
    solver: str = "direct"
    rel_tol: float = 1e-12
    digest: str = field(default="", compare=False)

    def canonical(self) -> str:
        body = {"mode": self.mode, "seed": self.seed, "solver": self.solver,
                "rel_tol": self.rel_tol, **self.params}
        return json.dumps(body, sort_keys=True, separators=(",", ":"))

    def refresh_digest(self) -> None:
        self.digest = hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


# {{{ parsing


def _number(value, name: str, errors: list[str]):
    if isinstance(value, bool):
        errors.append(f"{name}: expected a number, got {value!r}")
        return None
    if isinstance(value, (int, float)):
        v = float(value)
    elif isinstance(value, str):
        try:
            v = float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError):
            errors.append(f"{name}: cannot read {value!r} as a number or fraction")
            return None
    else:
        errors.append(f"{name}: expected a number, got {type(value).__name__}")
        return None
    if not math.isfinite(v):
        errors.append(f"{name}: must be finite")
        return None
    return v


def _number_list(value, name: str, errors: list[str]):
    if not isinstance(value, list):
        value = [value]
    out = [_number(v, f"{name}[{i}]", errors) for i, v in enumerate(value)]
    return None if any(v is None for v in out) else out


def _integer(value, name: str, errors: list[str], lo: int = 0, hi: int | None = None):
    if isinstance(value, bool) or not isinstance(value, int):
        errors.append(f"{name}: expected an integer, got {value!r}")
        return None
    if value < lo or (hi is not None and value > hi):
        errors.append(f"{name}: {value} outside [{lo}, {hi if hi is not None else 'inf'}]")
        return None
    return value


def _open_interval(v, lo, hi, name, errors):
    if v is not None and not lo < v < hi:
        errors.append(f"{name}: {v} must lie strictly between {lo} and {hi}")


def _positive(v, name, errors, strict=True):
    if v is None:
        return
    if (strict and v <= 0) or (not strict and v < 0):
        errors.append(f"{name}: must be {'positive' if strict else 'non-negative'}, got {v}")


def _cells(length: float, h: float, name: str, errors: list[str]):
    cells = length / h
    M = round(cells)
    if abs(cells - M) > 1e-9 * max(1.0, cells):
        errors.append(f"{name}: {h} does not divide the length {length}")
        return None
    if M < 2:
        errors.append(f"{name}: gives {M} cells, need at least 2")
        return None
    return M


def _steps(T: float, tau: float, name: str, errors: list[str]):
    steps = T / tau
    N = round(steps)
    if abs(steps - N) > 1e-9 * max(1.0, steps) or N < 1:
        errors.append(f"{name}: {tau} does not divide T = {T}")
        return None
    return N


def _read_terms(raw: dict, errors: list[str]) -> dict:
    out = {}
    for orders_key, coef_key, lo, hi in (("gamma", "a", 1.0, 2.0), ("alpha", "c", 0.0, 1.0),
                                         ("beta", "d", 0.0, 1.0)):
        orders = _number_list(raw.get(orders_key, []), orders_key, errors) or []
        coefs = raw.get(coef_key)
        coefs = ([1.0] * len(orders) if coefs is None
                 else _number_list(coefs, coef_key, errors) or [])
        for i, o in enumerate(orders):
            _open_interval(o, lo, hi, f"{orders_key}[{i}]", errors)
        for i, c in enumerate(coefs):
            _positive(c, f"{coef_key}[{i}]", errors)
        if coefs and len(coefs) != len(orders):
            errors.append(f"{coef_key}: {len(coefs)} coefficients for {len(orders)} orders")
        out[orders_key], out[coef_key] = orders, coefs
    for key, default in (("b1", 1.0), ("b2", 1.0), ("b3", 1.0)):
        v = _number(raw.get(key, default), key, errors)
        _positive(v, key, errors, strict=key != "b2")
        out[key] = v
    return out


def _read_snapshots(raw: dict, T: float | None, errors: list[str], default):
    times = _number_list(raw.get("snapshots", default), "snapshots", errors) or []
    for i, t in enumerate(times):
        if T is not None and not 0.0 <= t <= T + 1e-12:
            errors.append(f"snapshots[{i}]: {t} outside [0, T]")
    return times


def _validate(raw: dict) -> RunConfig:
    errors: list[str] = []
    mode = raw.get("mode")
    if mode not in MODES:
        raise ConfigError([f"mode: expected one of {', '.join(MODES)}, got {mode!r}"])
    unknown = sorted(set(raw) - _ALLOWED[mode])
    if unknown:
        errors.append(f"unknown key(s) for mode {mode}: {', '.join(unknown)}")

    seed = _integer(raw.get("seed", 0), "seed", errors, 0, U64_MAX)
    out = raw.get("out", "fracflow-out")
    if not isinstance(out, str) or not out:
        errors.append("out: expected a non-empty path string")
    solver = raw.get("solver", "direct")
    if solver not in ("direct", "cg"):
        errors.append(f"solver: expected 'direct' or 'cg', got {solver!r}")
    rel_tol = _number(raw.get("rel_tol", 1e-12), "rel_tol", errors)
    if rel_tol is not None and not 0.0 < rel_tol <= 1e-6:
        errors.append(f"rel_tol: {rel_tol} outside (0, 1e-6]")

    p: dict[str, Any] = {}
    if mode in ("solve", "converge-space", "converge-time"):
        p.update(_read_terms(raw, errors))
        T = _number(raw.get("T", 1.0), "T", errors)
        _positive(T, "T", errors)
        p["T"] = T

    if mode == "solve":
        data = raw.get("data", "manufactured")
        if data not in DATA_KINDS:
            errors.append(f"data: expected one of {', '.join(DATA_KINDS)}, got {data!r}")
        p["data"] = data
        Lx = _number(raw.get("Lx", 1.0), "Lx", errors)
        Ly = _number(raw.get("Ly", 1.0), "Ly", errors)
        _positive(Lx, "Lx", errors)
        _positive(Ly, "Ly", errors)
        if data == "manufactured" and (Lx, Ly) != (1.0, 1.0):
            errors.append("Lx/Ly: the manufactured solution lives on the unit square")
        if "h" in raw and ("Mx" in raw or "My" in raw):
            errors.append("h: give either h or Mx/My, not both")
        if "h" in raw:
            h = _number(raw["h"], "h", errors)
            _positive(h, "h", errors)
            if None not in (h, Lx, Ly) and h > 0 and Lx > 0 and Ly > 0:
                p["Mx"] = _cells(Lx, h, "h", errors)
                p["My"] = _cells(Ly, h, "h", errors)
        else:
            p["Mx"] = _integer(raw.get("Mx", 16), "Mx", errors, 2)
            p["My"] = _integer(raw.get("My", p["Mx"] or 16), "My", errors, 2)
        tau = _number(raw.get("tau", "1/100"), "tau", errors)
        _positive(tau, "tau", errors)
        if None not in (tau, p["T"]) and tau > 0 and p["T"] > 0:
            p["N"] = _steps(p["T"], tau, "tau", errors)
        p["Lx"], p["Ly"] = Lx, Ly
        p["snapshots"] = _read_snapshots(raw, p["T"], errors, [p["T"]] if p["T"] else [])
    elif mode == "converge-space":
        hs = _number_list(raw.get("h", ["1/4", "1/8", "1/16", "1/32"]), "h", errors) or []
        for i, h in enumerate(hs):
            _positive(h, f"h[{i}]", errors)
            if h and h > 0:
                _cells(1.0, h, f"h[{i}]", errors)
        tau = _number(raw.get("tau", "1/1000"), "tau", errors)
        _positive(tau, "tau", errors)
        p["h"], p["tau"] = hs, tau
        p["t_eval"] = _number(raw.get("t_eval", p["T"]), "t_eval", errors)
        if p["t_eval"] is not None and tau and tau > 0:
            _steps(p["t_eval"], tau, "tau", errors)
    elif mode == "converge-time":
        taus = _number_list(raw.get("tau", ["1/20", "1/40", "1/80", "1/160"]), "tau",
                            errors) or []
        for i, t in enumerate(taus):
            _positive(t, f"tau[{i}]", errors)
        p["tau"] = taus
        p["t_eval"] = _number(raw.get("t_eval", p["T"]), "t_eval", errors)
        p["q"] = _number(raw["q"], "q", errors) if "q" in raw else None
        _open_interval(p["q"], 0.0, 2.0, "q", errors)
    elif mode == "lemmas":
        p["samples"] = _integer(raw.get("samples", 1000), "samples", errors, 1)
        p["check"] = _flag(raw, "check", errors)
    elif mode == "example1":
        cases = raw.get("cases", [1, 2])
        if not isinstance(cases, list) or not cases or any(c not in (1, 2) for c in cases):
            errors.append(f"cases: expected a non-empty list drawn from [1, 2], got {cases!r}")
        studies = raw.get("studies", ["space", "time"])
        if (not isinstance(studies, list) or not studies
                or any(s not in ("space", "time") for s in studies)):
            errors.append(f"studies: expected a list drawn from ['space', 'time'], got {studies!r}")
        p["cases"], p["studies"] = cases, studies
        p["check"] = _flag(raw, "check", errors)
    elif mode == "example2":
        for key, default, strict in (("lambda", 5.0, True), ("nu", 2.0, True), ("A", 1.0, False),
                                     ("L", 5.0, True), ("d", 5.0, True), ("T", 1.0, True)):
            p[key] = _number(raw.get(key, default), key, errors)
            _positive(p[key], key, errors, strict)
        for key, default in (("alpha", 0.8), ("beta", 0.4)):
            p[key] = _number(raw.get(key, default), key, errors)
            _open_interval(p[key], 0.0, 1.0, key, errors)
        p["theta"] = _number(raw["theta"], "theta", errors) if "theta" in raw else None
        _positive(p["theta"], "theta", errors)
        h = _number(raw.get("h", "1/20"), "h", errors)
        tau = _number(raw.get("tau", "1/100"), "tau", errors)
        _positive(h, "h", errors)
        _positive(tau, "tau", errors)
        if None not in (h, p["L"], p["d"]) and h > 0 and p["L"] > 0 and p["d"] > 0:
            p["Mx"] = _cells(p["L"], h, "h", errors)
            p["My"] = _cells(p["d"], h, "h", errors)
        if None not in (tau, p["T"]) and tau > 0 and p["T"] > 0:
            p["N"] = _steps(p["T"], tau, "tau", errors)
        p["snapshots"] = _read_snapshots(raw, p["T"], errors, [0.5, 1.0])
        p["check"] = _flag(raw, "check", errors)

    if errors:
        raise ConfigError(errors)
    cfg = RunConfig(mode, p, seed=seed, out=out, solver=solver, rel_tol=rel_tol)
    cfg.refresh_digest()
    return cfg


def _flag(raw: dict, key: str, errors: list[str]) -> bool:
    v = raw.get(key, True)
    if not isinstance(v, bool):
        errors.append(f"{key}: expected true or false, got {v!r}")
        return True
    return v


def parse_config(path) -> RunConfig:
    """Read and validate a JSON config file; every violation is reported."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror or exc}"]) from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}"]) from exc
    if not isinstance(raw, dict):
        raise ConfigError([f"{path}: top level must be a JSON object"])
    return _validate(raw)


# }}}

# {{{ jobs


def _terms(orders, coefs):
    return [(c, o) for c, o in zip(coefs, orders)]


def _unforced_mode_problem(p: dict) -> MultiTermProblem:
    def mode(x, y):
        return np.sin(np.pi * x) * np.sin(np.pi * y)

    return MultiTermProblem(
        superone_terms=tuple(Term(c, o) for c, o in _terms(p["gamma"], p["a"])),
        b1=p["b1"], b2=p["b2"], b3=p["b3"],
        subone_terms=tuple(Term(c, o) for c, o in _terms(p["alpha"], p["c"])),
        laplacian_memory_terms=tuple(Term(c, o) for c, o in _terms(p["beta"], p["d"])),
        initial_value=mode, Lx=p.get("Lx", 1.0), Ly=p.get("Ly", 1.0), T=p["T"],
        name="unforced-mode")


def _problem_from(p: dict) -> MultiTermProblem:
    data = p.get("data", "manufactured")
    if data == "manufactured":
        return manufactured_problem(
            _terms(p["gamma"], p["a"]), p["b1"], p["b2"], p["b3"],
            _terms(p["alpha"], p["c"]), _terms(p["beta"], p["d"]), T=p["T"])
    if data == "unforced-mode":
        return _unforced_mode_problem(p)
    return MultiTermProblem(
        superone_terms=tuple(Term(c, o) for c, o in _terms(p["gamma"], p["a"])),
        b1=p["b1"], b2=p["b2"], b3=p["b3"],
        subone_terms=tuple(Term(c, o) for c, o in _terms(p["alpha"], p["c"])),
        laplacian_memory_terms=tuple(Term(c, o) for c, o in _terms(p["beta"], p["d"])),
        Lx=p["Lx"], Ly=p["Ly"], T=p["T"], name="zero-data")


class _Writer:
    def __init__(self, cfg: RunConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.files: list[str] = []
        out.mkdir(parents=True, exist_ok=True)

    def comment(self, **extra) -> str:
        parts = [f"config={self.cfg.digest}", f"mode={self.cfg.mode}", f"seed={self.cfg.seed}"]
        parts += [f"{k}={v}" for k, v in extra.items()]
        return " ".join(parts)

    def write(self, name: str, text: str) -> None:
        (self.out / name).write_text(text)
        self.files.append(name)


def _grid_comment(grid: UniformGrid2D) -> dict:
    return {"grid": f"{grid.Mx}x{grid.My}", "hx": repr(grid.hx), "hy": repr(grid.hy),
            "tau": repr(grid.tau), "N": grid.N}


def _snapshot_csv(record: RunRecord, n: int, comment: str) -> str:
    grid = record.grid
    X, Y = grid.mesh()
    lines = [f"# {comment}", "x,y,u"]
    U = record.U[n]
    lines += [f"{x!r},{y!r},{u!r}"
              for x, y, u in zip(X.ravel().tolist(), Y.ravel().tolist(), U.ravel().tolist())]
    return "\n".join(lines) + "\n"


def _write_snapshots(w: _Writer, record: RunRecord, times) -> None:
    for t in times:
        n = round(t / record.grid.tau)
        name = f"snapshot_t{record.time(n):.6g}.csv"
        w.write(name, _snapshot_csv(record, n, w.comment(t=repr(record.time(n)),
                                                        **_grid_comment(record.grid))))


def _job_solve(cfg: RunConfig, w: _Writer) -> list[harness.PropertyReport]:
    p = cfg.params
    problem = _problem_from(p)
    grid = UniformGrid2D(p["Lx"], p["Ly"], p["Mx"], p["My"], p["T"], p["N"])
    record = run(problem, grid, solver=cfg.solver, rel_tol=cfg.rel_tol)
    _write_snapshots(w, record, p["snapshots"])
    if problem.exact is not None:
        l2, linf = harness.solution_errors(record)
        log.info("final errors: l2=%.4e linf=%.4e", l2, linf)
    return []


def _job_converge(cfg: RunConfig, w: _Writer) -> list[harness.PropertyReport]:
    p = cfg.params
    problem = _problem_from(p)
    if cfg.mode == "converge-space":
        rows = harness.spatial_study(problem, p["h"], p["tau"], p["t_eval"], solver=cfg.solver)
    else:
        rows = harness.temporal_study(problem, p["tau"], p["t_eval"], order=p["q"],
                                      solver=cfg.solver)
    w.write("convergence.csv", harness.rows_to_csv(rows, w.comment(t_eval=repr(p["t_eval"]))))
    return []


def _job_lemmas(cfg: RunConfig, w: _Writer) -> list[harness.PropertyReport]:
    reports = harness.property_suite(seed=cfg.seed % 2**32, samples=cfg.params["samples"])
    w.write("properties.csv", harness.reports_to_csv(reports, w.comment()))
    return reports if cfg.params["check"] else []


def _job_example1(cfg: RunConfig, w: _Writer) -> list[harness.PropertyReport]:
    p = cfg.params
    checks = []
    for case in p["cases"]:
        gammas, alphas, betas = reference.CASE_ORDERS[case - 1]
        problem = example1_problem(gammas, alphas, betas)
        if "space" in p["studies"]:
            rows = harness.spatial_study(problem, reference.SPATIAL_H, reference.SPATIAL_TAU,
                                         solver=cfg.solver)
            w.write(f"case{case}_space.csv",
                    harness.rows_to_csv(rows, w.comment(case=case,
                                                        tau=repr(reference.SPATIAL_TAU))))
            checks += harness.compare_with_reference(rows, reference.SPATIAL[case - 1], "space",
                                                     order_range=(1.9, 2.2))
        if "time" in p["studies"]:
            rows = harness.temporal_study(problem, reference.TEMPORAL_TAU, solver=cfg.solver)
            w.write(f"case{case}_time.csv",
                    harness.rows_to_csv(rows, w.comment(case=case, q=problem.temporal_order)))
            checks += harness.compare_with_reference(rows, reference.TEMPORAL[case - 1], "time",
                                                     order_window=0.2)
    w.write("checks.csv", harness.reports_to_csv(checks, w.comment()))
    return checks if p["check"] else []


def _job_example2(cfg: RunConfig, w: _Writer) -> list[harness.PropertyReport]:
    p = cfg.params
    problem = oldroyd_to_multiterm(p["lambda"], p["nu"], p["alpha"], p["beta"],
                                   acceleration=p["A"], L=p["L"], d=p["d"], T=p["T"],
                                   retardation=p["theta"])
    grid = UniformGrid2D(p["L"], p["d"], p["Mx"], p["My"], p["T"], p["N"])
    record = run(problem, grid, solver=cfg.solver, rel_tol=cfg.rel_tol)
    _write_snapshots(w, record, p["snapshots"])
    times = sorted(p["snapshots"])
    early, late = (times[0], times[-1]) if len(times) >= 2 else (0.5 * p["T"], p["T"])
    checks = harness.example2_checks(record, early=early, late=late)
    w.write("checks.csv", harness.reports_to_csv(checks, w.comment(**_grid_comment(grid))))
    return checks if p["check"] else []


JOBS = {
    "solve": _job_solve,
    "converge-space": _job_converge,
    "converge-time": _job_converge,
    "lemmas": _job_lemmas,
    "example1": _job_example1,
    "example2": _job_example2,
}


def run_config(cfg: RunConfig, out: Path | None = None) -> tuple[int, dict]:
    """Execute a validated config; returns the exit status and a summary."""
    w = _Writer(cfg, Path(cfg.out) if out is None else out)
    summary: dict[str, Any] = {"mode": cfg.mode, "config": cfg.digest, "seed": cfg.seed}
    try:
        checks = JOBS[cfg.mode](cfg, w)
    except (StepError, IndefiniteMatrixError, NonConvergenceError, np.linalg.LinAlgError,
            FloatingPointError) as exc:
        summary.update(status="numerical-failure", error=f"{type(exc).__name__}: {exc}")
        code = EXIT_NUMERICAL
    else:
        failed = [r.as_row() for r in checks if not r.passed]
        summary.update(status="check-failed" if failed else "ok", checks=len(checks),
                       failures=failed)
        code = EXIT_CHECK if failed else EXIT_OK
    summary["files"] = w.files
    (w.out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True,
                                                   default=str) + "\n")
    return code, summary


# }}}


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracflow", description=__doc__.split("\n\n")[0])
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", help="output directory (overrides the config)")
    ap.add_argument("--seed", help="random seed, 0 <= seed < 2**64 (overrides the config)")
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        if args.seed is not None:
            try:
                seed = int(args.seed)
            except ValueError:
                raise ConfigError([f"--seed: not an integer: {args.seed!r}"]) from None
            if not 0 <= seed <= U64_MAX:
                raise ConfigError([f"--seed: {seed} outside [0, 2**64)"])
            cfg.seed = seed
        if args.out is not None:
            cfg.out = args.out
        cfg.refresh_digest()
    except ConfigError as exc:
        print(json.dumps({"status": "config-error", "errors": exc.problems}, indent=2),
              file=sys.stderr)
        return EXIT_CONFIG
    code, summary = run_config(cfg)
    if code != EXIT_OK:
        print(json.dumps(summary, indent=2, sort_keys=True, default=str), file=sys.stderr)
    else:
        log.info("wrote %s to %s", ", ".join(summary["files"]), cfg.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
