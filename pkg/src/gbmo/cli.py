"""Command-line front end.

Configuration is flat ``key = value`` text, one entry per line, ``#`` starts
a comment. Keys are dotted names from ``DEFAULTS``; values are plain strings
parsed per key. Precedence: built-in defaults, then ``--config`` file, then
``--set key=value`` and the convenience flags of each subcommand.

Lists are comma separated (``ambient.lo = 0,0``); lists of vectors use ``;``
between vectors (``functional.S = 1,0; 0,1``). Epsilons accept fractions
(``1/8, 1/16``) or ``dyadic(8, 64)``. The field is a catalog call such as
``linear(A=[1,0,0,1])``, ``singular(delta=1)`` or ``sine2d``.
"""

from __future__ import annotations

import argparse
import ast
import csv
import hashlib
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .characterize import (Verdict, divergence_exponent, fit_null_affine, membership_indicator,
                           verdict_from_sweep)
from .errors import (DomainError, GBMOError, NumericError, ParameterError, ShapeError,
                     SolverError, StructureError)
from .field import CATALOG, Field, QuadratureRule
from .functionals import CoreFunctional, SolverConfig, check_core_axioms
from .geometry import Box, ReferenceCell, RotationGroup, rotation_2d
from .psi import PsiEvaluator, estimate_null_space, gamma_np, psi_property_check
from .seminorm import PackingConfig, dyadic, sweep

EXIT_OK, EXIT_TOL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULTS = {
    "seed": "0",
    "field": "sine2d",
    "ambient.lo": "0,0",
    "ambient.hi": "1,1",
    "functional.variant": "mean_oscillation",
    "functional.p": "2",
    "functional.S": "",
    "functional.solver.tol": "1e-10",
    "functional.solver.max_iters": "500",
    "functional.solver.p1_smoothing": "1e-6",
    "cell.shape": "cube",
    "cell.side": "1",
    "group.kind": "trivial",
    "group.count": "64",
    "group.seed": "",
    "group.angles": "",
    "packing.offsets": "4",
    "packing.greedy": "false",
    "epsilons": "dyadic(8, 64)",
    "quadrature.order": "5",
    "quadrature.ball_samples": "16",
    "quadrature.adaptive_depth": "4",
    "quadrature.split": "2",
    "sweep.k_fit": "4",
    "sweep.slope_max": "-0.1",
    "sweep.growth": "0.05",
    "verdict.plateau": "0.02",
    "verdict.zero_tol": "1e-8",
    "characterize.mode": "auto",
    "psi.matrix": "1,0,0,1",
    "psi.shape": "",
    "psi.mode": "auto",
    "check.tol": "1e-8",
    "check.trials": "20",
    "check.psi_trials": "50",
    "gamma.n": "2",
    "gamma.p": "1,2",
    "gamma.samples": "64",
    "output.dir": "out",
}
# keys that do not change results and are left out of the config hash
_UNHASHED = {"output.dir"}


class ConfigError(ParameterError):
    """Malformed configuration file or value."""


# ---------------------------------------------------------------------------
# parsing


def parse_config_text(text: str, source: str = "<config>") -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        _check_key(key, f"{source}:{lineno}")
        out[key] = value
    return out


def _check_key(key: str, where: str):
    if key not in DEFAULTS:
        raise ConfigError(f"{where}: unknown key {key!r}")


def _floats(text: str, what: str) -> list:
    try:
        return [float(Fraction(t.strip())) for t in text.split(",") if t.strip()]
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{what}: cannot parse number list {text!r}") from None


def _float(text: str, what: str) -> float:
    vals = _floats(text, what)
    if len(vals) != 1:
        raise ConfigError(f"{what}: expected one number, got {text!r}")
    return vals[0]


def _int(text: str, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{what}: expected an integer, got {text!r}") from None


def _bool(text: str, what: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{what}: expected a boolean, got {text!r}")


def parse_matrix(text: str, shape=None) -> np.ndarray:
    """Row-major comma list; square unless ``shape = (m, n)`` is given."""
    vals = _floats(text, "matrix")
    if not vals or not all(math.isfinite(v) for v in vals):
        raise ConfigError(f"matrix: no finite entries in {text!r}")
    if shape is None:
        k = math.isqrt(len(vals))
        if k * k != len(vals):
            raise ConfigError(f"matrix: {len(vals)} entries is not a square; set psi.shape")
        shape = (k, k)
    if shape[0] * shape[1] != len(vals):
        raise ConfigError(f"matrix: {len(vals)} entries do not fit shape {shape}")
    return np.array(vals).reshape(shape)


def parse_epsilons(text: str) -> list:
    t = text.strip()
    if t.startswith("dyadic"):
        try:
            node = ast.parse(t, mode="eval").body
            first, last = (ast.literal_eval(a) for a in node.args)
        except (SyntaxError, ValueError, AttributeError, TypeError):
            raise ConfigError(f"epsilons: cannot parse {text!r}") from None
        eps = dyadic(int(first), int(last))
    else:
        eps = _floats(t, "epsilons")
    if len(eps) < 2 or any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError("epsilons: need at least two positive, strictly decreasing values")
    return eps


def _square(value):
    a = np.asarray(value, dtype=float)
    if a.ndim == 1:
        k = math.isqrt(a.size)
        if k * k != a.size:
            raise ConfigError(f"field: {a.size} matrix entries is not a square")
        a = a.reshape(k, k)
    return a


def parse_field(spec: str, p: float) -> Field:
    """Catalog call, e.g. ``linear(A=[1,0,0,1])``. ``singular`` takes ``p`` from the
    functional unless given."""
    try:
        node = ast.parse(spec.strip(), mode="eval").body
    except SyntaxError:
        raise ConfigError(f"field: cannot parse {spec!r}") from None
    if isinstance(node, ast.Name):
        name, args, kwargs = node.id, [], {}
    elif isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        name = node.func.id
        try:
            args = [ast.literal_eval(a) for a in node.args]
            kwargs = {k.arg: ast.literal_eval(k.value) for k in node.keywords}
        except ValueError:
            raise ConfigError(f"field: arguments must be literals in {spec!r}") from None
    else:
        raise ConfigError(f"field: expected a catalog call, got {spec!r}")
    if name not in CATALOG:
        raise ConfigError(f"field: unknown catalog entry {name!r}; known: {sorted(CATALOG)}")
    for key in ("A", "A_skew"):
        if key in kwargs:
            kwargs[key] = _square(kwargs[key])
    if name in ("linear", "rigid", "affine") and args:
        args[0] = _square(args[0])
    if name == "singular" and len(args) < 2 and "p" not in kwargs:
        kwargs["p"] = p
    try:
        return CATALOG[name](*args, **kwargs)
    except TypeError as err:
        raise ConfigError(f"field: {err}") from None


# ---------------------------------------------------------------------------
# experiment config


class Experiment:
    """Typed view of a resolved flat config."""

    def __init__(self, raw: dict, threads: int | None = None):
        self.raw = dict(raw)
        self.threads = threads
        g = self.raw.get
        self.seed = _int(g("seed"), "seed")
        self.p = _float(g("functional.p"), "functional.p")
        self.variant = g("functional.variant")

    # hashing -----------------------------------------------------------
    def hash(self) -> str:
        body = "".join(f"{k}={v}\n" for k, v in sorted(self.raw.items()) if k not in _UNHASHED)
        return hashlib.sha256(body.encode()).hexdigest()[:16]

    def header(self) -> str:
        return f"# gbmo {__version__} config_hash={self.hash()} seed={self.seed}"

    @property
    def out_dir(self) -> Path:
        return Path(self.raw["output.dir"])

    # builders ----------------------------------------------------------
    def ambient(self) -> Box:
        lo = _floats(self.raw["ambient.lo"], "ambient.lo")
        hi = _floats(self.raw["ambient.hi"], "ambient.hi")
        return Box(lo, hi)

    def quadrature(self) -> QuadratureRule:
        r = self.raw
        return QuadratureRule(_int(r["quadrature.order"], "quadrature.order"),
                              _int(r["quadrature.ball_samples"], "quadrature.ball_samples"),
                              _int(r["quadrature.adaptive_depth"], "quadrature.adaptive_depth"),
                              _int(r["quadrature.split"], "quadrature.split"))

    def reference(self, n: int) -> ReferenceCell:
        shape, side = self.raw["cell.shape"], self.raw["cell.side"]
        if shape == "cube":
            if _float(side, "cell.side") != 1.0:
                raise ConfigError("cell.side must be 1 for cell.shape = cube; use box")
            return ReferenceCell.cube(n)
        if shape == "box":
            sides = _floats(side, "cell.side")
            if len(sides) == 1:
                sides = sides * n
            if len(sides) != n:
                raise ConfigError(f"cell.side needs {n} entries for a box")
            return ReferenceCell.box(sides)
        if shape == "ball":
            return ReferenceCell.ball(n, _float(side, "cell.side") / 2)
        raise ConfigError(f"cell.shape must be cube, box or ball, got {shape!r}")

    def group(self, n: int) -> RotationGroup:
        kind = self.raw["group.kind"]
        seed = self.raw["group.seed"]
        seed = self.seed if seed == "" else _int(seed, "group.seed")
        if kind == "trivial":
            return RotationGroup.trivial(n)
        if kind == "sampled_SOn":
            return RotationGroup.sampled_SOn(n, _int(self.raw["group.count"], "group.count"), seed)
        if kind == "finite":
            if n != 2:
                raise ConfigError("group.kind = finite takes angles and needs n = 2")
            angles = _floats(self.raw["group.angles"] or "0", "group.angles")
            return RotationGroup.finite([rotation_2d(math.radians(a)) for a in angles])
        raise ConfigError(f"group.kind must be trivial, sampled_SOn or finite, got {kind!r}")

    def functional(self, m: int) -> CoreFunctional:
        r = self.raw
        solver = SolverConfig(_float(r["functional.solver.tol"], "functional.solver.tol"),
                              _int(r["functional.solver.max_iters"], "functional.solver.max_iters"),
                              _float(r["functional.solver.p1_smoothing"],
                                     "functional.solver.p1_smoothing"))
        S = None
        if r["functional.S"].strip():
            S = [_floats(v, "functional.S") for v in r["functional.S"].split(";") if v.strip()]
        return CoreFunctional(self.variant, self.p, m, S, solver)

    def field(self) -> Field:
        return parse_field(self.raw["field"], self.p)

    def packing(self, n: int) -> PackingConfig:
        r = self.raw
        return PackingConfig(self.reference(n), self.group(n),
                             _int(r["packing.offsets"], "packing.offsets"),
                             _bool(r["packing.greedy"], "packing.greedy"),
                             self.quadrature(), self.threads)

    def epsilons(self) -> list:
        return parse_epsilons(self.raw["epsilons"])

    def setup(self):
        """Field, ambient box, functional and packing config, checked for consistency."""
        u = self.field()
        ambient = self.ambient()
        if ambient.n != u.n:
            raise ConfigError(f"ambient box has dimension {ambient.n}, field has n={u.n}")
        return u, ambient, self.functional(u.m), self.packing(u.n)


# ---------------------------------------------------------------------------
# output


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path: Path, header: str, columns, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else fmt(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(path: Path, exp: Experiment, payload: dict):
    """JSON cannot hold comments, so the header line is stored under the key ``#``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    body = {"#": exp.header()[2:], **_jsonable(payload)}
    path.write_text(json.dumps(body, indent=2) + "\n")


def _log(msg: str):
    print(msg, file=sys.stderr, flush=True)


# ---------------------------------------------------------------------------
# commands


def cmd_psi(exp: Experiment) -> int:
    r = exp.raw
    shape = tuple(int(v) for v in _floats(r["psi.shape"], "psi.shape")) if r["psi.shape"] else None
    if shape is not None and len(shape) != 2:
        raise ConfigError("psi.shape must be 'm,n'")
    mats = [parse_matrix(t, shape) for t in r["psi.matrix"].split(";") if t.strip()]
    if not mats:
        raise ConfigError("psi.matrix is empty")
    m, n = mats[0].shape
    if any(A.shape != (m, n) for A in mats):
        raise ConfigError("all psi matrices must share one shape")
    F = exp.functional(m)
    ev = PsiEvaluator(F, exp.reference(n), exp.group(n), r["psi.mode"])
    rows = []
    for A in mats:
        rows.append([F.variant, F.p, ev.mode, ",".join(fmt(v) for v in A.ravel()), ev(A)])
    path = exp.out_dir / "psi.csv"
    write_csv(path, exp.header(), ["variant", "p", "mode", "matrix", "psi_value"], rows)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["variant", "p", "mode", "matrix", "psi_value"])
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return EXIT_OK


SWEEP_COLUMNS = ["epsilon", "value", "coverage", "family_id", "cells", "seconds"]


def _run_sweep(exp: Experiment, u, ambient, F, cfg):
    r = exp.raw

    def log(row):
        _log(f"eps={fmt(row.epsilon)} value={row.value:.6g} cells={row.cells} "
             f"family={row.family_id} coverage={row.coverage:.4f} {row.seconds:.2f}s")

    return sweep(F, u, ambient, exp.epsilons(), cfg, _int(r["sweep.k_fit"], "sweep.k_fit"),
                 _float(r["sweep.slope_max"], "sweep.slope_max"),
                 _float(r["sweep.growth"], "sweep.growth"), log)


def _write_sweep(exp: Experiment, result, stem: str) -> Path:
    path = exp.out_dir / f"{stem}.csv"
    write_csv(path, exp.header(), SWEEP_COLUMNS,
              [[row.epsilon, row.value, row.coverage, row.family_id, row.cells, row.seconds]
               for row in result.rows])
    write_json(exp.out_dir / f"{stem}.json", exp, {
        "rows": [dict(zip(SWEEP_COLUMNS, (row.epsilon, row.value, row.coverage, row.family_id,
                                          row.cells, row.seconds))) for row in result.rows],
        "extrapolated_limit": result.limit_or_flag(),
        "loglog_slope": result.loglog_slope,
        "k_fit": result.k_fit,
    })
    return path


def _verdict_payload(verdict: Verdict, csv_path: Path) -> dict:
    d = verdict.as_dict(csv_path.name)
    d["fitted_rate"] = verdict.fitted_rate
    return d


def cmd_sweep(exp: Experiment) -> int:
    u, ambient, F, cfg = exp.setup()
    result = _run_sweep(exp, u, ambient, F, cfg)
    path = _write_sweep(exp, result, "sweep")
    verdict = verdict_from_sweep(F, u, ambient, result, cfg,
                                 _float(exp.raw["verdict.zero_tol"], "verdict.zero_tol"),
                                 _float(exp.raw["verdict.plateau"], "verdict.plateau"))
    write_json(exp.out_dir / "verdict.json", exp, _verdict_payload(verdict, path))
    print(f"{verdict.kind} {fmt(verdict.value)}")
    return EXIT_OK


def cmd_characterize(exp: Experiment) -> int:
    """Sweep plus a verdict of the requested kind, the null space and, when
    divergent, the fitted exponent."""
    mode = exp.raw["characterize.mode"]
    if mode not in ("auto", "membership", "constancy"):
        raise ConfigError("characterize.mode must be auto, membership or constancy")
    u, ambient, F, cfg = exp.setup()
    result = _run_sweep(exp, u, ambient, F, cfg)
    path = _write_sweep(exp, result, "characterize_sweep")
    plateau = _float(exp.raw["verdict.plateau"], "verdict.plateau")
    zero_tol = _float(exp.raw["verdict.zero_tol"], "verdict.zero_tol")
    ev = PsiEvaluator(F, cfg.reference, cfg.group)
    report = estimate_null_space(ev, seed=exp.seed)
    if mode == "membership":
        verdict = membership_indicator(result, F.p, u.n, plateau)
    else:
        verdict = verdict_from_sweep(F, u, ambient, result, cfg, zero_tol, plateau)
    if mode == "constancy" and verdict.rigid_fit is None:
        verdict.rigid_fit = fit_null_affine(u, ambient, report.null_basis)
    payload = _verdict_payload(verdict, path)
    payload["null_dim"] = report.null_dim
    payload["norm_constant"] = report.min_on_unit_sphere
    if result.divergent:
        payload["divergence_exponent"] = divergence_exponent(result)
    write_json(exp.out_dir / "characterize.json", exp, payload)
    print(f"{verdict.kind} {fmt(verdict.value)}")
    return EXIT_OK


def cmd_check(exp: Experiment) -> int:
    r = exp.raw
    tol = _float(r["check.tol"], "check.tol")
    n = len(_floats(r["ambient.lo"], "ambient.lo"))
    m = n if not r["functional.S"].strip() else len(
        _floats(r["functional.S"].split(";")[0], "functional.S"))
    F = exp.functional(m)
    ref = exp.reference(n)
    axioms = check_core_axioms(F, _int(r["check.trials"], "check.trials"), exp.seed, n, ref,
                               exp.quadrature())
    group = exp.group(n) if F.admits_rotations else RotationGroup.trivial(n)
    props = psi_property_check(PsiEvaluator(F, ref, group),
                               _int(r["check.psi_trials"], "check.psi_trials"), exp.seed)
    rows, ok = [], True
    for suite, rep in (("axioms", axioms), ("psi", props)):
        limit = tol + rep.bias_bound
        for key in sorted(rep.violations):
            v = rep.violations[key]
            good = v <= limit
            ok &= good
            rows.append([suite, key, float(v), limit, "pass" if good else "FAIL"])
    rows.append(["axioms", "gb_ratio", float(axioms.gb_ratio), "", "info"])
    rows.append(["psi", "lipschitz_ratio", float(props.lipschitz_ratio), "", "info"])
    write_csv(exp.out_dir / "check.csv", exp.header(),
              ["suite", "property", "violation", "tolerance", "status"], rows)
    for row in rows:
        print(",".join(fmt(v) for v in row))
    return EXIT_OK if ok else EXIT_TOL


def cmd_gamma(exp: Experiment) -> int:
    r = exp.raw
    n = _int(r["gamma.n"], "gamma.n")
    samples = _int(r["gamma.samples"], "gamma.samples")
    rows = [[n, p, gamma_np(n, p, samples, exp.seed)] for p in _floats(r["gamma.p"], "gamma.p")]
    write_csv(exp.out_dir / "gamma.csv", exp.header(), ["n", "p", "gamma"], rows)
    for row in rows:
        print(",".join(fmt(v) for v in row))
    return EXIT_OK


COMMANDS = {
    "psi": cmd_psi,
    "sweep": cmd_sweep,
    "check": cmd_check,
    "gamma": cmd_gamma,
    "characterize": cmd_characterize,
}

# convenience flags: (flag, config key, help)
_FLAGS = {
    "psi": [("--variant", "functional.variant", "functional variant"),
            ("--p", "functional.p", "exponent p"),
            ("--cell", "cell.shape", "cube, box or ball"),
            ("--matrix", "psi.matrix", "row-major comma list; ';' separates matrices"),
            ("--mode", "psi.mode", "auto, closed_form, generic or iso_eigen"),
            ("--group", "group.kind", "trivial, sampled_SOn or finite")],
    "sweep": [("--variant", "functional.variant", "functional variant"),
              ("--p", "functional.p", "exponent p"),
              ("--field", "field", "catalog field, e.g. 'singular(delta=1)'"),
              ("--epsilons", "epsilons", "e.g. '1/8,1/16' or 'dyadic(8,64)'")],
    "check": [("--variant", "functional.variant", "functional variant"),
              ("--p", "functional.p", "exponent p"),
              ("--tol", "check.tol", "violation tolerance")],
    "gamma": [("--n", "gamma.n", "dimension"),
              ("--p", "gamma.p", "comma list of exponents")],
    "characterize": [("--variant", "functional.variant", "functional variant"),
                     ("--p", "functional.p", "exponent p"),
                     ("--field", "field", "catalog field"),
                     ("--epsilons", "epsilons", "epsilon list"),
                     ("--mode", "characterize.mode", "auto, membership or constancy")],
}


_SUMMARY = {
    "psi": "evaluate the limit integrand at one or more matrices",
    "sweep": "seminorm lower bounds along an epsilon list, with a verdict",
    "check": "numerical checks of the functional axioms and integrand properties",
    "gamma": "the largest directional p-th moment of the unit cube",
    "characterize": "sweep plus a membership or constancy verdict and the null space",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value config file")
    common.add_argument("--out", metavar="DIR", help="output directory (output.dir)")
    common.add_argument("--threads", type=int, metavar="N",
                        help="worker threads (default: available cores)")
    common.add_argument("--seed", type=int, metavar="N", help="random seed (seed)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key; repeatable")
    parser = argparse.ArgumentParser(prog="gbmo", description="Generalized BMO-type seminorms and their limits.")
    parser.add_argument("--version", action="version", version=f"gbmo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in COMMANDS.items():
        sp = sub.add_parser(name, parents=[common], help=_SUMMARY[name], description=_SUMMARY[name])
        for flag, key, help_ in _FLAGS[name]:
            sp.add_argument(flag, dest=f"flag:{key}", metavar="VALUE", help=f"{help_} ({key})")
    return parser


def resolve_config(args) -> dict:
    raw = dict(DEFAULTS)
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as err:
            raise ConfigError(f"cannot read config: {err}") from None
        raw.update(parse_config_text(text, args.config))
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        _check_key(key, "--set")
        raw[key] = value
    for dest, value in vars(args).items():
        if dest.startswith("flag:") and value is not None:
            raw[dest[5:]] = value
    if args.out is not None:
        raw["output.dir"] = args.out
    if args.seed is not None:
        raw["seed"] = str(args.seed)
    return raw


def _exit_code(err: BaseException) -> int:
    if isinstance(err, (NumericError, SolverError, StructureError)):
        return EXIT_NUMERIC
    if isinstance(err, (ParameterError, ShapeError, DomainError)):
        return EXIT_USAGE
    return EXIT_NUMERIC


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.threads is not None and args.threads < 1:
        _log("error: --threads must be >= 1")
        return EXIT_USAGE
    try:
        exp = Experiment(resolve_config(args), args.threads)
        return COMMANDS[args.command](exp)
    except GBMOError as err:
        eps = getattr(err, "epsilon", None)
        where = f" at epsilon={fmt(eps)}" if eps is not None else ""
        _log(f"error{where}: {type(err).__name__}: {err}")
        return _exit_code(err)
    except (FloatingPointError, np.linalg.LinAlgError) as err:
        eps = getattr(err, "epsilon", None)
        where = f" at epsilon={fmt(eps)}" if eps is not None else ""
        _log(f"numeric error{where}: {err}")
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
