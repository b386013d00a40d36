"""Command-line front end.

Verbs: ``simulate``, ``extrapolate``, ``phenomena``, ``sweep``, ``dump``.
Results go to stdout (or ``--out``); diagnostics go to stderr.

Exit codes: 0 success, 1 usage or schema error, 2 infeasible data or a
failed phenomenon tag, 3 solver failure.
"""

from __future__ import annotations

import argparse
import ast
import copy
import csv
import io
import json
import math
import operator
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import jsonschema
import numpy as np

from qextrap import generators
from qextrap.cones import TimeStructure
from qextrap.extrapolation import (
    CERTAINTY_WIDTH,
    ExtrapolationProblem,
    certainty_scan,
    fit_model,
    knightian_inner_check,
    selftest_diagnostics,
    solve_interval,
)
from qextrap.quantum import (
    Average,
    Hard,
    NoisyDataset,
    Realization,
    RealizationError,
    Soft,
    simulate_datapoint,
    simulate_timeline,
)
from qextrap.relaxations import RelaxationError, RelaxationSpec
from qextrap.solver import Tolerances, dump_standard_form

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_SOLVER = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, msg: str, code: int = EXIT_USAGE):
        super().__init__(msg)
        self.code = code


# ------------------------------------------------------------ expressions

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_NAMES = {"pi": math.pi, "e": math.e}
_FUNCS = {"sqrt": math.sqrt, "sin": math.sin, "cos": math.cos}


def parse_number(v) -> float:
    """A real from a JSON number or an arithmetic string such as ``"3*pi/2"``."""
    if isinstance(v, bool):
        raise ValueError("booleans are not numbers")
    if isinstance(v, (int, float)):
        return float(v)
    if not isinstance(v, str):
        raise ValueError(f"cannot read a number from {v!r}")

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](ev(node.operand))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS and len(node.args) == 1:
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ValueError(f"unsupported expression {v!r}")

    try:
        return float(ev(ast.parse(v.strip(), mode="eval")))
    except SyntaxError as exc:
        raise ValueError(f"bad expression {v!r}") from exc


def parse_list(text: str) -> list:
    text = text.strip()
    if not text:
        return []
    return [parse_number(s) for s in text.split(",") if s.strip()]


# ---------------------------------------------------------------- schemas

_NUM = {"oneOf": [{"type": "number"}, {"type": "string"}]}
_COMPLEX = {"oneOf": [{"type": "number"}, {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}]}
_CMATRIX = {"type": "array", "minItems": 1, "items": {"type": "array", "minItems": 1, "items": _COMPLEX}}

REALIZATION_SCHEMA = {
    "type": "object",
    "required": ["hamiltonian", "povms"],
    "oneOf": [{"required": ["state"]}, {"required": ["density"]}],
    "additionalProperties": False,
    "properties": {
        "label": {"type": "string"},
        "state": {"type": "array", "minItems": 1, "items": _COMPLEX},
        "density": _CMATRIX,
        "hamiltonian": _CMATRIX,
        "povms": {"type": "array", "minItems": 1, "items": {"type": "array", "minItems": 1, "items": _CMATRIX}},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["scenario", "times", "data", "constraint", "target"],
    "additionalProperties": False,
    "properties": {
        "scenario": {
            "type": "object",
            "required": ["settings", "outcomes"],
            "additionalProperties": False,
            "properties": {"settings": {"type": "integer", "minimum": 1}, "outcomes": {"type": "integer", "minimum": 1}},
        },
        "times": {
            "type": "object",
            "oneOf": [{"required": ["values"]}, {"required": ["lattice"]}, {"required": ["structure"]}],
            "additionalProperties": False,
            "properties": {
                "values": {"type": "array", "items": _NUM},
                "lattice": {
                    "type": "object",
                    "required": ["step", "indices"],
                    "additionalProperties": False,
                    "properties": {"step": _NUM, "indices": {"type": "array", "items": {"type": "integer"}}, "offset": _NUM},
                },
                "structure": {
                    "type": "object",
                    "required": ["generators", "coeffs"],
                    "additionalProperties": False,
                    "properties": {
                        "generators": {"type": "array", "minItems": 1, "items": _NUM},
                        "coeffs": {"type": "array", "items": {"type": "array", "items": {"type": "integer"}}},
                        "offset": _NUM,
                    },
                },
            },
        },
        "data": {
            "type": "object",
            "required": ["estimates", "delta"],
            "additionalProperties": False,
            "properties": {
                "estimates": {"type": "array", "items": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}},
                "delta": {"oneOf": [{"type": "number", "minimum": 0}, {"type": "array", "items": {"type": "array", "items": {"type": "number", "minimum": 0}}}]},
            },
        },
        "constraint": {
            "type": "object",
            "required": ["type"],
            "additionalProperties": False,
            "properties": {
                "type": {"enum": ["hard", "soft", "average"]},
                "E_plus": {"type": "number", "exclusiveMinimum": 0},
                "epsilon": {"type": "number", "minimum": 0, "maximum": 1},
                "E_bar": {"type": "number", "minimum": 0},
            },
        },
        "relaxation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "m": {"type": "integer", "minimum": 1},
                "moment_order": {"type": "integer", "minimum": 0},
                "decay_model": {"enum": ["auto", "equal_diag", "toeplitz", "moment"]},
                "E_plus": {"type": "number", "exclusiveMinimum": 0},
                "energies": {"type": "array", "minItems": 1, "items": _NUM},
                "formulation": {"enum": ["auto", "gram", "grid"]},
            },
        },
        "target": {
            "type": "object",
            "required": ["tau"],
            "additionalProperties": False,
            "properties": {
                "tau": _NUM,
                "tau_coeffs": {"type": "array", "items": {"type": "integer"}},
                "objective": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "backend": {"type": "string"},
                "tolerances": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"primal": {"type": "number"}, "dual": {"type": "number"}, "gap": {"type": "number"}},
                },
            },
        },
    },
}


def _validate(doc, schema, what: str):
    v = jsonschema.Draft202012Validator(schema)
    errs = sorted(v.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errs:
        lines = [f"{what}: /{'/'.join(str(p) for p in e.absolute_path)}: {e.message}" for e in errs[:10]]
        raise CliError("\n".join(lines))


# ------------------------------------------------------------ realization I/O


def _cnum(v) -> complex:
    return complex(v[0], v[1]) if isinstance(v, list) else complex(v)


def _cmat(rows) -> np.ndarray:
    return np.array([[_cnum(v) for v in row] for row in rows], dtype=complex)


def _enc(z: complex):
    z = complex(z)
    return [z.real, z.imag]


def _enc_mat(m: np.ndarray) -> list:
    return [[_enc(v) for v in row] for row in np.asarray(m)]


def realization_from_json(doc: dict) -> Realization:
    _validate(doc, REALIZATION_SCHEMA, "realization")
    state = np.array([_cnum(v) for v in doc["state"]]) if "state" in doc else _cmat(doc["density"])
    try:
        return Realization(
            state,
            _cmat(doc["hamiltonian"]),
            [[_cmat(m) for m in row] for row in doc["povms"]],
            label=doc.get("label", ""),
        )
    except (RealizationError, ValueError) as exc:
        raise CliError(f"realization: {exc}") from exc


def realization_to_json(r: Realization) -> dict:
    key, state = ("state", [_enc(v) for v in r.pure_vector()]) if r.is_pure else ("density", _enc_mat(r.state))
    return {
        "label": r.label,
        key: state,
        "hamiltonian": _enc_mat(r.hamiltonian),
        "povms": [[_enc_mat(m) for m in row] for row in r.povms],
    }


def dataset_csv(r: Realization, times) -> str:
    """Rows ``t, x, a, p`` with 1-based setting and outcome labels."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "x", "a", "p"])
    t = np.asarray(times, dtype=float)
    if t.size:
        probs = simulate_timeline(r, t)
        for j, tj in enumerate(t):
            for x in range(r.settings):
                for a in range(r.outcomes):
                    w.writerow([repr(float(tj)), x + 1, a + 1, repr(float(np.clip(probs[j, x, a], 0.0, 1.0)))])
    return buf.getvalue()


# ---------------------------------------------------------------- configs


@dataclass
class ScenarioConfig:
    doc: dict

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        _validate(doc, CONFIG_SCHEMA, "config")
        cfg = cls(copy.deepcopy(doc))
        cfg.problem()  # semantic checks
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CliError(f"config: invalid JSON: {exc}") from exc
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.doc)

    def to_json(self) -> str:
        return json.dumps(self.doc, indent=2, sort_keys=True)

    def __eq__(self, other):
        return isinstance(other, ScenarioConfig) and self.to_json() == other.to_json()

    # -- derived objects

    @property
    def shape(self) -> tuple[int, int]:
        s = self.doc["scenario"]
        return s["settings"], s["outcomes"]

    def structure(self) -> Optional[TimeStructure]:
        t = self.doc["times"]
        if "lattice" in t:
            lt = t["lattice"]
            return TimeStructure.lattice(parse_number(lt["step"]), lt["indices"], parse_number(lt.get("offset", 0.0)))
        if "structure" in t:
            s = t["structure"]
            gens = [parse_number(g) for g in s["generators"]]
            coeffs = s["coeffs"] if s["coeffs"] else np.zeros((0, len(gens)), dtype=int)
            return TimeStructure(gens, coeffs, parse_number(s.get("offset", 0.0)))
        return None

    def times(self) -> np.ndarray:
        st = self.structure()
        if st is not None:
            return st.times()
        return np.array([parse_number(v) for v in self.doc["times"]["values"]], dtype=float)

    def tau(self) -> float:
        return parse_number(self.doc["target"]["tau"])

    def model_structure(self) -> Optional[TimeStructure]:
        """Structure of the data times followed by tau."""
        st = self.structure()
        if st is None:
            return None
        tg = self.doc["target"]
        if "tau_coeffs" in tg:
            row = np.asarray(tg["tau_coeffs"], dtype=int)
            ext = st.extend(row)
            if abs(ext.times()[-1] - self.tau()) > 1e-9 * max(1.0, abs(self.tau())):
                raise CliError("target: tau_coeffs do not reproduce tau")
            return ext
        if st.n != 1:
            raise CliError("target: tau_coeffs are required for multi-generator time structures")
        try:
            return st.extend(st.locate(self.tau()))
        except ValueError as exc:
            raise CliError(f"target: tau is not on the time lattice ({exc}); extend the generators") from exc

    def constraint(self):
        c = self.doc["constraint"]
        need = {"hard": ["E_plus"], "soft": ["E_plus", "epsilon"], "average": ["E_bar"]}[c["type"]]
        missing = [k for k in need if k not in c]
        if missing:
            raise CliError(f"config: /constraint: missing {', '.join(missing)} for type {c['type']!r}")
        if c["type"] == "hard":
            return Hard(c["E_plus"])
        if c["type"] == "soft":
            return Soft(c["E_plus"], c["epsilon"])
        return Average(c["E_bar"])

    def noisy_dataset(self) -> NoisyDataset:
        X, A = self.shape
        t = self.times()
        est = np.asarray(self.doc["data"]["estimates"], dtype=float)
        if est.size == 0:
            est = est.reshape(0, X, A)
        if est.shape != (t.size, X, A):
            raise CliError(f"config: /data/estimates: shape {est.shape} does not match (times, settings, outcomes) = {(t.size, X, A)}")
        delta = np.asarray(self.doc["data"]["delta"], dtype=float)
        if delta.ndim and delta.shape != (t.size, X):
            raise CliError(f"config: /data/delta: shape {delta.shape} does not match (times, settings) = {(t.size, X)}")
        try:
            return NoisyDataset(t, est, delta)
        except ValueError as exc:
            raise CliError(f"config: /data: {exc}") from exc

    def objective(self) -> Optional[np.ndarray]:
        f = self.doc["target"].get("objective")
        if f is None:
            return None
        f = np.asarray(f, dtype=float)
        if f.shape != self.shape:
            raise CliError(f"config: /target/objective: shape {f.shape} does not match (settings, outcomes) = {self.shape}")
        return f

    def relaxation(self, m: Optional[int] = None, k: Optional[int] = None) -> RelaxationSpec:
        r = self.doc.get("relaxation", {})
        decay = r.get("decay_model", "auto")
        structure = None
        if self.doc["constraint"]["type"] == "soft":
            structure = self.model_structure()
            if structure is None and decay != "equal_diag":
                print("warning: raw float times cannot be checked for congruences; using decay_model equal_diag", file=sys.stderr)
                decay = "equal_diag"
        energies = r.get("energies")
        return RelaxationSpec(
            self.constraint(),
            m=m if m is not None else r.get("m", 16),
            k=k if k is not None else r.get("moment_order"),
            energies=tuple(parse_number(e) for e in energies) if energies else None,
            decay=decay,
            structure=structure,
            E_plus=r.get("E_plus"),
            formulation=r.get("formulation", "auto"),
        )

    def tolerances(self) -> Optional[Tolerances]:
        t = self.doc.get("solver", {}).get("tolerances")
        if not t:
            return None
        d = Tolerances()
        return Tolerances(t.get("primal", d.primal), t.get("dual", d.dual), t.get("gap", d.gap))

    def backend(self) -> Optional[str]:
        return self.doc.get("solver", {}).get("backend")

    def problem(self, m=None, k=None, tau=None, delta=None) -> ExtrapolationProblem:
        nd = self.noisy_dataset()
        if delta is not None:
            nd = NoisyDataset(nd.times, nd.estimates, np.full(nd.delta.shape, float(delta)))
        return ExtrapolationProblem(nd, self.tau() if tau is None else tau, self.relaxation(m, k), self.objective())


def load_config(path: str) -> ScenarioConfig:
    try:
        with open(path) as fh:
            return ScenarioConfig.from_json(fh.read())
    except OSError as exc:
        raise CliError(f"cannot read config {path!r}: {exc}") from exc


# ---------------------------------------------------------------- output


def _emit(text: str, out: Optional[str]):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _clean_stats(rec: dict) -> dict:
    """Drop timings so that identical runs give identical files."""
    drop = {"wall_time", "solve_time"}

    def walk(v):
        if isinstance(v, dict):
            return {k: walk(x) for k, x in v.items() if k not in drop}
        if isinstance(v, list):
            return [walk(x) for x in v]
        if isinstance(v, float) and not math.isfinite(v):
            return None
        if isinstance(v, (np.floating, np.integer)):
            return walk(v.item())
        return v

    return walk(rec)


def _status_code(status: str) -> int:
    if status == "optimal":
        return EXIT_OK
    if status == "infeasible":
        return EXIT_INFEASIBLE
    return EXIT_SOLVER


def _solve_kwargs(args, cfg: Optional[ScenarioConfig]) -> dict:
    tol = cfg.tolerances() if cfg else None
    if args.tol is not None:
        tol = Tolerances(args.tol, args.tol, args.tol)
    backend = args.backend or (cfg.backend() if cfg else None)
    return {"backend": backend, "tol": tol, "threads": args.threads}


# ---------------------------------------------------------------- commands


def _suite_realization(label: str, params: dict, which: Optional[str]) -> Realization:
    reals = [r for s in generators.registry(label, **params) for r in s.realizations]
    if not reals:
        raise CliError(f"suite {label!r} has no realizations")
    if which is None:
        return reals[0]
    if which.isdigit():
        i = int(which)
        if i >= len(reals):
            raise CliError(f"suite {label!r} has {len(reals)} realizations")
        return reals[i]
    for r in reals:
        if r.label == which:
            return r
    raise CliError(f"no realization labelled {which!r}; available: {[r.label for r in reals]}")


def _params(items) -> dict:
    out = {}
    for it in items or []:
        if "=" not in it:
            raise CliError(f"parameter {it!r} must look like key=value")
        k, v = it.split("=", 1)
        if "," in v:
            out[k] = tuple(parse_list(v))
        else:
            val = parse_number(v)
            out[k] = int(val) if val.is_integer() and "." not in v and "pi" not in v else val
    return out


def cmd_simulate(args) -> int:
    if args.realization:
        try:
            with open(args.realization) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read realization {args.realization!r}: {exc}") from exc
        r = realization_from_json(doc)
    elif args.suite:
        r = _suite_realization(args.suite, _params(args.param), args.which)
    else:
        raise CliError("simulate needs --realization FILE or --suite LABEL")
    _emit(dataset_csv(r, parse_list(args.times)), args.out)
    return EXIT_OK


def cmd_extrapolate(args) -> int:
    cfg = load_config(args.config)
    p = cfg.problem()
    kw = _solve_kwargs(args, cfg)
    if p.objective is None:
        rep = certainty_scan(p, args.threshold, **kw)
        rec = {"kind": "certainty", **rep.as_record()}
        status = "optimal"
    else:
        iv = solve_interval(p, **kw)
        rec = {"kind": "interval", **iv.as_record()}
        status = iv.status
    if status == "infeasible":
        print("no member of the relaxation fits the data", file=sys.stderr)
    _emit(json.dumps(_clean_stats(rec), indent=2, sort_keys=True) + "\n", args.out)
    return _status_code(status)


def _check_suite(suite, m: int, kw: dict, threshold: float) -> list:
    rows = []
    nd = suite.noisy_dataset
    for mk in suite.tau_markers:
        if mk.kind == "knightian":
            v = knightian_inner_check(suite.realizations, nd, mk.tau, [mk.setting])
            rows.append({"suite": suite.label, "tag": "knightian", "tau": mk.tau, "setting": mk.setting + 1, "pass": v.passed, "fitting": list(v.used)})
        elif mk.kind == "value":
            r = suite.realizations[mk.realization or 0]
            got = simulate_datapoint(r, mk.setting, mk.tau)
            ok = bool(np.max(np.abs(got - mk.value)) <= 1e-9)
            rows.append({"suite": suite.label, "tag": "value", "tau": mk.tau, "setting": mk.setting + 1, "pass": ok, "value": got.tolist()})
        elif mk.kind == "certainty":
            spec = RelaxationSpec(suite.constraint, m=m)
            p = ExtrapolationProblem(nd, mk.tau, spec)
            rep = certainty_scan(p, threshold, **kw)
            lo = rep.Q - rep.widths / 2
            hi = rep.Q + rep.widths / 2
            target = np.asarray(mk.value)
            contains = bool(np.all(lo[mk.setting] - 1e-6 <= target) and np.all(target <= hi[mk.setting] + 1e-6))
            certain = bool(np.all(rep.widths[mk.setting] <= threshold))
            rows.append(
                {
                    "suite": suite.label,
                    "tag": "certainty",
                    "tau": mk.tau,
                    "setting": mk.setting + 1,
                    "m": m,
                    "pass": contains and certain,
                    "contains_expected": contains,
                    "widths": rep.widths[mk.setting].tolist(),
                    "classification": rep.tag,
                }
            )
    if suite.label == "D":
        N, Ep = suite.params["N"], suite.params["E_plus"]
        st = selftest_diagnostics(suite.realizations[0], N, Ep, 0.0)
        rows.append(
            {
                "suite": suite.label,
                "tag": "selftest",
                "pass": bool(st.window_weight >= 1 - 1e-9 and np.all(st.overlaps <= 1e-9)),
                "overlaps": st.overlaps.tolist(),
                "window_weight": st.window_weight,
            }
        )
    return rows


def cmd_phenomena(args) -> int:
    try:
        suites = generators.registry(args.label, **_params(args.param))
    except KeyError as exc:
        raise CliError(str(exc.args[0])) from exc
    kw = _solve_kwargs(args, None)
    rows = [row for s in suites for row in _check_suite(s, args.m, kw, args.threshold)]
    for row in rows:
        print(f"{'PASS' if row['pass'] else 'FAIL'} {row['suite']} {row['tag']}", file=sys.stderr)
    _emit(json.dumps(_clean_stats({"label": args.label, "checks": rows}), indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK if all(r["pass"] for r in rows) else EXIT_INFEASIBLE


SWEEP_AXES = ("m", "k", "tau", "delta")


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if args.axis not in SWEEP_AXES:
        raise CliError(f"axis must be one of {SWEEP_AXES}")
    grid = parse_list(args.grid)
    if args.axis in ("m", "k"):
        grid = [int(round(g)) for g in grid]
    base = cfg.problem()
    if base.objective is None:
        raise CliError("sweep needs target.objective in the config")
    kw = _solve_kwargs(args, cfg)
    kw["threads"] = 1

    def one(v):
        try:
            p = cfg.problem(**{args.axis: v})
            iv = solve_interval(p, **kw)
            return [v, iv.mu_minus, iv.mu_plus, iv.width, iv.status]
        except (RelaxationError, ValueError) as exc:
            print(f"{args.axis}={v}: {exc}", file=sys.stderr)
            return [v, float("nan"), float("nan"), float("nan"), "error"]

    if args.threads > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            rows = list(pool.map(one, grid))
    else:
        rows = [one(v) for v in grid]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([args.axis, "mu_minus", "mu_plus", "width", "status"])
    for r in rows:
        w.writerow([repr(r[0]) if isinstance(r[0], float) else r[0]] + [repr(float(v)) for v in r[1:4]] + [r[4]])
    _emit(buf.getvalue(), args.out)
    codes = {_status_code(r[4]) if r[4] != "error" else EXIT_USAGE for r in rows}
    return max(codes) if codes else EXIT_OK


def cmd_dump(args) -> int:
    cfg = load_config(args.config)
    p = cfg.problem()
    h, prog, _ = fit_model(p)
    if p.objective is not None:
        c = np.zeros(prog.n_vars)
        lin = h.objective(p.objective)
        np.add.at(c, lin.idx, lin.val)
        prog = prog.with_objective(c, args.sense)
    _emit(dump_standard_form(prog), args.out)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qextrap", description="Extrapolate timed quantum measurement statistics under energy constraints.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the result here instead of stdout")
    common.add_argument("--backend", help="solver adapter (default: $QEXTRAP_BACKEND or clarabel)")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--tol", type=float, help="primal, dual and gap tolerance")
    sub = ap.add_subparsers(dest="verb", required=True)

    s = sub.add_parser("simulate", parents=[common], help="simulate a realization at given times (CSV t,x,a,p)")
    s.add_argument("--realization", help="realization JSON file")
    s.add_argument("--suite", help="registry label to take a realization from")
    s.add_argument("--param", action="append", help="suite parameter key=value")
    s.add_argument("--which", help="realization index or label within the suite")
    s.add_argument("--times", default="", help="comma-separated times, e.g. '0, pi'")
    s.set_defaults(fn=cmd_simulate)

    e = sub.add_parser("extrapolate", parents=[common], help="solve for the extrapolation interval")
    e.add_argument("--config", required=True)
    e.add_argument("--threshold", type=float, default=CERTAINTY_WIDTH)
    e.set_defaults(fn=cmd_extrapolate)

    ph = sub.add_parser("phenomena", parents=[common], help="check a suite's expected behaviour tags")
    ph.add_argument("label", choices=sorted(generators.REGISTRY))
    ph.add_argument("--param", action="append")
    ph.add_argument("--m", type=int, default=16)
    ph.add_argument("--threshold", type=float, default=CERTAINTY_WIDTH)
    ph.set_defaults(fn=cmd_phenomena)

    sw = sub.add_parser("sweep", parents=[common], help="repeat the extrapolation over a grid")
    sw.add_argument("--config", required=True)
    sw.add_argument("--axis", required=True, choices=SWEEP_AXES)
    sw.add_argument("--grid", required=True, help="comma-separated values")
    sw.set_defaults(fn=cmd_sweep)

    d = sub.add_parser("dump", parents=[common], help="write the standard-form program")
    d.add_argument("--config", required=True)
    d.add_argument("--sense", choices=("min", "max"), default="max")
    d.set_defaults(fn=cmd_dump)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    except (RelaxationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RuntimeError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
