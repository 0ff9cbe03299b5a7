"""Command-line front end.

Scalar commands (score, divergence, qfi, bound, coherence) emit one JSON
object; grid commands (simulate, advantage) emit CSV preceded by comment
lines carrying the library version and the config echo. ``replay`` re-runs
the echoed config of a results file and compares payloads exactly.

Exit codes: 0 success, 1 replay mismatch, 2 config or validation error,
3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import re
import sys
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import __version__
from .estimation import (Povm, bloch_rotation_family, circle_family, crmc_details, diagonal_qubit_family,
                         fisher_report, gell_mann_family)
from .exceptions import QScoreError, ValidationError
from .hermitian import EPS_FLOOR
from .scoring import (bregman_divergence, get_generator, petz_f_divergence, score_report, support_leak)
from .simulator import (CLASSICAL, ORACLE, PAULI_TOMOGRAPHY, ScalingRow, Strategy, default_trials,
                        estimate_risk, scaling_study)
from .states import (basis_by_name, bloch_to_density, coherence, dephase, fourier_state, make_density,
                     maximally_mixed, plus_state, von_neumann_entropy)

COMMANDS = ("score", "divergence", "qfi", "bound", "coherence", "simulate", "advantage")
CONFIG_PREFIX = "# qscore-config: "
VERSION_PREFIX = "# qscore-version: "

SIMULATE_COLUMNS = ("n", "strategy", "generator", "risk_mean", "risk_stderr", "trials", "clamp_events", "seed")
ADVANTAGE_COLUMNS = tuple(f.name for f in dataclasses.fields(ScalingRow))

_STRATEGY_ALIASES = {
    "classical": CLASSICAL, CLASSICAL: CLASSICAL,
    "tomography": PAULI_TOMOGRAPHY, "pauli": PAULI_TOMOGRAPHY, PAULI_TOMOGRAPHY: PAULI_TOMOGRAPHY,
    "oracle": ORACLE, ORACLE: ORACLE,
}


class ReplayMismatch(Exception):
    pass


@dataclass
class ExperimentConfig:
    command: str = "score"
    state: str = "plus"
    report: str = "mixed"
    generator: str = "log"
    basis: Optional[str] = None
    family: str = "bloch-rotation"
    theta: Optional[List[float]] = None
    n: int = 100
    trials: Optional[int] = None
    seed: int = 0
    eps_floor: float = EPS_FLOOR
    eps_est: Optional[float] = None
    alpha: float = 0.5
    bound_mode: str = "hessian"
    strategy: str = "classical"
    quantum: str = "tomography"
    dims: List[int] = field(default_factory=lambda: [2, 3, 4])
    ns: Optional[List[int]] = None
    out: Optional[str] = None
    jobs: int = 1

    # not part of the echo: they change where and how fast, never what
    RUNTIME_ONLY = ("out", "jobs")

    @classmethod
    def keys(cls) -> List[str]:
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ValidationError("config must be a JSON object")
        unknown = sorted(set(d) - set(cls.keys()))
        if unknown:
            raise ValidationError(f"unknown config key(s): {', '.join(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def echo(self) -> dict:
        return {k: v for k, v in dataclasses.asdict(self).items() if k not in self.RUNTIME_ONLY}

    def validate(self) -> None:
        def fail(name, msg):
            raise ValidationError(f"{name}: {msg}")

        def integer(name, lo, hi=None, allow_none=False):
            v = getattr(self, name)
            if v is None and allow_none:
                return
            if isinstance(v, bool) or not isinstance(v, int):
                fail(name, f"expected an integer, got {v!r}")
            if v < lo or (hi is not None and v > hi):
                fail(name, f"must lie in [{lo}, {hi if hi is not None else 'inf'}], got {v}")

        def real(name, lo, hi, allow_none=False, open_lo=False):
            v = getattr(self, name)
            if v is None and allow_none:
                return
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                fail(name, f"expected a finite number, got {v!r}")
            if v < lo or v > hi or (open_lo and v == lo):
                fail(name, f"must lie in {'(' if open_lo else '['}{lo}, {hi}], got {v}")
            setattr(self, name, float(v))

        if self.command not in COMMANDS:
            fail("command", f"expected one of {', '.join(COMMANDS)}, got {self.command!r}")
        for name in ("state", "report", "generator", "family"):
            if not isinstance(getattr(self, name), str):
                fail(name, "expected a string")
        if self.basis is not None and not isinstance(self.basis, str):
            fail("basis", "expected a string")
        integer("n", 1)
        integer("trials", 1, allow_none=True)
        integer("seed", 0, (1 << 64) - 1)
        integer("jobs", 1, 256)
        real("eps_floor", 0.0, 1e-2, open_lo=True)
        real("eps_est", 0.0, 0.999, allow_none=True)
        real("alpha", 0.0, 1e6, open_lo=True)
        if self.bound_mode not in ("hessian", "f2diag"):
            fail("bound_mode", f"expected hessian or f2diag, got {self.bound_mode!r}")
        for name in ("strategy", "quantum"):
            if self.__dict__[name] not in _STRATEGY_ALIASES:
                fail(name, f"expected classical, tomography or oracle, got {self.__dict__[name]!r}")
        if self.theta is not None:
            if not isinstance(self.theta, list) or not all(
                    isinstance(t, (int, float)) and not isinstance(t, bool) and math.isfinite(t) for t in self.theta):
                fail("theta", "expected a list of finite numbers")
            self.theta = [float(t) for t in self.theta]
        for name, lo, hi in (("dims", 2, 6), ("ns", 1, None)):
            v = getattr(self, name)
            if v is None and name == "ns":
                continue
            if not isinstance(v, list) or not v or not all(isinstance(x, int) and not isinstance(x, bool) for x in v):
                fail(name, "expected a non-empty list of integers")
            if any(x < lo or (hi is not None and x > hi) for x in v):
                fail(name, f"entries must lie in [{lo}, {hi if hi is not None else 'inf'}]")
        if self.ns is not None and self.ns != sorted(self.ns):
            fail("ns", "must be ascending")
        if self.out is not None and not isinstance(self.out, str):
            fail("out", "expected a path string")
        get_generator(self.generator)


_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"


def _numbers(text: str) -> List[float]:
    parts = [p.strip() for p in text.split(",")]
    if not all(re.fullmatch(_NUM, p) for p in parts):
        raise ValidationError(f"cannot parse numbers from {text!r}")
    return [float(p) for p in parts]


def parse_state(spec: str, field_name: str = "state"):
    """Presets: plus, zero, mixed, mixed(p), maxmixed(d), fourier(d), diag(...),
    bloch(x,y,z), a bare ``x,y,z`` triple, or a JSON matrix literal (entries
    may be numbers, ``[re, im]`` pairs or complex strings like ``"0.5j"``)."""
    s = spec.strip()
    low = s.lower()
    try:
        if low == "plus":
            return plus_state()
        if low == "zero":
            return make_density(np.diag([1.0, 0.0]))
        if low == "mixed":
            return maximally_mixed(2)
        m = re.fullmatch(r"([a-z]+)\((.*)\)", low)
        if m:
            name, args = m.group(1), _numbers(m.group(2)) if m.group(2).strip() else []
            if name == "mixed" and len(args) == 1:
                p = args[0]
                if not 0.0 <= p <= 1.0:
                    raise ValidationError(f"mixing weight must lie in [0, 1], got {p}")
                return make_density(p * plus_state().data + (1.0 - p) * np.eye(2) / 2.0)
            if name in ("fourier", "maxmixed") and len(args) == 1 and args[0] == int(args[0]) and 1 <= args[0] <= 64:
                d = int(args[0])
                return fourier_state(d) if name == "fourier" else maximally_mixed(d)
            if name == "diag" and len(args) >= 2:
                return make_density(np.diag(args))
            if name == "bloch" and len(args) == 3:
                return bloch_to_density(args)
            raise ValidationError(f"bad arguments for preset {name!r}")
        if s.startswith("["):
            rows = json.loads(s)
            return make_density(np.array([[_complex_entry(x) for x in row] for row in rows], dtype=complex))
        if "," in s:
            return bloch_to_density(_numbers(s))
    except ValidationError as e:
        raise ValidationError(f"{field_name}: {e}") from None
    except (ValueError, TypeError) as e:
        raise ValidationError(f"{field_name}: cannot parse {spec!r} ({e})") from None
    raise ValidationError(f"{field_name}: unknown state preset {spec!r}")


def _complex_entry(x) -> complex:
    if isinstance(x, list) and len(x) == 2:
        return complex(float(x[0]), float(x[1]))
    if isinstance(x, str):
        return complex(x.replace(" ", ""))
    return complex(x)


def _family(cfg: ExperimentConfig):
    name = cfg.family.lower()
    m = re.fullmatch(r"([a-z-]+)(?:\((.*)\))?", name)
    if not m:
        raise ValidationError(f"family: cannot parse {cfg.family!r}")
    key, arg = m.group(1), m.group(2)
    if key == "bloch-rotation":
        return bloch_rotation_family(), [0.0]
    if key == "diagonal":
        return diagonal_qubit_family(), [0.3]
    if key == "circle":
        return circle_family(_numbers(arg)[0] if arg else 1.0), [0.0]
    if key == "gell-mann":
        rho = parse_state(cfg.state)
        fam = gell_mann_family(rho.dim)
        return fam, list(fam.coordinates(rho))
    raise ValidationError(f"family: unknown family {cfg.family!r}; expected bloch-rotation, diagonal, "
                          "circle(r) or gell-mann")


def _flatten(prefix: str, m) -> dict:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.shape == (1, 1):
        return {prefix: float(m[0, 0])}
    return {f"{prefix}_{i}_{j}": float(m[i, j]) for i in range(m.shape[0]) for j in range(m.shape[1])}


def _strategy(kind: str, cfg: ExperimentConfig) -> Strategy:
    return Strategy(_STRATEGY_ALIASES[kind], cfg.basis or "Z", cfg.alpha, cfg.eps_est)


def compute(cfg: ExperimentConfig):
    """Run one command. Returns a dict (scalar commands) or a list of CSV rows."""
    g = get_generator(cfg.generator)
    c = cfg.command
    if c == "score":
        rho, sigma = parse_state(cfg.state), parse_state(cfg.report, "report")
        return score_report(rho, sigma, g, cfg.eps_floor).as_dict()
    if c == "divergence":
        rho, sigma = parse_state(cfg.state), parse_state(cfg.report, "report")
        diff = rho.data - sigma.data
        return {
            "bregman": bregman_divergence(rho, sigma, g, cfg.eps_floor),
            "petz": petz_f_divergence(rho, sigma, g, cfg.eps_floor),
            "support_leak": support_leak(rho, sigma),
            "hs_distance_sq": float(np.vdot(diff, diff).real),
        }
    if c == "coherence":
        rho = parse_state(cfg.state)
        basis = basis_by_name(cfg.basis or "Z", rho.dim)
        return {
            "coherence": coherence(rho, basis),
            "entropy": von_neumann_entropy(rho),
            "dephased_entropy": von_neumann_entropy(dephase(rho, basis)),
        }
    if c in ("qfi", "bound"):
        fam, theta0 = _family(cfg)
        theta = cfg.theta if cfg.theta is not None else theta0
        if c == "qfi":
            povm = Povm.from_basis(basis_by_name(cfg.basis, fam.dim)) if cfg.basis else None
            rep = fisher_report(fam, theta, povm, cfg.eps_floor)
            out = {**_flatten("qfi", rep.qfi), "regularized": float(rep.regularized)}
            if rep.cfi is not None:
                out.update(_flatten("cfi", rep.cfi))
            return out
        det = crmc_details(fam, theta, g, cfg.n, cfg.bound_mode, cfg.eps_floor)
        return {"bound": det.bound, **_flatten("hessian", det.hessian), **_flatten("qfi", det.qfi),
                "regularized": float(det.regularized)}
    if c == "simulate":
        rho = parse_state(cfg.state)
        strat = _strategy(cfg.strategy, cfg)
        rows = []
        for n in cfg.ns or [cfg.n]:
            r = estimate_risk(rho, strat, g, n, cfg.trials or default_trials(rho.dim), cfg.seed, cfg.jobs)
            rows.append({"n": n, "strategy": strat.describe(), "generator": g.name, "risk_mean": r.risk_mean,
                         "risk_stderr": r.risk_stderr, "trials": r.trials, "clamp_events": r.clamp_events,
                         "seed": cfg.seed})
        return rows
    if c == "advantage":
        classical = Strategy.classical(cfg.basis or "Z", cfg.alpha, cfg.eps_est)
        rows = scaling_study(cfg.dims, cfg.ns or [cfg.n], g, cfg.trials, cfg.seed, classical,
                             _strategy(cfg.quantum, cfg), cfg.jobs)
        return [dataclasses.asdict(r) for r in rows]
    raise ValidationError(f"command: unknown command {c!r}")


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return format(float(v), ".17g")
    return str(v)


def render(cfg: ExperimentConfig, payload) -> str:
    """Serialize a payload together with the config echo."""
    if isinstance(payload, dict):
        doc = {"version": __version__, "config": cfg.echo(), "result": {k: fmt(v) for k, v in payload.items()}}
        return json.dumps(doc, indent=2) + "\n"
    cols = SIMULATE_COLUMNS if cfg.command == "simulate" else ADVANTAGE_COLUMNS
    buf = io.StringIO()
    buf.write(VERSION_PREFIX + __version__ + "\n")
    buf.write(CONFIG_PREFIX + json.dumps(cfg.echo(), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in payload:
        w.writerow([fmt(row[k]) for k in cols])
    return buf.getvalue()


def human_table(payload) -> str:
    if isinstance(payload, dict):
        width = max(len(k) for k in payload)
        return "\n".join(f"{k:<{width}}  {fmt(v)}" for k, v in payload.items())
    if not payload:
        return ""
    cols = list(payload[0])
    cells = [[fmt(r[c]) if not isinstance(r[c], float) else f"{r[c]:.6g}" for c in cols] for r in payload]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(x.rjust(w) for x, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def _parse_document(text: str):
    """Return (version, config dict, kind, payload) for a results file."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            doc = json.loads(text)
            return doc["version"], doc["config"], "json", doc["result"]
        except (ValueError, KeyError, TypeError) as e:
            raise ValidationError(f"malformed JSON results file ({e})") from None
    version, config, body = None, None, []
    for line in text.splitlines(keepends=True):
        if line.startswith(VERSION_PREFIX):
            version = line[len(VERSION_PREFIX):].strip()
        elif line.startswith(CONFIG_PREFIX):
            try:
                config = json.loads(line[len(CONFIG_PREFIX):])
            except ValueError as e:
                raise ValidationError(f"malformed config echo ({e})") from None
        else:
            body.append(line)
    if config is None or not body:
        raise ValidationError("results file has no config echo or no table")
    rows = list(csv.reader(body))
    return version, config, "csv", rows


def replay(text: str, err=sys.stderr) -> None:
    """Re-run the echoed config and raise :class:`ReplayMismatch` on the first difference."""
    version, config, kind, recorded = _parse_document(text)
    if version != __version__:
        print(f"warning: results were produced by version {version}, this is {__version__}; comparing anyway",
              file=err)
    cfg = ExperimentConfig.from_dict(config)
    fresh = _parse_document(render(cfg, compute(cfg)))[3]
    if kind == "json":
        for key in list(fresh) + [k for k in recorded if k not in fresh]:
            if recorded.get(key) != fresh.get(key):
                raise ReplayMismatch(f"mismatch at key {key!r}: recorded {recorded.get(key)!r}, "
                                     f"recomputed {fresh.get(key)!r}")
        return
    header = fresh[0]
    if recorded[0] != header:
        raise ReplayMismatch(f"mismatch in header: recorded {recorded[0]}, recomputed {header}")
    if len(recorded) != len(fresh):
        raise ReplayMismatch(f"mismatch in row count: recorded {len(recorded) - 1}, recomputed {len(fresh) - 1}")
    for i, (a, b) in enumerate(zip(recorded[1:], fresh[1:]), start=1):
        for col, x, y in zip(header, a, b):
            if x != y:
                raise ReplayMismatch(f"mismatch at row {i}, column {col!r}: recorded {x}, recomputed {y}")
        if len(a) != len(b):
            raise ReplayMismatch(f"mismatch at row {i}: recorded {len(a)} cells, recomputed {len(b)}")


def _int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> List[float]:
    try:
        return _numbers(text)
    except ValidationError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qscore", allow_abbrev=False, description="Quantum proper scoring rules, Fisher information and "
                                          "forecasting experiments.")
    p.add_argument("--version", action="version", version=f"qscore {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    s = argparse.SUPPRESS
    for name in COMMANDS:
        c = sub.add_parser(name, argument_default=s, allow_abbrev=False)
        c.add_argument("--config", help="JSON config file; flags override its keys")
        c.add_argument("--state", help="true state (preset, Bloch triple or JSON matrix)")
        c.add_argument("--report", help="reported state for score/divergence")
        c.add_argument("--generator", help="log or quadratic")
        c.add_argument("--basis", help="measurement basis (Z, X, Y, computational, fourier)")
        c.add_argument("--family", help="bloch-rotation, diagonal, circle(r) or gell-mann")
        c.add_argument("--theta", type=_float_list, help="comma-separated parameter values")
        c.add_argument("--n", type=int, help="copy count")
        c.add_argument("--ns", type=_int_list, help="comma-separated copy counts")
        c.add_argument("--dims", type=_int_list, help="comma-separated dimensions (advantage)")
        c.add_argument("--trials", type=int)
        c.add_argument("--seed", type=int)
        c.add_argument("--eps-floor", dest="eps_floor", type=float)
        c.add_argument("--eps-est", dest="eps_est", type=float)
        c.add_argument("--alpha", type=float)
        c.add_argument("--bound-mode", "--mode", dest="bound_mode", choices=("hessian", "f2diag"))
        c.add_argument("--strategy", help="classical, tomography or oracle (simulate)")
        c.add_argument("--quantum", help="tomography or oracle (advantage)")
        c.add_argument("--jobs", type=int, help="trial-level threads; results do not depend on it")
        c.add_argument("--out", help="write results here and print a table instead")
    r = sub.add_parser("replay", help="re-run a results file and verify it bit for bit")
    r.add_argument("path")
    return p


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    merged = {}
    path = getattr(args, "config", None)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as e:
            raise OSError(f"cannot read config {path}: {e.strerror}") from None
        try:
            merged = json.loads(text)
        except ValueError as e:
            raise ValidationError(f"config file is not valid JSON ({e})") from None
        if not isinstance(merged, dict):
            raise ValidationError("config file must hold a JSON object")
        unknown = sorted(set(merged) - set(ExperimentConfig.keys()))
        if unknown:
            raise ValidationError(f"unknown config key(s): {', '.join(unknown)}")
        if merged.get("command", args.command) != args.command:
            raise ValidationError(f"command: config file says {merged['command']!r}, invocation says {args.command!r}")
    flags = {k: v for k, v in vars(args).items() if k != "config"}
    merged.update(flags)
    return ExperimentConfig.from_dict(merged)


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        if args.command == "replay":
            try:
                with open(args.path, encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as e:
                print(f"error: cannot read {args.path}: {e.strerror}", file=stderr)
                return 3
            replay(text, stderr)
            print("replay: identical", file=stdout)
            return 0
        cfg = load_config(args)
        payload = compute(cfg)
        text = render(cfg, payload)
        if cfg.out is None:
            stdout.write(text)
        else:
            try:
                with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
                    fh.write(text)
            except OSError as e:
                print(f"error: cannot write {cfg.out}: {e.strerror}", file=stderr)
                return 3
            print(human_table(payload), file=stdout)
        return 0
    except ReplayMismatch as e:
        print(f"replay: {e}", file=stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=stderr)
        return 3
    except (QScoreError, ValueError, ArithmeticError) as e:
        print(f"error: {e}", file=stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
