"""Command-line front end.

Subcommands::

    psimellin transform  --f EXPR [--psi EXPR] [--omega EXPR] --p RE[,IM] ...
    psimellin invert     (--F EXPR_IN_P | --roundtrip --f EXPR) --gamma G --x GRID
    psimellin convolve   --f EXPR --g EXPR --x GRID
    psimellin fracop     --kind {ri,rd,caputo,hilfer} --f EXPR --alpha A --x GRID
    psimellin solve-fde  [--preset case1..case5] [--g EXPR] --alpha A --x GRID [--residual]
    psimellin verify     [--identity NAME ...] [--tol THRESHOLD]

Every option may also come from an INI-style file given by ``--config``:
one section per subcommand, keys named like the long flags (``tol-abs`` or
``tol_abs``), list-valued keys separated by ``;``. Flags override the file and
unknown keys are rejected. The whole job is parsed and validated before any
computation starts.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 numerical failure (non-converged or divergent rows). Output (CSV with a
header row, or JSON ``{job, rows, summary}``) is deterministic and appears
atomically: it is written to a temporary file that is renamed on completion.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
import tempfile
import warnings
from collections.abc import Callable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any

import numpy as np

from psimellin.expr import (
    FUNCTIONS,
    BinOp,
    Const,
    Expr,
    Func,
    Neg,
    Var,
    as_expr,
    parse_expr,
)
from psimellin.fracops import FracSpec, apply_operator, conjugated_op
from psimellin.funcspace import AdmissiblePsi, Weight, as_psi, as_weight
from psimellin.mellinops import (
    IDENTITIES,
    FdeProblem,
    IdentityReport,
    builtin_suite,
    case4_problem,
    case5_integrand,
    case5_problem,
    convolve,
    fde_case1,
    fde_closed_case3,
    fde_residual,
    run_entry,
    solve_fde,
)
from psimellin.quad import DEFAULT_TOL, Tolerance, integrate_finite
from psimellin.special import gamma_complex
from psimellin.transforms import (
    TransformJob,
    estimate_strip,
    fourier_psi_omega,
    laplace_bilateral,
    mellin_forward,
    mellin_function,
    mellin_inverse,
)

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

COMMANDS = ("transform", "invert", "convolve", "fracop", "solve-fde", "verify")
PRESETS = ("case1", "case2", "case3", "case4", "case5")
FRACOP_KINDS = {"ri": "rl-integral", "rd": "rl-derivative", "caputo": "caputo",
                "hilfer": "hilfer"}


class ConfigError(ValueError):
    """Invalid or incomplete job configuration (exit code 2)."""


# {{{ value parsers


def _number(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"not a decimal number: {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"not a finite number: {text!r}")
    return value


def _complex_point(text: str) -> complex:
    """``"re"`` or ``"re,im"``."""
    parts = [s.strip() for s in text.split(",")]
    if len(parts) not in (1, 2) or not all(parts):
        raise ConfigError(f"complex point must be 're' or 're,im': {text!r}")
    re = _number(parts[0])
    im = _number(parts[1]) if len(parts) == 2 else 0.0
    return complex(re, im)


def _grid(text: str) -> tuple[float, ...]:
    """A comma-separated list, ``lin:a:b:n`` or ``geom:a:b:n``."""
    text = text.strip()
    if text.startswith(("lin:", "geom:")):
        parts = text.split(":")
        if len(parts) != 4:
            raise ConfigError(f"grid must be 'lin:a:b:n' or 'geom:a:b:n': {text!r}")
        a, b = _number(parts[1]), _number(parts[2])
        try:
            n = int(parts[3])
        except ValueError:
            raise ConfigError(f"grid size must be an integer: {parts[3]!r}") from None
        if n < 1:
            raise ConfigError("grid size must be positive")
        if parts[0] == "lin":
            values = np.linspace(a, b, n)
        else:
            if not (a > 0 and b > 0):
                raise ConfigError("geometric grids need positive end points")
            values = np.geomspace(a, b, n)
        return tuple(float(v) for v in values)
    items = [s.strip() for s in text.split(",")]
    if not all(items):
        raise ConfigError(f"empty entry in grid {text!r}")
    return tuple(_number(s) for s in items)


def _expression(text: str) -> Expr:
    try:
        return as_expr(text)
    except ValueError as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc}") from None


def _flag(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _choice(*choices: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in choices:
            raise ConfigError(f"{text!r} is not one of {', '.join(choices)}")
        return text

    return parse


# }}}


# {{{ option table


@dataclass(frozen=True)
class Option:
    """One long flag; the same table drives argparse and the config file."""

    name: str
    parse: Callable[[str], Any] = str
    help: str = ""
    default: Any = None
    repeat: bool = False
    switch: bool = False

    @property
    def dest(self) -> str:
        return self.name.replace("-", "_")


_SHARED = (
    Option("psi", str, "psi(x) (default: x)", "x"),
    Option("omega", str, "omega(x) (default: 1)", "1"),
    Option("tol-abs", _number, "absolute quadrature tolerance", DEFAULT_TOL.abs_tol),
    Option("tol-rel", _number, "relative quadrature tolerance", DEFAULT_TOL.rel_tol),
    Option("out", str, "output path (default: standard output)"),
    Option("format", _choice("csv", "json"), "output format", "csv"),
    Option("workers", int, "threads used for grid rows", 4),
)

OPTIONS: dict[str, tuple[Option, ...]] = {
    "transform": (
        Option("f", str, "f(x)"),
        Option("p", _complex_point, "transform parameter 're[,im]' (repeatable)", repeat=True),
        Option("kind", _choice("mellin", "laplace", "fourier"),
               "mellin, bilateral laplace, or fourier (uses Re p as k)", "mellin"),
        Option("method", _choice("direct", "conjugated"), "quadrature route", "direct"),
        Option("force", _flag, "skip the strip check", False, switch=True),
        *_SHARED,
    ),
    "invert": (
        Option("F", str, "F(p) as an expression in p (gamma(p) allowed)"),
        Option("F-im", str, "imaginary part added to F as i*F_im"),
        Option("roundtrip", _flag, "invert the numerical transform of --f", False, switch=True),
        Option("f", str, "f(x) for --roundtrip"),
        Option("gamma", _number, "abscissa of the inversion line Re(p) = gamma"),
        Option("x", _grid, "x grid: 'a,b,c', 'lin:a:b:n' or 'geom:a:b:n'", "1"),
        Option("T", _number, "initial half-length of the truncated line", 16.0),
        *_SHARED,
    ),
    "convolve": (
        Option("f", str, "f(x)"),
        Option("g", str, "g(x)"),
        Option("x", _grid, "x grid", "1"),
        *_SHARED,
    ),
    "fracop": (
        Option("kind", _choice(*FRACOP_KINDS), "ri, rd, caputo or hilfer"),
        Option("f", str, "f(x)"),
        Option("alpha", _number, "order alpha > 0"),
        Option("beta", _number, "Hilfer type 0 <= beta <= 1", 0.5),
        Option("a", _number, "base point a >= 0", 0.0),
        Option("x", _grid, "x grid (points > a)", "1"),
        *_SHARED,
    ),
    "solve-fde": (
        Option("preset", _choice(*PRESETS), "one of the five particular cases"),
        Option("g", str, "right-hand side g(x)"),
        Option("f", str, "alias of --g"),
        Option("alpha", _number, "order 1 < alpha <= 2", 1.5),
        Option("k", _number, "case3: psi = x^k", 1.0),
        Option("n", _number, "case3: g = x^n", -2.0),
        Option("x", _grid, "x grid (points > 0)"),
        Option("residual", _flag, "add the column psi^alpha D^alpha y - g", False, switch=True),
        *_SHARED,
    ),
    "verify": (
        Option("identity", _choice(*IDENTITIES), "only run this identity (repeatable)",
               repeat=True),
        Option("tol", _number, "relative threshold replacing the per-identity defaults"),
        Option("tol-abs", _number, "absolute quadrature tolerance", DEFAULT_TOL.abs_tol),
        Option("tol-rel", _number, "relative quadrature tolerance", DEFAULT_TOL.rel_tol),
        Option("out", str, "output path (default: standard output)"),
        Option("format", _choice("csv", "json"), "output format", "json"),
    ),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="psimellin",
        description="Weighted Mellin transforms with respect to a function, fractional "
                    "operators and the identities that connect them.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for command, options in OPTIONS.items():
        p = sub.add_parser(command, help=f"{command} job")
        p.add_argument("--config", metavar="PATH", default=argparse.SUPPRESS,
                       help="INI file with a [%s] section" % command)
        for opt in options:
            kwargs: dict[str, Any] = {"dest": opt.dest, "default": argparse.SUPPRESS,
                                      "help": opt.help}
            if opt.switch:
                kwargs["action"] = "store_const"
                kwargs["const"] = "true"
            elif opt.repeat:
                kwargs["action"] = "append"
            p.add_argument(f"--{opt.name}", **kwargs)
    return parser


# }}}


# {{{ job configuration


@dataclass(frozen=True)
class JobConfig:
    """A fully parsed job: the subcommand and its typed option values."""

    command: str
    values: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", MappingProxyType(dict(self.values)))

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def get(self, key: str, default: Any = None) -> Any:
        value = self.values.get(key)
        return default if value is None else value

    @property
    def tol(self) -> Tolerance:
        return Tolerance(abs_tol=self["tol_abs"], rel_tol=self["tol_rel"])

    def describe(self) -> dict[str, Any]:
        """JSON-friendly view of the job (for the output header)."""
        out: dict[str, Any] = {"command": self.command}
        for key in sorted(self.values):
            out[key] = _jsonable(self.values[key])
        return out


def _read_config_file(path: str, command: str) -> dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    parser.optionxform = str  # keep case: --F and --f are different options
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path!r}: {exc}") from None
    for section in parser.sections():
        if section not in COMMANDS:
            raise ConfigError(f"unknown section [{section}] in {path!r}")
    if not parser.has_section(command):
        return {}
    return dict(parser.items(command))


def _parse_raw(opt: Option, raw: Any) -> Any:
    if opt.repeat:
        items = raw if isinstance(raw, list) else [s for s in str(raw).split(";") if s.strip()]
        return tuple(opt.parse(str(s).strip()) for s in items)
    try:
        return opt.parse(str(raw).strip())
    except ConfigError as exc:
        raise ConfigError(f"--{opt.name}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"--{opt.name}: {exc}") from None


def parse_job(argv: Sequence[str] | None = None) -> JobConfig:
    """Parse flags (and the optional config file) into a validated :class:`JobConfig`.

    Raises :class:`ConfigError`; argparse usage errors exit with status 2.
    """
    ns = vars(_build_parser().parse_args(argv))
    command = ns.pop("command")
    options = {opt.dest: opt for opt in OPTIONS[command]}
    by_key = {}
    for opt in OPTIONS[command]:
        by_key[opt.name] = opt
        by_key[opt.dest] = opt

    merged: dict[str, Any] = {}
    if "config" in ns:
        for key, raw in _read_config_file(ns.pop("config"), command).items():
            if key not in by_key:
                raise ConfigError(f"unknown key {key!r} in section [{command}]")
            merged[by_key[key].dest] = raw
    merged.update(ns)  # flags override the file

    values: dict[str, Any] = {}
    for dest, opt in options.items():
        if dest in merged:
            values[dest] = _parse_raw(opt, merged[dest])
        elif opt.default is not None:
            values[dest] = _parse_raw(opt, opt.default) if isinstance(opt.default, str) \
                else opt.default
        else:
            values[dest] = None
    job = JobConfig(command, values)
    _validate(job)
    return job


def _require(job: JobConfig, *names: str) -> None:
    for name in names:
        if job.get(name.replace("-", "_")) is None:
            raise ConfigError(f"missing required option --{name}")


def _validate(job: JobConfig) -> None:
    """Check everything that can be checked without computing."""
    c = job.command
    if job.get("workers") is not None and job["workers"] < 1:
        raise ConfigError("--workers must be at least 1")
    if c != "verify":
        try:
            _ = job.tol  # raises on a malformed tolerance pair
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if c == "transform":
        _require(job, "f", "p")
        _setting(job)
        _expression(job["f"])
    elif c == "invert":
        if job["roundtrip"]:
            _require(job, "f")
            _expression(job["f"])
        else:
            _require(job, "F")
            _transform_side(job["F"])
            if job.get("F_im") is not None:
                _transform_side(job["F_im"])
            _require(job, "gamma")
        _setting(job)
        _positive_grid(job["x"])
    elif c == "convolve":
        _require(job, "f", "g")
        _setting(job)
        _expression(job["f"])
        _expression(job["g"])
        _positive_grid(job["x"])
    elif c == "fracop":
        _require(job, "kind", "f", "alpha")
        _setting(job)
        _expression(job["f"])
        if not job["alpha"] > 0:
            raise ConfigError("--alpha must be positive")
        if not 0.0 <= job["beta"] <= 1.0:
            raise ConfigError("--beta must lie in [0, 1]")
        if not job["a"] >= 0:
            raise ConfigError("--a must be non-negative")
        if any(not x > job["a"] for x in job["x"]):
            raise ConfigError("every x must exceed the base point a")
    elif c == "solve-fde":
        if not 1.0 < job["alpha"] <= 2.0:
            raise ConfigError("--alpha must satisfy 1 < alpha <= 2")
        if job.get("g") is not None and job.get("f") is not None:
            raise ConfigError("give the right-hand side once (--g or its alias --f)")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            _fde_problem(job)
        if job.get("x") is not None:
            _positive_grid(job["x"])


def _positive_grid(xs: Sequence[float]) -> None:
    if any(not x > 0 for x in xs):
        raise ConfigError("every x must be positive")


def _setting(job: JobConfig) -> tuple[AdmissiblePsi, Weight]:
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return as_psi(job["psi"]), as_weight(job["omega"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# }}}


# {{{ transform-side expressions


_P_FUNCTIONS = (*FUNCTIONS, "gamma")


def _transform_side(text: str) -> Expr:
    try:
        return parse_expr(text, variable="p", functions=_P_FUNCTIONS)
    except ValueError as exc:
        raise ConfigError(f"cannot parse F {text!r}: {exc}") from None


def evaluate_complex(e: Expr, p):
    """Evaluate an expression in ``p`` for complex arguments (principal branches)."""
    p = np.asarray(p, dtype=complex)
    if isinstance(e, Const):
        return np.full(p.shape, e.value, dtype=complex)
    if isinstance(e, Var):
        return p
    if isinstance(e, Neg):
        return -evaluate_complex(e.arg, p)
    if isinstance(e, BinOp):
        a = evaluate_complex(e.left, p)
        b = evaluate_complex(e.right, p)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            return a / b
        return np.exp(b * np.log(a))
    if isinstance(e, Func):
        u = evaluate_complex(e.arg, p)
        if e.name == "gamma":
            return np.asarray(gamma_complex(u), dtype=complex)
        if e.name == "ln":
            return np.log(u)
        if e.name == "abs":
            return np.abs(u).astype(complex)
        return getattr(np, e.name)(u)
    raise TypeError(f"cannot evaluate {e!r} for complex p")


# }}}


# {{{ output


def _jsonable(value: Any) -> Any:
    if isinstance(value, complex):
        return [_jsonable(value.real), _jsonable(value.imag)]
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, (tuple, list)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return _jsonable(value.item())
    return value


def _csv_cell(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    if isinstance(value, complex):
        return f"{value.real:.17g}{value.imag:+.17g}j"
    if value is None:
        return ""
    if isinstance(value, (list, tuple, dict)):
        return json.dumps(_jsonable(value), sort_keys=True)
    return str(value)


@dataclass
class Table:
    """Rows of one job, in input order, with a summary."""

    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)

    def render(self, job: JobConfig) -> str:
        if job["format"] == "json":
            doc = {
                "job": job.describe(),
                "rows": [dict(zip(self.columns, (_jsonable(v) for v in row))) for row in self.rows],
                "summary": _jsonable(self.summary),
            }
            return json.dumps(doc, indent=2) + "\n"
        buf = io.StringIO()
        writer = csv.writer(buf)  # RFC 4180: CRLF line ends, minimal quoting
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_csv_cell(v) for v in row])
        return buf.getvalue()


def write_atomic(path: str | None, text: str) -> None:
    """Write *text* to *path* via a temporary file and a rename (stdout if no path)."""
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".psimellin-", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _map_rows(job: JobConfig, func: Callable, items: Sequence) -> list:
    """Apply *func* to every item concurrently; results come back in input order."""
    workers = min(job.get("workers", 1), max(len(items), 1))
    if workers <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


# }}}


# {{{ commands


def cmd_transform(job: JobConfig) -> tuple[Table, int]:
    psi, omega = _setting(job)
    f = _expression(job["f"])
    points = job["p"]
    kind = job["kind"]
    table = Table(("p_re", "p_im", "value_re", "value_im", "err_abs", "converged"))
    if kind == "mellin":
        strip = estimate_strip(f, psi, omega)
        table.summary["strip"] = [strip.lower, strip.upper]
        tj = TransformJob(f, psi, omega, tuple(points), job.tol, job["method"], job["force"])
        results = mellin_forward(tj)
    elif kind == "laplace":
        results = _map_rows(job, lambda p: laplace_bilateral(f, job["psi"], job["omega"], p,
                                                             job.tol), points)
    else:
        results = _map_rows(job, lambda p: fourier_psi_omega(f, job["psi"], job["omega"],
                                                             p.real, job.tol), points)
    for p, r in zip(points, results):
        table.rows.append((p.real, p.imag, r.value.real, r.value.imag, r.err_abs,
                           bool(r.converged)))
    return table, _numeric_status(table, [r.converged for r in results])


def cmd_invert(job: JobConfig) -> tuple[Table, int]:
    psi, omega = _setting(job)
    xs = job["x"]
    if job["roundtrip"]:
        f = _expression(job["f"])
        strip = estimate_strip(f, psi, omega)
        gamma = job.get("gamma")
        if gamma is None:
            gamma = _strip_midpoint(strip.lower, strip.upper)
        F = mellin_function(f, psi, omega, job.tol)
        columns = ("x", "y_re", "y_im", "err_abs", "converged", "f", "abs_diff")
    else:
        strip = None
        gamma = job["gamma"]
        re_part = _transform_side(job["F"])
        im_part = _transform_side(job["F_im"]) if job.get("F_im") is not None else None

        def F(p):
            with np.errstate(all="ignore"):
                value = evaluate_complex(re_part, p)
                if im_part is not None:
                    value = value + 1j * evaluate_complex(im_part, p)
            return value

        columns = ("x", "y_re", "y_im", "err_abs", "converged")
    table = Table(columns, summary={"gamma": gamma})
    if strip is not None:
        table.summary["strip"] = [strip.lower, strip.upper]
        if not strip.contains(gamma):
            table.summary["error"] = "the inversion line lies outside the fundamental strip"
            for x in xs:
                table.rows.append((x, math.nan, math.nan, math.inf, False,
                                   float(f(x)), math.nan))
            return table, EXIT_NUMERIC

    results = _map_rows(job, lambda x: mellin_inverse(F, psi, omega, x, gamma, job.tol,
                                                      T=job["T"]), xs)
    diffs = []
    for x, r in zip(xs, results):
        row = (x, r.value.real, r.value.imag, r.err_abs, bool(r.converged))
        if job["roundtrip"]:
            fx = float(f(x))
            diff = abs(r.value - fx)
            diffs.append(diff)
            row = row + (fx, diff)
        table.rows.append(row)
    if diffs:
        table.summary["max_abs_diff"] = max(diffs)
    return table, _numeric_status(table, [r.converged for r in results])


def _strip_midpoint(lower: float, upper: float) -> float:
    if math.isfinite(lower) and math.isfinite(upper):
        return 0.5 * (lower + upper)
    if math.isfinite(lower):
        return lower + 1.0
    if math.isfinite(upper):
        return upper - 1.0
    return 1.0


def cmd_convolve(job: JobConfig) -> tuple[Table, int]:
    psi, omega = _setting(job)
    f, g = _expression(job["f"]), _expression(job["g"])
    results = _map_rows(job, lambda x: convolve(f, g, psi, omega, x, job.tol), job["x"])
    table = Table(("x", "value_re", "value_im", "err_abs", "converged"))
    for x, r in zip(job["x"], results):
        table.rows.append((x, r.value.real, r.value.imag, r.err_abs, bool(r.converged)))
    return table, _numeric_status(table, [r.converged for r in results])


def cmd_fracop(job: JobConfig) -> tuple[Table, int]:
    psi, omega = _setting(job)
    f = _expression(job["f"])
    spec = FracSpec(job["alpha"], FRACOP_KINDS[job["kind"]], job["beta"], job["a"])

    def row(x):
        direct = apply_operator(spec, f, psi, omega, x, job.tol)
        conj = conjugated_op(f, psi, omega, spec, x, job.tol)
        return direct, conj

    results = _map_rows(job, row, job["x"])
    table = Table(("x", "direct", "conjugated", "abs_diff", "converged"))
    ok = []
    diffs = []
    for x, (d, c) in zip(job["x"], results):
        diff = abs(d.value - c.value)
        diffs.append(diff)
        conv = bool(d.converged and c.converged)
        ok.append(conv)
        table.rows.append((x, d.value.real, c.value.real, diff, conv))
    table.summary["max_abs_diff"] = max(diffs) if diffs else 0.0
    return table, _numeric_status(table, ok)


def _fde_problem(job: JobConfig) -> FdeProblem:
    preset = job.get("preset")
    alpha = job["alpha"]
    g_text = job.get("g") or job.get("f")
    try:
        if preset is None:
            if g_text is None:
                raise ConfigError("missing required option --g (or --preset)")
            psi, omega = _setting(job)
            return FdeProblem(alpha, _expression(g_text), psi, omega)
        if preset == "case1":
            return FdeProblem(alpha, _expression(g_text or "x^(-2)"), "x", "1")
        if preset == "case2":
            psi = job["psi"] if job["psi"] != "x" else "x+x^2/2"
            return FdeProblem(alpha, _expression(g_text or "x^(-4)"), as_psi(psi), "1")
        if preset == "case3":
            k, n = job["k"], job["n"]
            if not k > 0:
                raise ConfigError("--k must be positive")
            if g_text is not None:
                raise ConfigError("case3 fixes g = x^n; use --n instead of --g")
            return FdeProblem(alpha, as_expr(f"x^({n!r})"), as_psi(f"x^({k!r})"), "1")
        if preset == "case4":
            return case4_problem(alpha)
        return case5_problem(alpha, g_text or "x^(-2)")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


_FDE_GRIDS = {"case5": (1.5, 2.0, 3.0)}


def cmd_solve_fde(job: JobConfig) -> tuple[Table, int]:
    problem = _fde_problem(job)
    preset = job.get("preset")
    xs = job.get("x") or _FDE_GRIDS.get(preset, (0.5, 1.0, 2.0))
    tol = job.tol
    columns = ["x", "y", "err_abs", "converged"]
    reference = None
    if preset == "case1":
        columns += ["y_case1", "abs_diff"]
        reference = lambda x: fde_case1(problem.g, problem.alpha, x, tol).value.real
    elif preset == "case3":
        columns += ["y_closed", "abs_diff"]
        reference = lambda x: fde_closed_case3(job["k"], job["n"], problem.alpha, x)
    elif preset == "case5":
        columns += ["y_rederived", "abs_diff"]
        reference = lambda x: _case5_rederived(problem, x, tol)
    if job["residual"]:
        columns += ["residual", "residual_converged"]

    def row(x):
        r = solve_fde(problem, x, tol)
        out = [x, r.value.real, r.err_abs, bool(r.converged)]
        ok = r.converged
        if reference is not None:
            try:
                ref = float(reference(x))
            except ArithmeticError:
                ref = math.nan
            out += [ref, abs(r.value.real - ref)]
        if job["residual"]:
            res = fde_residual(problem, x, tol)
            out += [res.value.real, bool(res.converged)]
            ok = ok and res.converged
        return tuple(out), ok, r

    results = _map_rows(job, row, xs)
    table = Table(tuple(columns))
    flags = []
    for out, ok, r in results:
        table.rows.append(out)
        flags.append(ok)
        if not r.converged:
            table.summary.setdefault("divergent_x", []).append(out[0])
    status = _numeric_status(table, flags)
    if "divergent_x" in table.summary:
        xs_bad = ", ".join(f"{x:g}" for x in table.summary["divergent_x"])
        print(f"psimellin: solution integral diverges at x = {xs_bad}", file=sys.stderr)
    return table, status


def _case5_rederived(problem: FdeProblem, x: float, tol: Tolerance) -> float:
    """Case 5 from its hand-derived integrand over ``1 < s < e``."""
    alpha = problem.alpha
    g = problem.g

    def integrand(s, dl, dr):
        with np.errstate(all="ignore"):
            return case5_integrand(alpha, x, s, g.evaluate)

    res = integrate_finite(integrand, 1.0, math.e, tol, distances=True)
    return res.value.real / (x**alpha * math.gamma(alpha))


def cmd_verify(job: JobConfig) -> tuple[Table, int]:
    names = set(job.get("identity") or ())
    tol = Tolerance(abs_tol=job["tol_abs"], rel_tol=job["tol_rel"])
    entries = [e for e in builtin_suite() if not names or e.name in names]
    reports: list[IdentityReport] = []
    for entry in entries:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            reports.append(run_entry(entry, tol, job.get("tol")))
    table = Table(("identity", "psi", "omega", "f", "lhs", "rhs", "abs_diff", "rel_diff",
                   "threshold", "passed", "diagnostic", "notes"))
    for entry, rep in zip(entries, reports):
        table.rows.append((rep.identity_name, entry.psi, entry.omega, entry.f, rep.lhs, rep.rhs,
                           rep.abs_diff, rep.rel_diff, rep.threshold, rep.passed,
                           rep.diagnostic, rep.notes))
    counted = [r for r in reports if not r.diagnostic]
    broken = [r for r in counted if not math.isfinite(r.abs_diff)]
    failed = [r for r in counted if not r.passed]
    table.summary = {
        "total": len(reports),
        "passed": sum(r.passed for r in counted),
        "failed": len(failed),
        "diagnostics": len(reports) - len(counted),
        "numerical_breakdowns": len(broken),
    }
    if broken:
        return table, EXIT_NUMERIC
    return table, EXIT_VERIFY if failed else EXIT_OK


def _numeric_status(table: Table, converged: Sequence[bool]) -> int:
    bad = sum(not c for c in converged)
    table.summary["rows"] = len(converged)
    table.summary["non_converged"] = bad
    return EXIT_NUMERIC if bad else EXIT_OK


COMMAND_FUNCS = {
    "transform": cmd_transform,
    "invert": cmd_invert,
    "convolve": cmd_convolve,
    "fracop": cmd_fracop,
    "solve-fde": cmd_solve_fde,
    "verify": cmd_verify,
}


# }}}


def run(job: JobConfig) -> int:
    """Execute a parsed job, write its output and return the exit code."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            table, status = COMMAND_FUNCS[job.command](job)
        except ConfigError:
            raise
        except ArithmeticError as exc:
            print(f"psimellin: numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
    for message in sorted({str(w.message) for w in caught}):
        print(f"psimellin: warning: {message}", file=sys.stderr)
    write_atomic(job.get("out"), table.render(job))
    return status


def main(argv: Sequence[str] | None = None) -> int:
    try:
        job = parse_job(argv)
        return run(job)
    except ConfigError as exc:
        print(f"psimellin: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
