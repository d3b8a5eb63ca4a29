"""
Line-oriented configuration files.

Format::

    # comment
    [grid]
    dim = 1
    L = 16
    n = 256

    [problem]
    family = elliptic
    order = 2
    a[2] = -1

Values are numbers, the literal ``inf``, comma-separated lists or
expressions (see :mod:`besovlab.expr`).  Every error carries its line
number; all errors of a file are reported together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from dataclasses import field as dc_field

import numpy as np

from .errors import ConfigError, ExprSyntaxError
from .expr import parse_expr
from .grid import MAX_DIM

FAMILIES = ("elliptic", "convolution", "system")
PROBE_FAMILIES = ("gaussian", "band", "trig", "mix")
FORMATS = ("json", "csv")


@dataclass(frozen=True)
class GridSection:
    dim: int = 1
    L: float = 16.0
    n: int = 256


@dataclass(frozen=True)
class SpaceSection:
    q: float = 2.0
    M: int = 8
    weight: str = "m^2"


@dataclass(frozen=True)
class ProblemSection:
    """``coeffs`` maps multi-indices to expressions, ``kernels`` maps ``k`` to
    kernel transforms in ``xi``; ``ahat`` is the transform of the kernel in ``A * u``."""

    family: str = "elliptic"
    order: int = 2
    coeffs: tuple = (((2,), "-1"),)
    kernels: tuple = ()
    ahat: str = "1"
    lam: float = 1.0
    lam_arg: float = 0.0
    lambda0: float = 1.0
    phi1: float = math.pi / 4

    @property
    def lam_complex(self) -> complex:
        return complex(self.lam * np.exp(1j * self.lam_arg))


@dataclass(frozen=True)
class BesovSection:
    """``q2`` and ``eta`` are optional; the resolved pair is in :attr:`Config.exponents`."""

    q1: float = 2.0
    q2: float | None = None
    eta: float | None = None
    r: float = 2.0
    s: float = 1.0


@dataclass(frozen=True)
class SweepSection:
    sector: float = math.pi / 2
    rays: tuple | None = None
    lam_min: float = 1.0
    lam_max: float = 1e4
    n_mag: int = 25
    seed: int = 0
    probes: int = 6
    families: tuple = PROBE_FAMILIES


@dataclass(frozen=True)
class SymbolSection:
    expr: str = ""
    order: int | None = None
    eta: float = 1.0
    p: float = 1.0


@dataclass(frozen=True)
class EmbedSection:
    alpha: tuple = (1,)
    l: int = 4
    kernel: str = ""


@dataclass(frozen=True)
class FieldSection:
    expr: str = "exp(-x^2/2)"


@dataclass(frozen=True)
class OutputSection:
    dir: str = "."
    format: str = "json"
    plot: bool = False
    name: str = "report"


SECTIONS = {
    "grid": GridSection,
    "space": SpaceSection,
    "problem": ProblemSection,
    "besov": BesovSection,
    "sweep": SweepSection,
    "symbol": SymbolSection,
    "embed": EmbedSection,
    "field": FieldSection,
    "output": OutputSection,
}


@dataclass(frozen=True)
class Exponents:
    """Resolved ``(q1, q2, eta')`` with ``1/q2 = 1/q1 - 1/eta'``."""

    q1: float
    q2: float
    eta_prime: float
    q2_infinite: bool


@dataclass(frozen=True)
class Config:
    grid: GridSection = dc_field(default_factory=GridSection)
    space: SpaceSection = dc_field(default_factory=SpaceSection)
    problem: ProblemSection = dc_field(default_factory=ProblemSection)
    besov: BesovSection = dc_field(default_factory=BesovSection)
    sweep: SweepSection = dc_field(default_factory=SweepSection)
    symbol: SymbolSection = dc_field(default_factory=SymbolSection)
    embed: EmbedSection = dc_field(default_factory=EmbedSection)
    field: FieldSection = dc_field(default_factory=FieldSection)
    output: OutputSection = dc_field(default_factory=OutputSection)

    @property
    def exponents(self) -> Exponents:
        b = self.besov
        return resolve_exponents(b.q1, b.q2, b.eta)


# -- exponent bookkeeping -------------------------------------------------------------


def conjugate(p: float) -> float:
    """``p'`` with ``1/p + 1/p' = 1``."""
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def _inv(v: float) -> float:
    return 0.0 if math.isinf(v) else 1.0 / v


def resolve_exponents(q1: float, q2: float | None = None, eta: float | None = None) -> Exponents:
    """Complete ``(q1, q2, eta)`` into a consistent triple.

    Without ``q2`` and ``eta`` the default ``eta' = 4`` is used.  ``q1 = eta'``
    is accepted with ``q2 = inf`` flagged.
    """
    if not q1 > 1 or math.isinf(q1):
        raise ConfigError(f"q1 must lie in (1, inf), got {q1}")
    if eta is not None and not eta >= 1:
        raise ConfigError(f"eta must lie in [1, inf], got {eta}")
    if q2 is not None and not q2 >= 1:
        raise ConfigError(f"q2 must lie in [1, inf], got {q2}")
    if eta is None and q2 is None:
        eta_p = 4.0
    elif eta is not None:
        eta_p = conjugate(eta)
    else:
        inv = _inv(q1) - _inv(q2)
        if inv < -1e-15:
            raise ConfigError(f"1/q2 > 1/q1 (q1 = {q1}, q2 = {q2}): no eta' >= 1 fits")
        eta_p = math.inf if inv <= 1e-15 else 1.0 / inv
    inv_q2 = _inv(q1) - _inv(eta_p)
    if inv_q2 < -1e-15:
        raise ConfigError(f"q1 = {q1} exceeds eta' = {eta_p}: 1/q2 would be negative")
    q2_res = math.inf if inv_q2 <= 1e-15 else 1.0 / inv_q2
    if q2 is not None and eta is not None and abs(_inv(q2) - inv_q2) > 1e-12:
        raise ConfigError(f"inconsistent exponents: q1 = {q1}, eta = {eta} give q2 = {q2_res}, not {q2}")
    return Exponents(float(q1), q2_res, eta_p, math.isinf(q2_res))


# -- parsing ----------------------------------------------------------------------


def _number(text: str) -> float:
    t = text.strip()
    if t in ("inf", "+inf"):
        return math.inf
    v = parse_expr(t).evaluate()
    if isinstance(v, complex) or np.iscomplexobj(v):
        raise ConfigError(f"expected a real number, got {t!r}")
    return float(v)


def _int(text: str) -> int:
    v = _number(text)
    if not float(v).is_integer():
        raise ConfigError(f"expected an integer, got {text.strip()!r}")
    return int(v)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1"):
        return True
    if t in ("false", "no", "0"):
        return False
    raise ConfigError(f"expected true/false, got {text.strip()!r}")


def _expr(text: str) -> str:
    t = text.strip()
    if t:
        try:
            parse_expr(t)
        except ExprSyntaxError as exc:
            raise ConfigError(f"{exc} in {t!r}") from None
    return t


def _list(text: str, conv) -> tuple:
    return tuple(conv(p) for p in text.split(",") if p.strip())


def _opt_number(text: str):
    t = text.strip()
    return None if t in ("", "none") else _number(t)


def _none(text: str) -> tuple:
    if text.strip() != "none":
        raise ConfigError("only 'coeffs = none' is allowed; set coefficients as a[...] = expr")
    return ()


def _word(choices):
    def conv(text):
        t = text.strip()
        if t not in choices:
            raise ConfigError(f"expected one of {list(choices)}, got {t!r}")
        return t

    return conv


KEYS = {
    "grid": {"dim": _int, "L": _number, "n": _int},
    "space": {"q": _number, "M": _int, "weight": _expr},
    "problem": {
        "family": _word(FAMILIES), "order": _int, "ahat": _expr, "lambda": _number,
        "lambda_arg": _number, "lambda0": _number, "phi1": _number,
        "coeffs": _none,
    },
    "besov": {"q1": _number, "q2": _opt_number, "eta": _opt_number, "r": _number, "s": _number},
    "sweep": {
        "sector": _number, "rays": lambda t: None if t.strip() == "none" else _list(t, _number), "lam_min": _number,
        "lam_max": _number, "n_mag": _int, "seed": _int, "probes": _int,
        "families": lambda t: _list(t, _word(PROBE_FAMILIES)),
    },
    "symbol": {"expr": _expr, "order": lambda t: None if t.strip() in ("", "none") else _int(t),
               "eta": _number, "p": _number},
    "embed": {"alpha": lambda t: _list(t, _int), "l": _int, "kernel": _expr},
    "field": {"expr": _expr},
    "output": {"dir": str.strip, "format": _word(FORMATS), "plot": _bool, "name": str.strip},
}
RENAMED = {("problem", "lambda"): "lam", ("problem", "lambda_arg"): "lam_arg"}


def _indexed(key: str):
    """``a[2]`` -> ``('a', (2,))``; ``None`` when ``key`` has no index."""
    if "[" not in key or not key.endswith("]"):
        return None
    head, rest = key.split("[", 1)
    idx = tuple(int(p) for p in rest[:-1].split(","))
    if any(i < 0 for i in idx):
        raise ValueError
    return head.strip(), idx


def parse_config(text: str) -> Config:
    """Parse and validate; raises :class:`ConfigError` listing ``(line, message)`` pairs."""
    errors: list[tuple[int, str]] = []
    values: dict[str, dict] = {name: {} for name in SECTIONS}
    coeffs, kernels = {}, {}
    section = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            name = line.strip("[]").strip()
            if not line.endswith("]") or name not in SECTIONS:
                errors.append((no, f"unknown section {line!r}"))
                section = None
            else:
                section = name
            continue
        if "=" not in line:
            errors.append((no, f"expected 'key = value', got {line!r}"))
            continue
        if section is None:
            errors.append((no, "key outside a known section"))
            continue
        key, val = (p.strip() for p in line.split("=", 1))
        try:
            ix = _indexed(key)
        except ValueError:
            errors.append((no, f"bad index in {key!r}"))
            continue
        try:
            if ix is not None and section == "problem" and ix[0] in ("a", "k"):
                if ix[0] == "a":
                    coeffs[ix[1]] = _expr(val)
                else:
                    if len(ix[1]) != 1:
                        raise ConfigError("kernel index is a single order k")
                    kernels[ix[1][0]] = _expr(val)
                continue
            conv = KEYS[section].get(key)
            if conv is None:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            values[section][RENAMED.get((section, key), key)] = conv(val)
        except (ConfigError, ExprSyntaxError) as exc:
            errors.append((no, str(exc)))
    if coeffs:
        values["problem"]["coeffs"] = tuple(sorted(coeffs.items()))
    if kernels:
        values["problem"]["kernels"] = tuple(sorted(kernels.items()))
        values["problem"].setdefault("coeffs", ())
    cfg = None
    if not errors:
        cfg = Config(**{name: cls(**values[name]) for name, cls in SECTIONS.items()})
        errors.extend((0, msg) for msg in validate(cfg))
    if errors:
        lines = "; ".join(f"line {no}: {msg}" if no else msg for no, msg in errors)
        raise ConfigError(f"invalid config: {lines}", errors)
    return cfg


def validate(cfg: Config) -> list[str]:
    """Cross-field checks; returns messages (empty when valid)."""
    out = []
    g = cfg.grid
    if not 1 <= g.dim <= MAX_DIM:
        out.append(f"grid dim must lie in 1..{MAX_DIM}")
    if not g.L > 0:
        out.append("grid L must be positive")
    if g.n < 8 or g.n % 2:
        out.append("grid n must be even and >= 8")
    if cfg.space.M < 1:
        out.append("space M must be >= 1")
    if not cfg.space.q >= 1:
        out.append("space q must be >= 1")
    p = cfg.problem
    if p.order < 1:
        out.append("problem order must be >= 1")
    for idx, _ in p.coeffs:
        if len(idx) != g.dim:
            out.append(f"coefficient index {idx} does not match dim {g.dim}")
        elif sum(idx) > p.order:
            out.append(f"coefficient index {idx} exceeds the order {p.order}")
    for k, _ in p.kernels:
        if k > p.order:
            out.append(f"kernel index {k} exceeds the order {p.order}")
    if p.family == "convolution":
        if g.dim != 1:
            out.append("convolution problems are one-dimensional")
        if not p.lambda0 > 0:
            out.append("lambda0 must be positive for convolution problems")
    b = cfg.besov
    if not b.r >= 1:
        out.append("besov r must be >= 1")
    try:
        resolve_exponents(b.q1, b.q2, b.eta)
    except ConfigError as exc:
        out.append(str(exc))
    s = cfg.sweep
    if not 0 < s.sector < math.pi:
        out.append("sweep sector must lie in (0, pi)")
    if not 0 < s.lam_min <= s.lam_max:
        out.append("need 0 < lam_min <= lam_max")
    if s.n_mag < 1 or s.probes < 1:
        out.append("n_mag and probes must be >= 1")
    if s.rays is not None and any(abs(t) > s.sector for t in s.rays):
        out.append("ray angles must lie within the sector")
    if len(cfg.embed.alpha) != g.dim:
        out.append("embed alpha length must equal dim")
    if cfg.embed.l < 1:
        out.append("embed l must be >= 1")
    return out


# -- printing ---------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def format_config(cfg: Config) -> str:
    """Canonical text form; ``parse_config(format_config(c)) == c``."""
    inverse = {v: k for (_, k), v in RENAMED.items()}
    out = []
    for name in SECTIONS:
        sec = getattr(cfg, name)
        out.append(f"[{name}]")
        for f in fields(sec):
            v = getattr(sec, f.name)
            if name == "problem" and f.name == "coeffs":
                if not v:
                    out.append("coeffs = none")
                out.extend(f"a[{','.join(map(str, i))}] = {e}" for i, e in v)
                continue
            if name == "problem" and f.name == "kernels":
                out.extend(f"k[{i}] = {e}" for i, e in v)
                continue
            out.append(f"{inverse.get(f.name, f.name)} = {_fmt(v)}")
        out.append("")
    return "\n".join(out)


def with_seed(cfg: Config, seed: int | None) -> Config:
    return cfg if seed is None else replace(cfg, sweep=replace(cfg.sweep, seed=int(seed)))
