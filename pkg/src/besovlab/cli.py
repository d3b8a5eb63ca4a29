"""
Command line entry point.

``besovlab <subcommand> --config <path> [--out <dir>] [--seed <int>] [--format json|csv]``

Exit codes: 0 success, 1 a checked bound failed numerically, 2 configuration
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .besov import BesovParams, besov_norm_difference, besov_norm_fourier
from .config import Config, format_config, parse_config, with_seed
from .dyadic import DyadicSystem, TruncationWarning
from .errors import BesovLabError, CheckFailure, ConfigError, NumericError
from .expr import parse_expr
from .grid import Field, Grid, field_to_json, lq_norm
from .lab import (
    SCHEMA_VERSION,
    SweepPlan,
    coercive_sweep_convolution,
    coercive_sweep_elliptic,
    embedding_sweep,
    resolvent_sweep,
    system_sweep,
)
from .multipliers import ProbeEnsemble
from .solvers import (
    ConvolutionFamily,
    ConvolutionProblem,
    EllipticFamily,
    EllipticProblem,
    InfiniteSystemProblem,
    conv_residual_field,
    residual_field,
    solve_convolution,
    solve_elliptic,
    solve_infinite_system,
)
from .spaces import DiagOperator, Sector, SequenceSpace, positivity_constant
from .symbols import (
    Kernel,
    PolySymbolSpec,
    build_conv_symbols,
    build_elliptic_symbols,
    condition51_check,
    ellipticity_check,
    hormander_constant,
    mikhlin_constant,
    symbol_from_expr,
)

SUBCOMMANDS = ("norm", "solve", "check-symbol", "sweep", "embed", "report")
OK, CHECK_FAILED, CONFIG_ERROR, NUMERIC_ERROR = 0, 1, 2, 3
RESIDUAL_TOL = 1e-9
UNIFORM_FACTOR = 3.0
SIGMA1_SLACK = 1e-9


# -- builders -------------------------------------------------------------------------


def build_grid(cfg: Config) -> Grid:
    return Grid(cfg.grid.dim, cfg.grid.L, cfg.grid.n)


def build_operator(cfg: Config) -> DiagOperator:
    return DiagOperator(SequenceSpace.from_generator(cfg.space.q, cfg.space.M, cfg.space.weight))


def build_spec(cfg: Config) -> PolySymbolSpec:
    p = cfg.problem
    if p.family == "convolution":
        if not p.kernels:
            raise ConfigError("convolution problems need kernels k[...] = expr")
        return PolySymbolSpec(p.order, 1, kernels={k: Kernel(e, name=f"a{k}") for k, e in p.kernels})
    coeffs = {}
    for idx, e in p.coeffs:
        ex = parse_expr(e)
        if ex.variables:
            raise ConfigError(f"coefficient a{list(idx)} must be constant, got {e!r}")
        coeffs[idx] = complex(ex.evaluate())
    return PolySymbolSpec(p.order, cfg.grid.dim, coeffs)


def field_from_expr(text: str, grid: Grid, components: int = 1) -> Field:
    """Sample an expression in ``x`` (1-D) or ``x1..x3``; broadcast over components."""
    e = parse_expr(text)
    pts = grid.points()
    env = {f"x{k + 1}": pts[..., k] for k in range(grid.dim)}
    if grid.dim == 1:
        env["x"] = pts[..., 0]
    unknown = e.variables - set(env)
    if unknown:
        raise ConfigError(f"field expression uses unknown variables {sorted(unknown)}")
    vals = np.broadcast_to(np.asarray(e.evaluate(env), dtype=complex), grid.shape)
    return Field(grid, vals[..., None] * np.ones(components))


def build_probes(cfg: Config, grid: Grid, components: int) -> ProbeEnsemble:
    counts = {f: cfg.sweep.probes for f in cfg.sweep.families}
    return ProbeEnsemble(grid, components, seed=cfg.sweep.seed, counts=counts)


def build_plan(cfg: Config, probes, lam_min: float | None = None) -> SweepPlan:
    ex = cfg.exponents
    s = cfg.sweep
    return SweepPlan(Sector(s.sector), probes, ex.q1, ex.eta_prime, cfg.besov.r, cfg.besov.s,
                     s.lam_min if lam_min is None else lam_min, s.lam_max, s.n_mag,
                     list(s.rays) if s.rays is not None else None)


def provenance(cfg: Config) -> dict:
    g = cfg.grid
    return {
        "package_version": __version__,
        "config": format_config(cfg),
        "seed": cfg.sweep.seed,
        "grid": {"dim": g.dim, "L": g.L, "n": g.n},
        "tolerances": {
            "residual": RESIDUAL_TOL,
            "uniform_factor": UNIFORM_FACTOR,
            "sigma1_slack": SIGMA1_SLACK,
        },
    }


# -- subcommands ---------------------------------------------------------------------


def cmd_norm(cfg: Config) -> tuple[int, dict, dict]:
    grid = build_grid(cfg)
    f = field_from_expr(cfg.field.expr, grid)
    params = BesovParams(cfg.besov.q1, cfg.besov.r, cfg.besov.s)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TruncationWarning)
        fourier = besov_norm_fourier(f, params, DyadicSystem(grid))
    diff = besov_norm_difference(f, params, report=True)
    body = {
        "field": cfg.field.expr,
        "params": {"q": params.q, "r": params.r, "s": params.s},
        "fourier": fourier,
        "difference": diff.value,
        "difference_half_density": diff.half_density_value,
        "ratio": diff.value / fourier if fourier else None,
        "truncated": bool(caught),
    }
    return OK, body, {}


def cmd_solve(cfg: Config) -> tuple[int, dict, dict]:
    grid = build_grid(cfg)
    spec = build_spec(cfg)
    A = build_operator(cfg)
    p = cfg.problem
    lam = p.lam_complex
    tables = {}
    if p.family == "system":
        Ms = sorted({max(1, cfg.space.M >> k) for k in range(4)})
        prob = InfiniteSystemProblem(cfg.space.weight, Ms, spec, lam, field_from_expr(cfg.field.expr, grid),
                                     "1", cfg.space.q)
        res = solve_infinite_system(prob)
        c = res.certificate
        body = {"lambda": [lam.real, lam.imag], "truncation_table": res.table, "monotone": res.monotone,
                "certificate": {"partial_sum": c.partial_sum, "tail_exponent": c.tail_exponent,
                                "tail_bound": c.tail_bound, "certified": c.certified}}
        return (OK if res.monotone else CHECK_FAILED), body, tables
    rhs = field_from_expr(cfg.field.expr, grid, A.entries.size)
    if p.family == "elliptic":
        prob = EllipticProblem(spec, A, lam, rhs, Sector(cfg.sweep.sector), p.phi1)
        u = solve_elliptic(prob)
        r = residual_field(prob, u)
    else:
        prob = ConvolutionProblem(spec, Kernel(p.ahat, name="ahat"), A, lam, rhs, p.lambda0, p.phi1)
        u = solve_convolution(prob)
        r = conv_residual_field(prob, u)
    res = lq_norm(r, 2.0)
    fn = lq_norm(rhs, 2.0)
    rel = res / fn if fn else 0.0
    body = {"lambda": [lam.real, lam.imag], "residual": res, "rhs_norm": fn, "relative_residual": rel,
            "tolerance": RESIDUAL_TOL, "solution_norm": lq_norm(u, 2.0)}
    tables["solution.json"] = field_to_json(u)
    tables["residual.json"] = field_to_json(r)
    return (OK if rel <= RESIDUAL_TOL else CHECK_FAILED), body, tables


def _lambda_grid(cfg: Config) -> np.ndarray:
    s = cfg.sweep
    rays = s.rays if s.rays is not None else sorted({-s.sector, 0.0, s.sector})
    mags = np.geomspace(s.lam_min, s.lam_max, s.n_mag)
    return np.array([m * np.exp(1j * t) for t in rays for m in mags])


def cmd_check_symbol(cfg: Config) -> tuple[int, dict, dict]:
    grid = build_grid(cfg)
    A = build_operator(cfg)
    sym = cfg.symbol
    if sym.expr:
        m = symbol_from_expr(sym.expr, grid.dim, entries=A.entries, q=A.space.q)
        mik = mikhlin_constant(m, grid, order=sym.order, eta=sym.eta, p=sym.p)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            hor = hormander_constant(m, grid, p=sym.p, order=sym.order, eta=sym.eta)
        body = {"symbol": sym.expr, "mikhlin": mik, "hormander": hor.value, "hormander_skipped": hor.skipped}
        return OK, body, {}
    spec = build_spec(cfg)
    p = cfg.problem
    lams = _lambda_grid(cfg)
    if p.family == "convolution":
        rep = condition51_check(spec, grid, p.phi1)
        if not rep.ok:
            raise ConfigError(f"kernel condition fails: C^ = {rep.C_hat:.3e} at xi = {rep.worst_xi}")
        ahat = Kernel(p.ahat, name="ahat")
        rows = []
        for lam in lams:
            if abs(lam) < p.lambda0:
                continue
            s0, s1, s2 = build_conv_symbols(spec, ahat, A, lam, None, p.phi1)
            rows.append([lam, s0.sup_norm(grid), s1.sup_norm(grid), s2.sup_norm(grid)])
        names = ["sigma0", "sigma1", "sigma2"]
        body = {"condition": {"C_hat": rep.C_hat, "excluded": rep.excluded}}
        code = OK
    else:
        rep = ellipticity_check(spec, p.phi1, grid)
        if not rep.ok:
            raise ConfigError(
                f"ellipticity fails: K^ = {rep.K_hat:.3e}, sector_ok = {rep.sector_ok}, "
                f"decaying = {rep.decaying} at xi = {rep.worst_xi}"
            )
        sector = Sector(cfg.sweep.sector)
        M_hat = positivity_constant(A, sector)
        rows = []
        for lam in lams:
            s1, s2 = build_elliptic_symbols(spec, A, lam, p.phi1, grid, sector)
            rows.append([lam, s1.sup_norm(grid), s2.sup_norm(grid)])
        names = ["sigma1", "sigma2"]
        bound = 1.0 + M_hat + SIGMA1_SLACK
        worst = max(r[1] for r in rows)
        code = OK if worst <= bound else CHECK_FAILED
        body = {"ellipticity": {"K_hat": rep.K_hat, "max_arg": rep.max_arg},
                "positivity_constant": M_hat, "sigma1_bound": bound, "sigma1_sup": worst}
    body["sups"] = {n: max(r[k + 1] for r in rows) for k, n in enumerate(names)}
    body["lambdas"] = [[float(r[0].real), float(r[0].imag)] for r in rows]
    body["table"] = {n: [float(r[k + 1]) for r in rows] for k, n in enumerate(names)}
    return code, body, {}


def _sweep_tables(rep, cfg: Config) -> dict:
    out = {f"{rep.name}.csv": rep.to_csv()}
    if cfg.output.plot:
        out[f"{rep.name}_plot.csv"] = rep.plot_csv()
    return out


def cmd_sweep(cfg: Config) -> tuple[int, dict, dict]:
    grid = build_grid(cfg)
    spec = build_spec(cfg)
    A = build_operator(cfg)
    p = cfg.problem
    sector = Sector(cfg.sweep.sector)
    probes = build_probes(cfg, grid, A.entries.size)
    reports = []
    if p.family == "elliptic":
        fam = EllipticFamily(spec, A, sector, p.phi1)
        plan = build_plan(cfg, probes)
        reports.append((coercive_sweep_elliptic(fam, plan), True))
        reports.append((resolvent_sweep(fam, plan), True))
    elif p.family == "convolution":
        rep = condition51_check(spec, grid, p.phi1)
        if not rep.ok:
            raise ConfigError(f"kernel condition fails: C^ = {rep.C_hat:.3e} at xi = {rep.worst_xi}")
        fam = ConvolutionFamily(spec, Kernel(p.ahat, name="ahat"), A, p.lambda0, p.phi1)
        plan = build_plan(cfg, probes, lam_min=max(cfg.sweep.lam_min, p.lambda0))
        reports.append((coercive_sweep_convolution(fam, plan), True))
    else:
        plan = build_plan(cfg, probes)
        reports.append((system_sweep(cfg.space.weight, cfg.space.M, spec, plan, True, cfg.space.q,
                                     sector, p.phi1), True))
        reports.append((system_sweep(cfg.space.weight, cfg.space.M, spec, plan, False, cfg.space.q,
                                     sector, p.phi1), False))
        fam = EllipticFamily(spec, A, sector, p.phi1)
        reports.append((resolvent_sweep(fam, plan, name="system_resolvent"), True))
    code, body, tables = OK, {"sweeps": {}}, {}
    for rep, needs_flat in reports:
        d = rep.to_dict()
        d["checked_uniform"] = needs_flat
        d["uniform"] = rep.uniform(UNIFORM_FACTOR)
        if not math.isfinite(rep.sup) or (needs_flat and not d["uniform"]):
            code = CHECK_FAILED
        body["sweeps"][rep.name] = d
        tables.update(_sweep_tables(rep, cfg))
    return code, body, tables


def cmd_embed(cfg: Config) -> tuple[int, dict, dict]:
    grid = build_grid(cfg)
    A = build_operator(cfg)
    probes = build_probes(cfg, grid, A.entries.size)
    plan = build_plan(cfg, probes)
    kernel = field_from_expr(cfg.embed.kernel, grid) if cfg.embed.kernel else None
    rep = embedding_sweep(cfg.embed.alpha, A, cfg.embed.l, plan, kernel)
    d = rep.to_dict()
    cols = rep.terms["by_column"]
    plain = cols["plain"]
    code = OK if np.all(np.isfinite(plain[~np.isnan(plain)])) and math.isfinite(rep.sup) else CHECK_FAILED
    if kernel is not None:
        bound = rep.metadata["kernel_l1"] * plain + 1e-9
        ok = bool(np.all((cols["kernel"] <= bound) | np.isnan(plain)))
        d["kernel_bound_holds"] = ok
        code = code if ok else CHECK_FAILED
    d["plain_sup"] = float(np.nanmax(plain))
    return code, d, _sweep_tables(rep, cfg)


def cmd_report(cfg: Config) -> tuple[int, dict, dict]:
    code, body, tables = OK, {}, {}
    for name in SUBCOMMANDS[:-1]:
        try:
            c, b, t = COMMANDS[name](cfg)
        except BesovLabError as exc:
            c, b, t = exit_code(exc), {"error": str(exc)}, {}
        body[name] = {"exit_code": c, **b}
        tables.update({f"{name}_{k}": v for k, v in t.items()})
        code = max(code, c)
    return code, body, tables


COMMANDS = {
    "norm": cmd_norm,
    "solve": cmd_solve,
    "check-symbol": cmd_check_symbol,
    "sweep": cmd_sweep,
    "embed": cmd_embed,
    "report": cmd_report,
}


# -- driver -----------------------------------------------------------------------


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, CheckFailure):
        return CHECK_FAILED
    if isinstance(exc, NumericError):
        return NUMERIC_ERROR
    if isinstance(exc, BesovLabError):
        return CONFIG_ERROR
    raise exc


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(v, complex):
        return [_jsonable(v.real), _jsonable(v.imag)]
    return v


def dumps_report(report: dict) -> str:
    return json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"


def run_subcommand(name: str, cfg: Config, timestamp: str | None = None) -> tuple[int, dict, dict]:
    """Run ``name`` and return ``(exit code, report, extra artifacts)``.

    Library errors are mapped onto exit codes and recorded in the report.
    """
    if name not in COMMANDS:
        raise ConfigError(f"unknown subcommand {name!r}; choose from {list(SUBCOMMANDS)}")
    report = {
        "schema_version": SCHEMA_VERSION,
        "subcommand": name,
        "timestamp": timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "provenance": provenance(cfg),
    }
    try:
        with np.errstate(all="ignore"):
            code, body, artifacts = COMMANDS[name](cfg)
    except BesovLabError as exc:
        code, body, artifacts = exit_code(exc), {}, {}
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, ConfigError) and len(exc.errors) > 1:
            report["error"]["errors"] = [list(e) if isinstance(e, tuple) else e for e in exc.errors]
    report["exit_code"] = code
    report["result"] = body
    return code, report, artifacts


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="besovlab", description="Besov-space estimate laboratory")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, help="path of the config file")
    ap.add_argument("--out", default=None, help="output directory (default: [output] dir)")
    ap.add_argument("--seed", type=int, default=None, help="probe seed, overrides [sweep] seed")
    ap.add_argument("--format", choices=("json", "csv"), default=None,
                    help="json writes the report only; csv adds the ratio tables")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
        cfg = with_seed(parse_config(text), args.seed)
    except (OSError, UnicodeDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return CONFIG_ERROR
    except ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e[1] if isinstance(e, tuple) else e}" if not isinstance(e, tuple) or not e[0]
                  else f"error: line {e[0]}: {e[1]}", file=sys.stderr)
        return CONFIG_ERROR
    code, report, artifacts = run_subcommand(args.subcommand, cfg)
    out = Path(args.out or cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    fmt = args.format or cfg.output.format
    name = cfg.output.name
    (out / f"{name}.json").write_text(dumps_report(report), encoding="utf-8")
    for fname, content in artifacts.items():
        if fname.endswith(".csv") and fmt != "csv":
            continue
        (out / f"{name}_{fname}").write_text(content, encoding="utf-8")
    if "error" in report:
        print(f"error: {report['error']['message']}", file=sys.stderr)
    print(f"{args.subcommand}: exit {code}; report at {out / f'{name}.json'}")
    return code


if __name__ == "__main__":
    sys.exit(main())
