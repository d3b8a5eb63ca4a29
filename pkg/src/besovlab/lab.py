"""
Sweeps over lambda and probes that measure the constants of the coercive,
resolvent and embedding estimates.

A constant cannot be asserted in advance, so "uniform in lambda" is checked
as flatness: the sups of the ratio over each decade of ``|lambda|`` must
agree within a fixed factor (3 by default).
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .besov import AnisoParams, BesovParams, aniso_norm, besov_block_norms
from .dyadic import DyadicSystem, TruncationWarning
from .errors import BesovLabError, ConfigError
from .grid import FREQUENCY, Field, Grid, forward_ft, monomial_symbol, spectral_derivative
from .multipliers import ProbeEnsemble, young_convolution, _as_probes
from .solvers import ConvolutionFamily, EllipticFamily
from .spaces import DiagOperator, Sector, SequenceSpace, frac_power
from .symbols import check_sigma_forms, multi_indices

SCHEMA_VERSION = 1


@dataclass
class SweepPlan:
    """Lambda grid, probes and the exponent pair of a sweep.

    ``1/q2 = 1/q1 - 1/eta'`` with ``1 < q1 < eta' <= inf``.
    """

    sector: Sector
    probes: object
    q1: float = 2.0
    eta_prime: float = 4.0
    r: float = 2.0
    s: float = 1.0
    lam_min: float = 1.0
    lam_max: float = 1e4
    n_mag: int = 25
    rays: Sequence[float] | None = None

    def __post_init__(self):
        if not 1 < self.q1 < self.eta_prime:
            raise ConfigError(f"need 1 < q1 < eta' (q1 = {self.q1}, eta' = {self.eta_prime})")
        if not self.lam_min > 0 or not self.lam_max >= self.lam_min:
            raise ConfigError("need 0 < lam_min <= lam_max")
        if self.rays is None:
            self.rays = sorted({-self.sector.angle, 0.0, self.sector.angle})
        for t in self.rays:
            if abs(t) > self.sector.angle + 1e-12:
                raise ConfigError(f"ray angle {t} lies outside the sector")

    @property
    def q2(self) -> float:
        inv = 1.0 / self.q1 - 1.0 / self.eta_prime
        return np.inf if inv <= 0 else 1.0 / inv

    @property
    def eta(self) -> float:
        return np.inf if self.eta_prime == 1 else 1.0 / (1.0 - 1.0 / self.eta_prime)

    @property
    def besov_in(self) -> BesovParams:
        return BesovParams(self.q1, self.r, self.s)

    @property
    def besov_out(self) -> BesovParams:
        return BesovParams(self.q2, self.r, self.s)

    def lambdas(self) -> np.ndarray:
        mags = np.geomspace(self.lam_min, self.lam_max, self.n_mag)
        return np.array([m * np.exp(1j * t) for t in self.rays for m in mags])

    def probe_list(self) -> list[Field]:
        return _as_probes(self.probes)

    def metadata(self) -> dict:
        meta = {
            "sector_angle": self.sector.angle,
            "rays": [float(t) for t in self.rays],
            "lam_min": self.lam_min,
            "lam_max": self.lam_max,
            "n_mag": self.n_mag,
            "q1": self.q1,
            "q2": _num(self.q2),
            "eta_prime": _num(self.eta_prime),
            "r": _num(self.r),
            "s": self.s,
        }
        if isinstance(self.probes, ProbeEnsemble):
            meta["probes"] = self.probes.metadata()
            g = self.probes.grid
            meta["grid"] = {"dim": g.dim, "L": g.half_width, "n": g.samples}
        return meta


def _num(v):
    return "inf" if np.isinf(v) else float(v)


def decade_bins(mags: np.ndarray, lam_min: float, lam_max: float) -> np.ndarray:
    """Decade index of each ``|lambda|``; the top end point joins the last decade."""
    top = max(int(np.ceil(np.log10(lam_max / lam_min) - 1e-9)) - 1, 0)
    idx = np.floor(np.log10(mags / lam_min) + 1e-9).astype(int)
    return np.clip(idx, 0, top)


@dataclass
class SweepReport:
    """Ratio table with one row per lambda and one column per probe (or term).

    ``sup`` is the max of the table; ``per_decade`` the row sups grouped by
    decade of ``|lambda|``.
    """

    name: str
    lambdas: np.ndarray
    table: np.ndarray
    columns: list
    lam_min: float = 1.0
    lam_max: float = 1e4
    failures: list = field(default_factory=list)
    skipped: int = 0
    terms: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def sup(self) -> float:
        t = self.table[np.isfinite(self.table)]
        return float(t.max()) if t.size else float("nan")

    @property
    def row_sups(self) -> np.ndarray:
        with np.errstate(all="ignore"):
            out = np.full(self.table.shape[0], np.nan)
            for i, row in enumerate(self.table):
                fin = row[np.isfinite(row)]
                if fin.size:
                    out[i] = fin.max()
        return out

    @property
    def per_decade(self) -> dict:
        bins = decade_bins(np.abs(self.lambdas), self.lam_min, self.lam_max)
        rs = self.row_sups
        out = {}
        for b in np.unique(bins):
            vals = rs[(bins == b) & np.isfinite(rs)]
            if vals.size:
                lo = self.lam_min * 10.0**b
                out[f"[{lo:g}, {lo * 10:g})"] = float(vals.max())
        return out

    @property
    def decade_spread(self) -> float:
        """Largest over smallest per-decade sup (1 means perfectly flat)."""
        v = np.array(list(self.per_decade.values()))
        if v.size == 0 or v.min() <= 0:
            return float("inf")
        return float(v.max() / v.min())

    def uniform(self, factor: float = 3.0) -> bool:
        return bool(np.isfinite(self.sup) and self.decade_spread < factor)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "sup": self.sup,
            "per_decade": self.per_decade,
            "decade_spread": self.decade_spread,
            "lambdas": [[float(z.real), float(z.imag)] for z in self.lambdas],
            "columns": list(self.columns),
            "table": [[None if not np.isfinite(v) else float(v) for v in row] for row in self.table],
            "failures": self.failures,
            "skipped": self.skipped,
            "metadata": self.metadata,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda_re", "lambda_im", "abs_lambda", "arg_lambda"] + list(self.columns))
        for lam, row in zip(self.lambdas, self.table):
            w.writerow([repr(float(lam.real)), repr(float(lam.imag)), repr(float(abs(lam))),
                        repr(float(np.angle(lam)))] + ["" if not np.isfinite(v) else repr(float(v)) for v in row])
        return buf.getvalue()

    def plot_csv(self) -> str:
        """``|lambda|`` against the row sup, one block per ray."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["ray", "abs_lambda", "sup_ratio"])
        for lam, v in zip(self.lambdas, self.row_sups):
            w.writerow([repr(float(np.angle(lam))), repr(float(abs(lam))), "" if not np.isfinite(v) else repr(float(v))])
        return buf.getvalue()


# -- helpers ---------------------------------------------------------------------


def _besov_freq(vals: np.ndarray, grid: Grid, params: BesovParams, system: DyadicSystem, pw) -> float:
    norms, _ = besov_block_norms(Field(grid, vals, FREQUENCY), params.q, system, pw)
    w = 2.0 ** (np.arange(norms.size) * params.s) * norms
    return float(w.max()) if np.isinf(params.r) else float(np.sum(w**params.r) ** (1 / params.r))


def _prepare(plan: SweepPlan, pointwise):
    probes = plan.probe_list()
    if not probes:
        raise ConfigError("the sweep needs at least one probe")
    grid = probes[0].grid
    system = DyadicSystem(grid)
    fhs = [forward_ft(f).values for f in probes]
    rhs = [_besov_freq(fh, grid, plan.besov_in, system, pointwise) for fh in fhs]
    return probes, grid, system, fhs, rhs


# -- coercive sweeps -----------------------------------------------------------------


def coercive_sweep_elliptic(family: EllipticFamily, plan: SweepPlan, weighted: bool = True,
                            check: bool = True, name: str = "coercive_elliptic") -> SweepReport:
    """Ratio of ``sum_{|alpha| <= 2l} w_alpha |D^alpha u|_{B^s_{q2,r}} + |A u|_{B^s_{q2,r}}``
    to ``|f|_{B^s_{q1,r}}`` for every lambda and probe.

    ``w_alpha = |lambda|^{1 - |alpha|/2l}`` when ``weighted``, else 1.
    Per-term values are kept in ``report.terms``.
    """
    pw = family.A.space.pointwise()
    probes, grid, system, fhs, rhs = _prepare(plan, pw)
    if check:
        rep = family.check(grid)
        if not rep.ok:
            raise ConfigError(
                f"ellipticity fails: K^ = {rep.K_hat:.3e}, sector_ok = {rep.sector_ok}, "
                f"decaying = {rep.decaying}, worst xi = {rep.worst_xi}"
            )
    lams = plan.lambdas()
    for lam in lams:
        if not bool(family.sector.contains(lam)):
            raise ConfigError(f"lambda = {lam} lies outside the problem sector")
    two_l = family.spec.order
    alphas = multi_indices(grid.dim, two_l)
    monos = {a: monomial_symbol(grid, a)[..., None] for a in alphas}
    L = family.spec.L_values(grid.freq_points())[..., None]
    d = family.A.entries
    labels = [f"D^{a}" for a in alphas] + ["A u"]
    table = np.full((lams.size, len(probes)), np.nan)
    terms = np.full((lams.size, len(probes), len(labels)), np.nan)
    failures, skipped = [], 0
    for i, lam in enumerate(lams):
        P = d + lam + L
        for j, fh in enumerate(fhs):
            if rhs[j] == 0:
                skipped += 1
                continue
            try:
                if np.abs(P).min() < 1e-13:
                    raise ConfigError("near-singular pencil")
                uh = fh / P
                vals = []
                for a in alphas:
                    w = abs(lam) ** (1 - sum(a) / two_l) if weighted else 1.0
                    vals.append(w * _besov_freq(monos[a] * uh, grid, plan.besov_out, system, pw))
                vals.append(_besov_freq(d * uh, grid, plan.besov_out, system, pw))
            except BesovLabError as exc:
                failures.append({"lambda": [lam.real, lam.imag], "probe": j, "error": str(exc)})
                continue
            terms[i, j] = vals
            table[i, j] = sum(vals) / rhs[j]
    meta = plan.metadata()
    meta.update({"weighted": weighted, "order": two_l, "M": int(d.size)})
    return SweepReport(name, lams, table, [f"probe{j}" for j in range(len(probes))],
                       plan.lam_min, plan.lam_max, failures, skipped,
                       {"labels": labels, "values": terms, "rhs": np.array(rhs)}, meta)


def coercive_sweep_convolution(family: ConvolutionFamily, plan: SweepPlan,
                               name: str = "coercive_convolution") -> SweepReport:
    """Ratio of ``|lambda u| + sum_k |lambda|^{1-k/l} |a_k * u^{(k)}| + |A * u|``
    (all in ``B^s_{q2,r}``) to ``|f|_{B^s_{q1,r}}``.

    Per-term values are kept in ``report.terms`` with labels ``lambda u``,
    ``a_k*D^k`` and ``A u``.
    """
    if plan.lam_min < family.lam0:
        raise ConfigError(f"lam_min = {plan.lam_min} is below lambda_0 = {family.lam0}")
    pw = family.A.space.pointwise()
    probes, grid, system, fhs, rhs = _prepare(plan, pw)
    if grid.dim != 1:
        raise ConfigError("convolution sweeps are one-dimensional")
    lams = plan.lambdas()
    xi = grid.freq_axis()
    l = family.spec.order
    ks = sorted(family.spec.kernels)
    mult = {k: (family.spec.kernels[k].transform(xi) * (1j * xi) ** k)[:, None] for k in ks}
    ahat = family.ahat.transform(xi)[:, None]
    Ahat = ahat * family.A.entries
    L = family.spec.L_values(xi)[:, None]
    labels = ["lambda u"] + [f"a_{k}*D^{k}" for k in ks] + ["A u"]
    table = np.full((lams.size, len(probes)), np.nan)
    terms = np.full((lams.size, len(probes), len(labels)), np.nan)
    failures, skipped = [], 0
    for i, lam in enumerate(lams):
        P = Ahat + lam + L
        for j, fh in enumerate(fhs):
            if rhs[j] == 0:
                skipped += 1
                continue
            try:
                if np.abs(P).min() < 1e-13:
                    raise ConfigError("near-singular pencil")
                uh = fh / P
                vals = [abs(lam) * _besov_freq(uh, grid, plan.besov_out, system, pw)]
                for k in ks:
                    w = abs(lam) ** (1 - k / l)
                    vals.append(w * _besov_freq(mult[k] * uh, grid, plan.besov_out, system, pw))
                vals.append(_besov_freq(Ahat * uh, grid, plan.besov_out, system, pw))
            except BesovLabError as exc:
                failures.append({"lambda": [lam.real, lam.imag], "probe": j, "error": str(exc)})
                continue
            terms[i, j] = vals
            table[i, j] = sum(vals) / rhs[j]
    meta = plan.metadata()
    meta.update({"order": l, "lambda_0": family.lam0, "M": int(family.A.entries.size)})
    return SweepReport(name, lams, table, [f"probe{j}" for j in range(len(probes))],
                       plan.lam_min, plan.lam_max, failures, skipped,
                       {"labels": labels, "values": terms, "rhs": np.array(rhs)}, meta)


def system_sweep(weights: str, M: int, family_spec, plan: SweepPlan, weighted: bool = True,
                 q: float = 2.0, sector: Sector | None = None, phi1: float = np.pi / 4) -> SweepReport:
    """Coercive sweep for the diagonal infinite system truncated at ``M``.

    ``weighted=False`` is the plain sum of derivative norms; with
    ``weighted=True`` each term carries ``|lambda|^{1 - |alpha|/2l}``.
    """
    A = DiagOperator(SequenceSpace.from_generator(q, M, weights))
    fam = EllipticFamily(family_spec, A, sector or plan.sector, phi1)
    rep = coercive_sweep_elliptic(fam, plan, weighted=weighted,
                                  name="system_weighted" if weighted else "system")
    rep.metadata["weights"] = weights
    return rep


# -- resolvent and semigroup -----------------------------------------------------------


def resolvent_sweep(family: EllipticFamily, plan: SweepPlan, weighted: bool = True,
                    terms: str = "full", norm: str = "besov", shift: float = 0.0,
                    check: bool = True, name: str = "resolvent") -> SweepReport:
    """Probe estimates of operator norms built from ``R = (Q + shift + lambda)^{-1}``.

    ``terms = 'full'``: ``sum_alpha w_alpha |D^alpha R| + |A R|`` with each
    operator norm estimated separately (columns hold the per-term sups and
    the last column their sum).  ``terms = 'lambda'``: ``|lambda R|`` only.
    ``norm`` is ``'besov'`` (``B^s_{q1,r} -> B^s_{q2,r}``) or ``'lq'``
    (``L_q1 -> L_q1``).
    """
    pw = family.A.space.pointwise()
    probes = plan.probe_list()
    grid = probes[0].grid
    if check and terms == "full":
        rep = family.check(grid)
        if not rep.ok:
            raise ConfigError(f"ellipticity fails at xi = {rep.worst_xi}")
    system = DyadicSystem(grid)
    fhs = [forward_ft(f).values for f in probes]

    def nrm(vals, params):
        if norm == "besov":
            return _besov_freq(vals, grid, params, system, pw)
        from .grid import inverse_ft, lq_norm

        return lq_norm(inverse_ft(Field(grid, vals, FREQUENCY)), params.q, pw)

    if norm not in ("besov", "lq"):
        raise ConfigError(f"unknown norm {norm!r}")
    p_in = plan.besov_in
    p_out = plan.besov_out if norm == "besov" else plan.besov_in
    dens = [nrm(fh, p_in) for fh in fhs]
    lams = plan.lambdas()
    two_l = family.spec.order
    L = family.spec.L_values(grid.freq_points())[..., None]
    d = family.A.entries
    if terms == "full":
        alphas = multi_indices(grid.dim, two_l)
        ops = [(f"D^{a}", monomial_symbol(grid, a)[..., None], a) for a in alphas]
        ops.append(("A R", d * np.ones(grid.shape + (1,)), None))
    elif terms == "lambda":
        ops = [("lambda R", None, None)]
    else:
        raise ConfigError(f"unknown term set {terms!r}")
    labels = [o[0] for o in ops] + (["sum"] if terms == "full" else [])
    table = np.full((lams.size, len(labels)), np.nan)
    failures = []
    for i, lam in enumerate(lams):
        P = d + shift + lam + L
        if np.abs(P).min() < 1e-13:
            failures.append({"lambda": [lam.real, lam.imag], "error": "near-singular pencil"})
            continue
        row = []
        for label, mono, a in ops:
            if mono is None:
                opv = lam / P
            else:
                w = abs(lam) ** (1 - sum(a) / two_l) if (a is not None and weighted) else 1.0
                opv = w * mono / P
            best = 0.0
            for fh, den in zip(fhs, dens):
                if den > 0:
                    best = max(best, nrm(opv * fh, p_out) / den)
            row.append(best)
        if terms == "full":
            row.append(sum(row))
        table[i] = row
    meta = plan.metadata()
    meta.update({"weighted": weighted, "terms": terms, "norm": norm, "shift": shift})
    return SweepReport(name, lams, table, labels, plan.lam_min, plan.lam_max, failures, 0, {}, meta)


def semigroup_ray_check(family: EllipticFamily, a: float, phi: float, plan: SweepPlan,
                        n_rays: int = 5) -> SweepReport:
    """``sup |lambda (Q + a + lambda)^{-1}|`` (``L_q1 -> L_q1``) over rays ``|arg lambda| <= phi``.

    A finite sup on a sector wider than the right half-plane is the
    numerical certificate of analytic semigroup generation.
    """
    if not np.pi / 2 < phi < np.pi:
        raise ConfigError("phi must lie in (pi/2, pi)")
    if not a >= 0:
        raise ConfigError("shift a must be >= 0")
    if a == 0 and family.A.entries.min() <= 0:
        raise ConfigError("a = 0 needs strictly positive A")
    sector = Sector(phi)
    rays = list(np.linspace(-phi, phi, n_rays))
    sub = SweepPlan(sector, plan.probes, plan.q1, plan.eta_prime, plan.r, plan.s,
                    plan.lam_min, plan.lam_max, plan.n_mag, rays)
    fam = EllipticFamily(family.spec, family.A, sector, family.phi1)
    rep = resolvent_sweep(fam, sub, terms="lambda", norm="lq", shift=a, check=False, name="semigroup")
    rep.metadata.update({"a": a, "phi": phi})
    return rep


# -- embeddings ----------------------------------------------------------------------


def embedding_sweep(alpha: Sequence[int], A: DiagOperator, l: int, plan: SweepPlan,
                    kernel: Field | None = None, graph_p: float = 2.0) -> SweepReport:
    """``|D^alpha u|_{B^s_{q2,r}(E(A^{1-x}))} / |u|_{B^{l,s}_{q1,r}(E(A), E)}`` over probes.

    ``x = (|alpha| + sigma)/l`` with ``sigma = ceil(N (1 + 1/q2 - 1/q1)) + 1``.
    With ``kernel`` a second column holds the ratio for ``a * D^alpha u`` and
    ``metadata['kernel_l1']`` its ``L_1`` norm.
    """
    probes = plan.probe_list()
    grid = probes[0].grid
    N = grid.dim
    alpha = tuple(int(v) for v in alpha)
    if len(alpha) != N:
        raise ConfigError("multi-index length differs from the grid dimension")
    sigma = check_sigma_forms(N, plan.q1, plan.q2, plan.eta)
    x = (sum(alpha) + sigma) / l
    if x > 1 + 1e-12:
        raise ConfigError(f"x = (|alpha| + sigma)/l = {x} > 1; the embedding needs x <= 1")
    Ax = frac_power(A, 1.0 - x)
    target = Ax.pointwise_graph(1.0, graph_p)
    system = DyadicSystem(grid)
    params = AnisoParams(l, plan.besov_in, A, graph_p)
    out = plan.besov_out
    cols = ["plain"] + (["kernel"] if kernel is not None else [])
    table = np.full((1, len(probes), len(cols)), np.nan)
    skipped, truncated = 0, 0
    for j, u in enumerate(probes):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", TruncationWarning)
            den = aniso_norm(u, params, system)
        truncated += bool(caught)
        if den == 0:
            skipped += 1
            continue
        du = spectral_derivative(u, alpha)
        fh = forward_ft(du).values
        table[0, j, 0] = _besov_freq(fh, grid, out, system, target) / den
        if kernel is not None:
            kd = forward_ft(young_convolution(kernel, du)).values
            table[0, j, 1] = _besov_freq(kd, grid, out, system, target) / den
    meta = plan.metadata()
    meta.update({
        "alpha": list(alpha), "l": l, "sigma": sigma, "x": x,
        "fractional_power_is_identity": bool(np.all(Ax.entries == 1.0)),
        "truncated_probes": truncated,
    })
    if kernel is not None:
        meta["kernel_l1"] = float(grid.cell_volume * np.abs(kernel.values).sum(axis=tuple(range(N))).max())
    flat = table.reshape(1, -1)
    labels = [f"probe{j}:{c}" for j in range(len(probes)) for c in cols]
    rep = SweepReport("embedding", np.array([0j]), flat, labels, 1.0, 10.0, [], skipped,
                      {"by_column": {c: table[0, :, k] for k, c in enumerate(cols)}}, meta)
    return rep
