"""
Fourier multipliers, convolutions and probe-based norm estimates.

Operator norms between L_q or Besov spaces are estimated from below by the
supremum of ``|Tf| / |f|`` over a seeded probe ensemble.  Checks built on
these estimates are one-sided: a measured ratio above a proven bound is a
falsification, a ratio below it is only consistent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .besov import BesovParams, besov_block_norms
from .dyadic import DyadicSystem, phi_k
from .errors import ConfigError, DataError, UsageError
from .grid import FREQUENCY, PHYSICAL, Field, Grid, check_box_decay, forward_ft, inverse_ft, lq_norm
from .symbols import Symbol

FAMILIES = ("gaussian", "band", "trig", "mix")


def _unit(rng, M: int) -> np.ndarray:
    v = rng.normal(size=M) + 1j * rng.normal(size=M)
    return v / np.linalg.norm(v)


@dataclass
class ProbeEnsemble:
    """Seeded probe corpus on ``grid`` with ``components`` E-coordinates.

    Families
    --------
    gaussian
        ``exp(-|x - c|^2 / (2 w^2))`` with ``|c_i| <= L/4``.
    band
        Gaussian-windowed plane waves centered in a dyadic annulus.
    trig
        Random trigonometric polynomials under a Gaussian envelope.
    mix
        Sums of two or three profiles, each with its own random direction
        in E, so the probe is not a scalar times a fixed vector.

    Every probe has sup norm 1 and decays below ``1e-14`` at the box faces.
    """

    grid: Grid
    components: int = 1
    seed: int = 0
    counts: dict = field(default_factory=lambda: {f: 6 for f in FAMILIES})

    def __post_init__(self):
        unknown = set(self.counts) - set(FAMILIES)
        if unknown:
            raise ConfigError(f"unknown probe families {sorted(unknown)}")
        L = self.grid.half_width
        self.w_max = 0.75 * L / 9.0
        self.w_min = 8.0 / self.grid.nyquist
        if self.w_min >= self.w_max:
            raise ConfigError("grid too coarse for the probe families; increase n or L")
        self._probes: list[Field] | None = None
        self._labels: list[str] = []

    @classmethod
    def corpus(cls, grid: Grid, components: int = 1, count: int = 50, seed: int = 0) -> "ProbeEnsemble":
        """``count`` probes spread as evenly as possible over the families."""
        base, extra = divmod(count, len(FAMILIES))
        counts = {f: base + (i < extra) for i, f in enumerate(FAMILIES)}
        return cls(grid, components, seed, counts)

    def _gaussian(self, rng, x):
        L = self.grid.half_width
        c = rng.uniform(-L / 4, L / 4, size=self.grid.dim)
        w = rng.uniform(max(self.w_min, 0.3 * self.w_max), self.w_max)
        return np.exp(-np.sum((x - c) ** 2, axis=-1) / (2 * w**2))

    def _band(self, rng, x):
        from .dyadic import kmax_for_grid

        kmax = kmax_for_grid(self.grid)
        k = int(rng.integers(1, max(kmax, 2)))
        direction = rng.normal(size=self.grid.dim)
        direction /= np.linalg.norm(direction)
        kappa = 1.5 * 2.0 ** (k - 1) * direction
        # window wide enough that the spectrum stays inside the annulus
        w = min(self.w_max, max(self.w_min, 6.0 / 2.0 ** (k - 1)))
        c = rng.uniform(-self.grid.half_width / 8, self.grid.half_width / 8, size=self.grid.dim)
        env = np.exp(-np.sum((x - c) ** 2, axis=-1) / (2 * w**2))
        return env * np.exp(1j * (x @ kappa + rng.uniform(0, 2 * np.pi)))

    def _trig(self, rng, x):
        w = rng.uniform(max(self.w_min, 0.5 * self.w_max), self.w_max)
        env = np.exp(-np.sum(x**2, axis=-1) / (2 * w**2))
        poly = np.zeros(x.shape[:-1], dtype=complex)
        for _ in range(int(rng.integers(2, 5))):
            freq = rng.integers(-3, 4, size=self.grid.dim) * 0.5
            coef = rng.normal() + 1j * rng.normal()
            poly = poly + coef * np.exp(1j * (x @ freq))
        return env * poly

    def _build(self):
        rng = np.random.default_rng(self.seed)
        x = self.grid.points()
        M = self.components
        makers = {"gaussian": self._gaussian, "band": self._band, "trig": self._trig}
        probes, labels = [], []
        for fam in FAMILIES:
            for _ in range(self.counts.get(fam, 0)):
                if fam == "mix":
                    vals = sum(makers[rng.choice(["gaussian", "band", "trig"])](rng, x)[..., None]
                               * _unit(rng, M) for _ in range(int(rng.integers(2, 4))))
                else:
                    vals = makers[fam](rng, x)[..., None] * _unit(rng, M)
                peak = np.sqrt((np.abs(vals) ** 2).sum(axis=-1)).max()
                f = Field(self.grid, vals / peak)
                if check_box_decay(f) > 1e-14:
                    raise DataError(f"probe {len(probes)} ({fam}) does not decay at the box faces")
                probes.append(f)
                labels.append(fam)
        self._probes, self._labels = probes, labels

    @property
    def probes(self) -> list[Field]:
        if self._probes is None:
            self._build()
        return self._probes

    @property
    def labels(self) -> list[str]:
        if self._probes is None:
            self._build()
        return self._labels

    def __iter__(self):
        return iter(self.probes)

    def __len__(self):
        return len(self.probes)

    def metadata(self) -> dict:
        return {"seed": self.seed, "counts": dict(self.counts), "components": self.components}


def _as_probes(probes) -> list[Field]:
    if isinstance(probes, ProbeEnsemble):
        return probes.probes
    if isinstance(probes, Field):
        return [probes]
    return list(probes)


# -- operators ---------------------------------------------------------------------


def _apply_values(m: Symbol, xi: np.ndarray, fh: np.ndarray) -> np.ndarray:
    mv = m.evaluate(xi)
    if m.dense:
        if mv.shape[-1] != fh.shape[-1]:
            raise UsageError(f"symbol size {mv.shape[-1]} does not match {fh.shape[-1]} components")
        return np.einsum("...ij,...j->...i", mv, fh)
    if mv.shape[-1] not in (1, fh.shape[-1]):
        raise UsageError(f"symbol size {mv.shape[-1]} does not match {fh.shape[-1]} components")
    return mv * fh


def apply_multiplier(m: Symbol, f: Field) -> Field:
    """``T_m f = F^-1[m(xi) F f(xi)]`` with ``m(xi)`` acting on E."""
    if f.domain != PHYSICAL:
        raise UsageError("apply_multiplier expects a physical-domain field")
    if m.dim != f.grid.dim:
        raise UsageError("symbol and field dimensions differ")
    fh = forward_ft(f)
    return inverse_ft(fh.replace(_apply_values(m, f.grid.freq_points(), fh.values)))


def young_convolution(k: Field, f: Field) -> Field:
    """``(K f)(t) = int k(t - s) f(s) ds`` on the periodic grid.

    ``k`` is scalar (one component) or diagonal (one kernel per component).
    """
    if k.grid != f.grid:
        raise UsageError("kernel and field live on different grids")
    if k.domain != PHYSICAL or f.domain != PHYSICAL:
        raise UsageError("young_convolution expects physical-domain fields")
    if k.components not in (1, f.components):
        raise UsageError("kernel must be scalar or match the field components")
    kh, fh = forward_ft(k), forward_ft(f)
    return inverse_ft(fh.replace(kh.values * fh.values))


def block_identity_defect(m: Symbol, f: Field, k: int, system: DyadicSystem | None = None) -> float:
    """``|phi_k^vee * T_m f - T_{m psi_k}(phi_k^vee * f)|_inf / |f|_inf``
    with ``psi_k = phi_{k-1} + phi_k + phi_{k+1}``."""
    system = system or DyadicSystem(f.grid)
    xi = f.grid.freq_points()
    fh = forward_ft(f).values
    wk = system.weights(k)[..., None]
    lhs = inverse_ft(Field(f.grid, wk * _apply_values(m, xi, fh), FREQUENCY)).values
    mpsi = m.times(lambda x: sum(phi_k(x, j) for j in (k - 1, k, k + 1)))
    rhs = inverse_ft(Field(f.grid, _apply_values(mpsi, xi, wk * fh), FREQUENCY)).values
    scale = max(np.abs(f.values).max(), np.finfo(float).tiny)
    return float(np.abs(lhs - rhs).max() / scale)


# -- estimates ---------------------------------------------------------------------


@dataclass
class Estimate:
    """Probe supremum (a lower bound for the operator norm) and the ratio list."""

    value: float
    ratios: list
    skipped: int

    def __float__(self):
        return float(self.value)


def estimate_Lq_norm(T: Callable[[Field], Field], q1: float, q2: float, probes,
                     pointwise1=None, pointwise2=None) -> Estimate:
    """``sup_f |T f|_{L_q2} / |f|_{L_q1}`` over the probes; zero probes skipped."""
    for q in (q1, q2):
        if not q >= 1:
            raise ConfigError(f"exponents must lie in [1, inf], got {q}")
    ratios, skipped = [], 0
    for f in _as_probes(probes):
        den = lq_norm(f, q1, pointwise1)
        if den == 0:
            skipped += 1
            continue
        ratios.append(lq_norm(T(f), q2, pointwise2) / den)
    return Estimate(max(ratios, default=0.0), ratios, skipped)


def _besov_value(f: Field, params: BesovParams, system, pointwise) -> float:
    norms, _ = besov_block_norms(f, params.q, system, pointwise)
    w = 2.0 ** (np.arange(norms.size) * params.s) * norms
    return float(w.max()) if np.isinf(params.r) else float(np.sum(w**params.r) ** (1 / params.r))


def estimate_besov_norm(T: Callable[[Field], Field], params1: BesovParams, params2: BesovParams,
                        probes, system: DyadicSystem | None = None,
                        pointwise1=None, pointwise2=None) -> Estimate:
    """``sup_f |T f|_{B^s_{q2,r}} / |f|_{B^s_{q1,r}}``; both spaces share ``s`` and ``r``."""
    if params1.s != params2.s or params1.r != params2.r:
        raise ConfigError("Besov estimates map B^s_{q1,r} to B^s_{q2,r} with shared s and r")
    ratios, skipped = [], 0
    for f in _as_probes(probes):
        sys_ = system or DyadicSystem(f.grid)
        den = _besov_value(f, params1, sys_, pointwise1)
        if den == 0:
            skipped += 1
            continue
        ratios.append(_besov_value(T(f), params2, sys_, pointwise2) / den)
    return Estimate(max(ratios, default=0.0), ratios, skipped)


def fourier_type_constant(probes, p: float) -> Estimate:
    """``sup_f |F f|_{L_p'} / |f|_{L_p}`` for ``p`` in ``[1, 2]``.

    With the unnormalized transform, ``p = 1`` gives at most 1 and ``p = 2``
    gives exactly ``(2 pi)^{N/2}``.
    """
    if not 1 <= p <= 2:
        raise ConfigError(f"Fourier type exponent must lie in [1, 2], got {p}")
    pp = np.inf if p == 1 else p / (p - 1)
    ratios, skipped = [], 0
    for f in _as_probes(probes):
        den = lq_norm(f, p)
        if den == 0:
            skipped += 1
            continue
        ratios.append(lq_norm(forward_ft(f), pp) / den)
    return Estimate(max(ratios, default=0.0), ratios, skipped)


def kernel_lq_norm(k: Field, eta: float) -> float:
    """``|k|_{L_eta}`` of a scalar or diagonal kernel (max over components)."""
    a = np.abs(k.values)
    if np.isinf(eta):
        return float(a.max())
    return float(((k.grid.cell_volume * (a**eta).sum(axis=tuple(range(k.grid.dim)))) ** (1 / eta)).max())


def young_exponent(q1: float, eta: float) -> float:
    """``q2`` from ``1/q2 = 1/q1 - 1/eta'``; raises when the line leaves ``[1, inf]``."""
    inv = 1.0 / q1 - (1.0 - 1.0 / eta)
    if inv < -1e-15:
        raise ConfigError(f"1/q1 - 1/eta' = {inv} < 0: need q1 < eta'")
    return np.inf if abs(inv) <= 1e-15 else 1.0 / inv


def exponent_line(etas: Sequence[float], q1s: Sequence[float]):
    """``(eta, q1, q2)`` triples on the Young line that stay inside ``[1, inf]``."""
    out = []
    for eta in etas:
        for q1 in q1s:
            try:
                out.append((eta, q1, young_exponent(q1, eta)))
            except ConfigError:
                continue
    return out
