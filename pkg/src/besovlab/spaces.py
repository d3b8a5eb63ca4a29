"""
Truncated weighted sequence spaces and diagonal positive operators.

E is the truncation of l_q to its first M coordinates and ``A = diag(d_m)``
with positive weights.  ``l_q(D)`` is the weighted space ``|u| = |Du|_{l_q}``,
i.e. the domain of A with its natural norm.  Every diagonal operator on
truncated l_q has operator norm ``max_m |entry_m|`` for all q, which is what
makes the resolvent and positivity estimates below exact rather than bounds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DomainError, UsageError


@dataclass(frozen=True, eq=False)
class SequenceSpace:
    """Truncated ``l_q`` with weights ``d_1..d_M``.

    Parameters
    ----------
    q : float
        Sequence exponent, ``1 < q < inf`` (``inf`` accepted for sup norms).
    weights : array_like
        Strictly positive ``d_m``.
    generator : str, optional
        Expression the weights were generated from, kept for reports.
    """

    q: float
    weights: np.ndarray
    generator: str | None = None

    def __post_init__(self):
        if not (self.q >= 1):
            raise ConfigError(f"sequence exponent q must be >= 1, got {self.q}")
        w = np.array(self.weights, dtype=float).reshape(-1)
        if w.size < 1:
            raise ConfigError("need at least one weight")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ConfigError("weights must be finite and strictly positive")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_generator(cls, q: float, truncation: int, generator) -> "SequenceSpace":
        """Build weights ``d_m = generator(m)`` for ``m = 1..M``.

        ``generator`` is either a callable or an expression string in the
        variable ``m`` (see :mod:`besovlab.expr`).
        """
        m = np.arange(1, int(truncation) + 1, dtype=float)
        if isinstance(generator, str):
            from .expr import parse_expr

            text = generator
            w = np.asarray(parse_expr(generator).evaluate(m=m), dtype=float)
        else:
            text = getattr(generator, "__name__", None)
            w = np.asarray(generator(m), dtype=float)
        return cls(q, np.broadcast_to(w, m.shape), text)

    @property
    def truncation(self) -> int:
        return self.weights.size

    def norm(self, u, weighted: bool = False) -> float:
        return lq_norm(u, self.q, self.weights if weighted else None)

    def pointwise(self) -> Callable[[np.ndarray], np.ndarray]:
        """Vectorized E-norm over the trailing axis, for field norms."""
        q = self.q
        return lambda vals: _lq_last(vals, q)


def _lq_last(vals: np.ndarray, q: float) -> np.ndarray:
    a = np.abs(vals)
    if np.isinf(q):
        return a.max(axis=-1)
    return (a**q).sum(axis=-1) ** (1.0 / q)


def lq_norm(u, q: float, weights=None) -> float:
    """``(sum |d_m u_m|^q)^(1/q)``; unweighted when ``weights`` is None."""
    if not q >= 1:
        raise ConfigError(f"q must be in [1, inf], got {q}")
    u = np.asarray(u, dtype=complex)
    if not np.all(np.isfinite(u)):
        raise DomainError("vector has non-finite entries")
    if weights is not None:
        u = np.asarray(weights) * u
    return float(_lq_last(u, q))


@dataclass(frozen=True, eq=False)
class DiagOperator:
    """``A = diag(d_m) + shift`` acting on a :class:`SequenceSpace`."""

    space: SequenceSpace
    shift: float = 0.0

    @property
    def entries(self) -> np.ndarray:
        return self.space.weights + self.shift

    def __post_init__(self):
        if np.any(self.entries <= 0):
            raise ConfigError("diagonal entries must stay positive after the shift")

    def apply(self, u):
        return self.entries * np.asarray(u)

    def norm(self) -> float:
        return float(self.entries.max())

    def pointwise_graph(self, theta: float = 1.0, p: float = 2.0):
        """Vectorized ``E(A^theta)`` graph norm over the trailing axis."""
        dt = self.entries**theta
        q = self.space.q

        def pw(vals):
            a = _lq_last(vals, q)
            b = _lq_last(vals * dt, q)
            return (a**p + b**p) ** (1.0 / p)

        return pw

    def pointwise_image(self, theta: float = 1.0):
        """Vectorized ``|A^theta u|_E`` over the trailing axis."""
        dt = self.entries**theta
        q = self.space.q
        return lambda vals: _lq_last(vals * dt, q)


def identity_operator(M: int, q: float = 2.0) -> DiagOperator:
    return DiagOperator(SequenceSpace(q, np.ones(M)))


@dataclass(frozen=True)
class Sector:
    """``S_phi = {lambda : |arg lambda| <= phi} U {0}``, ``0 <= phi < pi``."""

    angle: float

    def __post_init__(self):
        if not 0 <= self.angle < np.pi:
            raise ConfigError(f"sector angle must lie in [0, pi), got {self.angle}")

    def contains(self, lam, atol: float = 1e-12) -> np.ndarray:
        lam = np.asarray(lam, dtype=complex)
        return (lam == 0) | (np.abs(np.angle(lam)) <= self.angle + atol)

    def sample(self, n_mag: int = 25, lam_min: float = 1e-2, lam_max: float = 1e4,
               rays: Sequence[float] | None = None) -> np.ndarray:
        """Default plan: rays ``(-phi, 0, +phi)`` times log-spaced magnitudes."""
        if rays is None:
            rays = sorted({-self.angle, 0.0, self.angle})
        mags = np.geomspace(lam_min, lam_max, n_mag)
        return np.array([r * np.exp(1j * t) for t in rays for r in mags])


@dataclass(frozen=True, eq=False)
class DiagonalMap:
    """Diagonal map on E returned by :func:`resolvent`."""

    entries: np.ndarray

    def apply(self, u):
        return self.entries * np.asarray(u)

    def norm(self) -> float:
        return float(np.abs(self.entries).max())


def resolvent(A: DiagOperator, lam: complex, tol: float = 0.0) -> DiagonalMap:
    """``(A + lambda)^-1`` as a diagonal map."""
    den = A.entries + complex(lam)
    bad = np.flatnonzero(np.abs(den) <= tol)
    if bad.size:
        m = int(bad[0]) + 1
        raise DomainError(f"A + lambda is singular at m = {m} (d_m = {A.entries[bad[0]]}, lambda = {lam})")
    return DiagonalMap(1.0 / den)


def resolvent_norms(A: DiagOperator, lams) -> np.ndarray:
    """``max_m 1/|d_m + lambda|`` for each lambda, vectorized."""
    lams = np.asarray(lams, dtype=complex)
    den = np.abs(A.entries[None, :] + lams.reshape(-1, 1))
    with np.errstate(divide="ignore"):
        return (1.0 / den.min(axis=1)).reshape(lams.shape)


def positivity_constant(A: DiagOperator, sector: Sector, lam_samples=None) -> float:
    """Smallest M with ``|(A+lambda)^-1| <= M / (1 + |lambda|)`` on the samples.

    Samples where ``d_m + lambda`` vanishes to roundoff are dropped; with the
    default plan ``lambda = 0`` is included whenever A is strictly positive.
    """
    if lam_samples is None:
        lam_samples = np.append(sector.sample(), 0.0)
    lams = np.asarray(lam_samples, dtype=complex).reshape(-1)
    if not np.all(sector.contains(lams)):
        raise UsageError("lambda samples must lie in the sector")
    den = np.abs(A.entries[None, :] + lams[:, None]).min(axis=1)
    keep = den > 1e-13 * (1 + np.abs(lams))
    return float(np.max((1 + np.abs(lams[keep])) / den[keep]))


def frac_power(A: DiagOperator, theta: float) -> DiagOperator:
    """``A^theta = diag(d_m^theta)``."""
    return DiagOperator(SequenceSpace(A.space.q, A.entries**theta, A.space.generator))


def graph_norm(u, A: DiagOperator, theta: float, p: float = 2.0) -> float:
    """``(|u|^p + |A^theta u|^p)^(1/p)`` with both norms in ``l_q``."""
    if not p >= 1 or np.isinf(p):
        raise ConfigError(f"graph-norm exponent p must be in [1, inf), got {p}")
    q = A.space.q
    a = lq_norm(u, q)
    b = lq_norm(np.asarray(u) * A.entries**theta, q)
    return float((a**p + b**p) ** (1.0 / p))


def sector_sum_bound(phi: Sector, psi: Sector, n_rays: int = 41, n_ratio: int = 201,
                     ratio_range: float = 1e3) -> float:
    """Sampled ``inf |lambda + mu| / (|lambda| + |mu|)`` over two sectors.

    By homogeneity ``|lambda| = 1`` is fixed; ``mu`` runs over rays of
    ``S_psi`` and magnitudes log-spaced in ``[1/ratio_range, ratio_range]``.
    """
    if phi.angle + psi.angle >= np.pi:
        raise ConfigError("the sum bound needs phi + psi < pi")
    a = np.linspace(-phi.angle, phi.angle, n_rays) if phi.angle else np.zeros(1)
    b = np.linspace(-psi.angle, psi.angle, n_rays) if psi.angle else np.zeros(1)
    t = np.geomspace(1 / ratio_range, ratio_range, n_ratio)
    t = np.unique(np.append(t, 1.0))
    lam = np.exp(1j * a)[:, None, None]
    mu = t[None, None, :] * np.exp(1j * b)[None, :, None]
    ratio = np.abs(lam + mu) / (1 + t[None, None, :])
    return float(ratio.min())


@dataclass
class MomentReport:
    sup_ratio: float
    probes_used: int
    skipped: int


def moment_inequality_check(A: DiagOperator, x: float, probes) -> MomentReport:
    """Sup over probes of ``|A^(1-x) u| / (|A u|^(1-x) |u|^x)`` in ``l_q``."""
    if not 0 <= x <= 1:
        raise ConfigError(f"x must be in [0, 1], got {x}")
    q = A.space.q
    d = A.entries
    best, used, skipped = 0.0, 0, 0
    for u in np.atleast_2d(np.asarray(probes, dtype=complex)):
        nu = lq_norm(u, q)
        if nu == 0:
            skipped += 1
            continue
        lhs = lq_norm(d ** (1 - x) * u, q)
        rhs = lq_norm(d * u, q) ** (1 - x) * nu**x
        best = max(best, lhs / rhs)
        used += 1
    return MomentReport(best, used, skipped)


@dataclass
class SummabilityCertificate:
    partial_sum: float
    tail_exponent: float
    tail_bound: float
    certified: bool
    attested: bool = False


def certify_summable(space: SequenceSpace, margin: float = 0.05, attest: bool = False) -> SummabilityCertificate:
    """Evidence that ``sum 1/d_m`` converges, from the truncated weights.

    Fits the growth exponent ``p`` of ``d_m ~ c m^p`` on the last half of the
    truncation.  The tail is certified when ``p >= 1 + margin`` and the fitted
    power law never overestimates the sampled weights; the reported tail bound
    is ``int_M^inf (c x^p)^-1 dx``.
    """
    d = space.weights
    M = d.size
    partial = float(np.sum(1 / d))
    if M < 4:
        return SummabilityCertificate(partial, float("nan"), float("inf"), False, attest)
    m = np.arange(1, M + 1, dtype=float)
    tail = slice(M // 2, M)
    p, _ = np.polyfit(np.log(m[tail]), np.log(d[tail]), 1)
    c_low = float(np.min(d[tail] / m[tail] ** p))
    ok = bool(p >= 1 + margin)
    bound = float(M ** (1 - p) / (c_low * (p - 1))) if p > 1 else float("inf")
    return SummabilityCertificate(partial, float(p), bound, ok, attest)
