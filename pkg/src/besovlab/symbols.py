"""
Operator-valued symbols and numerical checks of multiplier hypotheses.

A :class:`Symbol` maps frequencies ``xi`` (trailing axis of length N) to
operators on the truncated coefficient space E.  Diagonal symbols return the
diagonal as a vector of length M; dense symbols return M x M matrices.

Built-in symbols are assembled with sympy from a scalar entry expression in
``xi_1..xi_N`` and ``d`` (one diagonal weight of A), which gives exact
derivatives.  Symbols defined only through a numeric evaluator fall back to
central differences with one Richardson halving.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from math import ceil, comb
from typing import Callable, Mapping, Sequence

import numpy as np
import sympy as sp

from .dyadic import DyadicSystem, TruncationWarning, kmax_for_grid, phi_k
from .errors import ConfigError, NumericError, UsageError
from .grid import FREQUENCY, Field, Grid, inverse_ft
from .spaces import DiagOperator, Sector

D_SYM = sp.Symbol("d", positive=True)
FD_TOL = 1e-4


def xi_symbols(dim: int) -> tuple:
    return tuple(sp.Symbol(f"xi_{k + 1}", real=True) for k in range(dim))


def multi_indices(dim: int, max_order: int, min_order: int = 0):
    """All ``alpha`` in ``N_0^dim`` with ``min_order <= |alpha| <= max_order``."""
    out = []
    for total in range(min_order, max_order + 1):
        for combo in itertools.product(range(total + 1), repeat=dim):
            if sum(combo) == total:
                out.append(tuple(combo))
    return out


def fd_step(xi: np.ndarray) -> np.ndarray:
    """Per-node step ``max(1e-4, 1e-3 (1 + |xi|))``."""
    return np.maximum(1e-4, 1e-3 * (1.0 + np.linalg.norm(xi, axis=-1)))


def mikhlin_order(dim: int, eta: float = 1.0, p: float = 1.0) -> int:
    """``ceil(N (1/eta - 1/p')) + 1``; with ``p = 1`` this is ``ceil(N/eta) + 1``."""
    inv_pp = 1.0 - 1.0 / p
    return int(ceil(dim * (1.0 / eta - inv_pp) - 1e-12)) + 1


def sigma_index(dim: int, q1: float, q2: float) -> int:
    """``ceil(N (1 + 1/q2 - 1/q1)) + 1``."""
    return int(ceil(dim * (1.0 + 1.0 / q2 - 1.0 / q1) - 1e-12)) + 1


def sigma_index_eta(dim: int, eta: float) -> int:
    """``ceil(N / eta) + 1``."""
    return int(ceil(dim / eta - 1e-12)) + 1


def check_sigma_forms(dim: int, q1: float, q2: float, eta: float) -> int:
    """Both forms of sigma; they coincide when ``1/q2 = 1/q1 - 1/eta'``."""
    a, b = sigma_index(dim, q1, q2), sigma_index_eta(dim, eta)
    if a != b:
        raise ConfigError(
            f"sigma forms disagree ({a} from q1, q2 and {b} from eta); "
            "check 1/q2 = 1/q1 - 1/eta'"
        )
    return a


# -- operator norms ----------------------------------------------------------------


def op_norm(values: np.ndarray, dense: bool = False, q: float = 2.0) -> np.ndarray:
    """Operator norm on ``l_q`` per node.

    Diagonal operators give ``max |entry|`` exactly.  Dense operators give the
    spectral norm for ``q = 2`` and otherwise the Riesz-Thorin upper bound
    ``|T|_1^(1/q) |T|_inf^(1-1/q)``.
    """
    if not dense:
        return np.abs(values).max(axis=-1)
    a = np.abs(values)
    if q == 2:
        return np.linalg.svd(values, compute_uv=False)[..., 0]
    n1 = a.sum(axis=-2).max(axis=-1)
    ninf = a.sum(axis=-1).max(axis=-1)
    if np.isinf(q):
        return ninf
    return n1 ** (1.0 / q) * ninf ** (1.0 - 1.0 / q)


# -- symbols -----------------------------------------------------------------------


class Symbol:
    """Operator-valued function of ``xi``.

    Parameters
    ----------
    name : str
    dim : int
        Frequency dimension N.
    expr : sympy.Expr, optional
        Entry expression in ``xi_1..xi_N`` and ``d``.  When given, the symbol
        is diagonal with entries ``expr(xi, d_m)``.
    entries : array_like, optional
        The weights ``d_m``; defaults to a single entry ``1``.
    evaluator : callable, optional
        Numeric alternative to ``expr``; returns ``(..., M)`` for diagonal or
        ``(..., M, M)`` for dense symbols.
    dense : bool
        Whether ``evaluator`` returns matrices.
    params : dict
        Metadata recorded in reports.
    q : float
        Exponent of E, used for dense operator norms.
    """

    def __init__(self, name: str, dim: int, expr=None, entries=None,
                 evaluator: Callable | None = None, dense: bool = False,
                 params: Mapping | None = None, q: float = 2.0,
                 scale: float = 1.0, factor: complex = 1.0):
        if (expr is None) == (evaluator is None):
            raise UsageError("give exactly one of expr and evaluator")
        if dense and expr is not None:
            raise UsageError("sympy symbols are diagonal")
        self.name = name
        self.dim = int(dim)
        self.expr = expr
        self.entries = np.atleast_1d(np.asarray(1.0 if entries is None else entries, dtype=float))
        self.evaluator = evaluator
        self.dense = bool(dense)
        self.params = dict(params or {})
        self.q = q
        self.scale = float(scale)
        self.factor = complex(factor)
        self._xis = xi_symbols(self.dim)
        self._cache: dict = {}

    # construction helpers

    def _clone(self, **kw) -> "Symbol":
        args = dict(name=self.name, dim=self.dim, expr=self.expr, entries=self.entries,
                    evaluator=self.evaluator, dense=self.dense, params=self.params,
                    q=self.q, scale=self.scale, factor=self.factor)
        args.update(kw)
        out = Symbol(**args)
        if out.expr is not None and out.expr is self.expr:
            out._cache = self._cache
        return out

    def dilate(self, a: float) -> "Symbol":
        """``xi -> m(a xi)``; derivatives follow by the chain rule."""
        return self._clone(scale=self.scale * float(a), name=f"{self.name}(a*xi)")

    def __mul__(self, c):
        return self._clone(factor=self.factor * complex(c))

    __rmul__ = __mul__

    def times(self, weight: Callable[[np.ndarray], np.ndarray], name: str | None = None) -> "Symbol":
        """Pointwise product with a scalar function of ``xi`` (numeric result)."""
        base = self

        def ev(xi):
            v = base.evaluate(xi)
            w = np.asarray(weight(xi))
            return v * (w[..., None, None] if base.dense else w[..., None])

        return Symbol(name or f"w*{self.name}", self.dim, evaluator=ev, dense=self.dense,
                      params=self.params, q=self.q)

    def as_dense(self) -> "Symbol":
        """The same symbol returning diagonal matrices."""
        if self.dense:
            return self
        base = self

        def ev(xi):
            v = base.evaluate(xi)
            return v[..., :, None] * np.eye(v.shape[-1])

        return Symbol(self.name + "[dense]", self.dim, evaluator=ev, dense=True,
                      params=self.params, q=self.q)

    @property
    def analytic(self) -> bool:
        return self.expr is not None

    @property
    def size(self) -> int:
        return self.entries.size

    # evaluation

    def _lambda(self, beta: tuple):
        if beta not in self._cache:
            e = self.expr
            for k, b in enumerate(beta):
                if b:
                    e = sp.diff(e, self._xis[k], b)
            self._cache[beta] = sp.lambdify((*self._xis, D_SYM), e, modules="numpy")
        return self._cache[beta]

    def _check_xi(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if self.dim == 1 and (xi.ndim == 0 or xi.shape[-1] != 1):
            xi = xi[..., None]
        if xi.shape[-1] != self.dim:
            raise UsageError(f"xi must have trailing axis {self.dim}, got shape {xi.shape}")
        return xi

    def _eval_raw(self, xi: np.ndarray, beta: tuple) -> np.ndarray:
        f = self._lambda(beta)
        args = [xi[..., k][..., None] for k in range(self.dim)]
        with np.errstate(all="ignore"):
            v = f(*args, self.entries)
        return np.broadcast_to(np.asarray(v, dtype=complex), xi.shape[:-1] + (self.size,))

    def evaluate(self, xi) -> np.ndarray:
        xi = self._check_xi(xi)
        if self.evaluator is not None:
            v = np.asarray(self.evaluator(xi * self.scale), dtype=complex)
        else:
            v = self._eval_raw(xi * self.scale, (0,) * self.dim)
        v = self.factor * v
        if not np.all(np.isfinite(v)):
            bad = np.argwhere(~np.isfinite(v))[0]
            raise NumericError(f"symbol {self.name} is not finite", {"index": bad.tolist()})
        return v

    __call__ = evaluate

    def derivative(self, beta: Sequence[int], xi, mode: str = "auto") -> np.ndarray:
        """``D^beta m(xi)``; ``mode`` is ``auto``, ``analytic`` or ``fd``."""
        beta = tuple(int(b) for b in beta)
        if len(beta) != self.dim or any(b < 0 for b in beta):
            raise UsageError(f"bad multi-index {beta}")
        xi = self._check_xi(xi)
        if mode == "analytic" or (mode == "auto" and self.analytic):
            if not self.analytic:
                raise UsageError(f"symbol {self.name} has no analytic form")
            v = self._eval_raw(xi * self.scale, beta)
            return self.factor * self.scale ** sum(beta) * v
        return fd_derivative(self, beta, xi)[0]

    def norm(self, xi) -> np.ndarray:
        """Operator norm of ``m(xi)`` per node."""
        return op_norm(self.evaluate(xi), self.dense, self.q)

    def sup_norm(self, grid: Grid) -> float:
        return float(self.norm(grid.freq_points()).max())

    def __repr__(self):
        return f"Symbol({self.name!r}, dim={self.dim}, M={self.size}, analytic={self.analytic})"


def _stencil(symbol: Symbol, beta: tuple, xi: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Central difference ``D^beta`` with per-node step ``h`` (second order)."""
    offsets = []
    for b in beta:
        offsets.append([((b / 2.0 - j), (-1) ** j * comb(b, j)) for j in range(b + 1)])
    total = None
    for combo in itertools.product(*offsets):
        shift = np.stack([np.full(xi.shape[:-1], c[0]) for c in combo], axis=-1) * h[..., None]
        w = float(np.prod([c[1] for c in combo]))
        v = w * symbol.evaluate(xi + shift)
        total = v if total is None else total + v
    denom = h ** sum(beta)
    return total / (denom[..., None, None] if symbol.dense else denom[..., None])


def fd_derivative(symbol: Symbol, beta: Sequence[int], xi: np.ndarray):
    """Richardson-extrapolated central difference and its consistency gap.

    Returns ``(value, gap)`` where ``gap`` is ``|D_h - D_{h/2}|`` per node.
    """
    beta = tuple(beta)
    xi = symbol._check_xi(xi)
    if not any(beta):
        v = symbol.evaluate(xi)
        return v, np.zeros(v.shape)
    h = fd_step(xi)
    d1 = _stencil(symbol, beta, xi, h)
    d2 = _stencil(symbol, beta, xi, h / 2)
    return (4 * d2 - d1) / 3, np.abs(d1 - d2)


def _subsample(points: np.ndarray, count: int = 200) -> np.ndarray:
    flat = points.reshape(-1, points.shape[-1])
    if flat.shape[0] <= count:
        return flat
    idx = np.unique(np.linspace(0, flat.shape[0] - 1, count).round().astype(int))
    return flat[idx]


def derivative_consistency(symbol: Symbol, beta: Sequence[int], xi: np.ndarray, weight_order: int | None = None) -> float:
    """Max mismatch of analytic and difference derivatives, relative to the sup scale.

    Both are weighted by ``(1 + |xi|)^{|beta|}`` (or ``weight_order``).
    """
    beta = tuple(beta)
    xi = symbol._check_xi(xi)
    k = sum(beta) if weight_order is None else weight_order
    w = (1.0 + np.linalg.norm(xi, axis=-1)) ** k
    an = symbol.derivative(beta, xi, mode="analytic")
    fd, _ = fd_derivative(symbol, beta, xi)
    extra = (None,) * (an.ndim - w.ndim)
    wa = np.abs(an) * w[(...,) + extra]
    diff = np.abs(an - fd) * w[(...,) + extra]
    scale = max(wa.max(), np.abs(symbol.evaluate(xi)).max(), np.finfo(float).tiny)
    return float(diff.max() / scale)


# -- builders ----------------------------------------------------------------------


def build_theta(xi, l: int) -> np.ndarray:
    """``theta(xi) = sum_k |xi_k|^l``; the trailing axis of ``xi`` is R^N."""
    if l < 1:
        raise ConfigError("theta needs l >= 1")
    xi = np.asarray(xi, dtype=float)
    if xi.ndim == 0:
        xi = xi[None]
    return np.sum(np.abs(xi) ** l, axis=-1)


def theta_sympy(xis, l: int):
    if l % 2 == 0:
        return sum(x**l for x in xis)
    return sum(sp.Abs(x) ** l for x in xis)


def _monomial(xis, alpha):
    out = sp.Integer(1)
    for x, a in zip(xis, alpha):
        out = out * (sp.I * x) ** a
    return out


def _c(z) -> sp.Expr:
    z = complex(z)
    re = sp.Float(z.real) if z.real != int(z.real) else sp.Integer(int(z.real))
    if z.imag == 0:
        return re
    im = sp.Float(z.imag) if z.imag != int(z.imag) else sp.Integer(int(z.imag))
    return re + sp.I * im


def build_embedding_symbol(alpha: Sequence[int], A: DiagOperator, l: int,
                           x: float | None = None, sigma: int = 0) -> Symbol:
    """``Psi(xi) = |xi|^sigma (i xi)^alpha A^{1-x} [A + theta(xi)]^{-1}``.

    ``x`` defaults to ``(|alpha| + sigma) / l`` and must not exceed 1.
    ``sigma = 0`` gives the unweighted symbol.
    """
    alpha = tuple(int(a) for a in alpha)
    need = (sum(alpha) + sigma) / l
    if x is None:
        x = need
    if abs(x - need) > 1e-12:
        raise ConfigError(f"x = {x} must equal (|alpha| + sigma)/l = {need}")
    if x > 1 + 1e-12:
        raise ConfigError(f"x = {x} > 1 violates the embedding hypothesis x <= 1")
    xis = xi_symbols(len(alpha))
    e = _monomial(xis, alpha) * D_SYM ** (1 - sp.nsimplify(x)) / (D_SYM + theta_sympy(xis, l))
    if sigma:
        e = e * sp.sqrt(sum(v**2 for v in xis)) ** sigma
    return Symbol("Psi", len(alpha), expr=e, entries=A.entries, q=A.space.q,
                  params={"alpha": list(alpha), "x": x, "l": l, "sigma": sigma})


# -- polynomial and convolution specs ----------------------------------------------


class Kernel:
    """Scalar convolution kernel ``a`` on R with transform ``a^(xi)``.

    Either a closed-form transform (an expression in ``xi``) or samples on a
    1-d grid; sampled kernels are transformed at arbitrary ``xi`` by the
    non-uniform sum ``h sum_x exp(-i xi x) a(x)``.
    """

    def __init__(self, transform_expr: str | None = None, samples: Field | None = None,
                 name: str = "a"):
        if (transform_expr is None) == (samples is None):
            raise UsageError("give exactly one of transform_expr and samples")
        self.name = name
        self.samples = samples
        self.transform_expr = transform_expr
        self._parsed = None
        if transform_expr is not None:
            from .expr import parse_expr

            self._parsed = parse_expr(transform_expr)
            extra = self._parsed.variables - {"xi"}
            if extra:
                raise ConfigError(f"kernel transform uses unknown variables {sorted(extra)}")
        elif samples.grid.dim != 1 or samples.components != 1:
            raise UsageError("sampled kernels must be scalar fields on a 1-d grid")

    @classmethod
    def delta(cls) -> "Kernel":
        return cls("1", name="delta")

    @classmethod
    def zero(cls) -> "Kernel":
        return cls("0", name="zero")

    @classmethod
    def gaussian(cls, amplitude: float = 1.0, width: float = 1.0) -> "Kernel":
        """``a(x) = amplitude exp(-x^2 / (2 width^2))``."""
        c = float(amplitude * width * np.sqrt(2 * np.pi))
        return cls(f"{c!r} * exp(-({float(width)!r}^2) * xi^2 / 2)", name="gaussian")

    @property
    def closed_form(self) -> bool:
        return self._parsed is not None

    def transform(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if self._parsed is not None:
            v = self._parsed.evaluate(xi=xi)
            return np.broadcast_to(np.asarray(v, dtype=complex), xi.shape).copy()
        g = self.samples.grid
        x = g.axis()
        a = self.samples.values[:, 0]
        flat = xi.reshape(-1)
        out = np.empty(flat.size, dtype=complex)
        for s in range(0, flat.size, 256):
            blk = flat[s:s + 256]
            out[s:s + 256] = g.spacing * np.exp(-1j * np.outer(blk, x)) @ a
        return out.reshape(xi.shape)

    def to_sympy(self, xi_sym):
        if self._parsed is None:
            return None
        return self._parsed.to_sympy({"xi": xi_sym})

    def physical(self, grid: Grid) -> Field:
        """Samples of ``a`` on ``grid`` (inverse transform for closed forms)."""
        if self.samples is not None:
            if self.samples.grid != grid:
                raise UsageError("kernel samples live on a different grid")
            return self.samples
        vals = self.transform(grid.freq_axis())
        return inverse_ft(Field(grid, vals, FREQUENCY))

    def l1_norm(self, grid: Grid) -> float:
        """``int |a|`` by grid quadrature."""
        a = self.physical(grid)
        return float(grid.spacing * np.abs(a.values).sum())

    def __repr__(self):
        src = self.transform_expr if self.closed_form else "samples"
        return f"Kernel({self.name}: {src})"


@dataclass(frozen=True, eq=False)
class PolySymbolSpec:
    """Coefficients of ``L(xi)``.

    Elliptic case: ``L(xi) = sum_alpha a_alpha (i xi)^alpha`` with ``|alpha| <= order``
    (``order = 2l``).  Convolution case (N = 1): ``L(xi) = sum_k a^_k(xi) (i xi)^k``
    with ``k <= order`` (``order = l``) and ``kernels[k]`` giving ``a_k``.
    """

    order: int
    dim: int = 1
    coeffs: Mapping = field(default_factory=dict)
    kernels: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.order < 1:
            raise ConfigError("order must be >= 1")
        if self.kernels and self.coeffs:
            raise ConfigError("give either polynomial coefficients or kernels, not both")
        if self.kernels and self.dim != 1:
            raise ConfigError("convolution problems are one-dimensional")
        cleaned = {}
        for a, c in self.coeffs.items():
            a = (int(a),) if np.isscalar(a) else tuple(int(v) for v in a)
            if len(a) != self.dim or any(v < 0 for v in a):
                raise ConfigError(f"bad multi-index {a} for dim {self.dim}")
            if sum(a) > self.order:
                raise ConfigError(f"|alpha| = {sum(a)} exceeds the order {self.order}")
            cleaned[a] = complex(c)
        object.__setattr__(self, "coeffs", cleaned)
        kern = {}
        for k, ker in self.kernels.items():
            if not 0 <= int(k) <= self.order:
                raise ConfigError(f"kernel index {k} outside 0..{self.order}")
            kern[int(k)] = ker
        object.__setattr__(self, "kernels", kern)

    @property
    def is_convolution(self) -> bool:
        return bool(self.kernels)

    @property
    def l(self) -> int:
        """``l`` with ``order = 2l`` (elliptic) or ``order = l`` (convolution)."""
        return self.order if self.is_convolution else self.order // 2

    def L_values(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if self.dim == 1 and (xi.ndim == 0 or xi.shape[-1] != 1):
            xi = xi[..., None]
        out = np.zeros(xi.shape[:-1], dtype=complex)
        if self.is_convolution:
            x = xi[..., 0]
            for k, ker in self.kernels.items():
                out = out + ker.transform(x) * (1j * x) ** k
            return out
        for a, c in self.coeffs.items():
            term = np.full(xi.shape[:-1], c, dtype=complex)
            for j, p in enumerate(a):
                if p:
                    term = term * (1j * xi[..., j]) ** p
            out = out + term
        return out

    def L_sympy(self, xis):
        """sympy form of ``L``, or None when a kernel has no closed form."""
        if self.is_convolution:
            total = sp.Integer(0)
            for k, ker in self.kernels.items():
                e = ker.to_sympy(xis[0])
                if e is None:
                    return None
                total = total + e * (sp.I * xis[0]) ** k
            return total
        return sum((_c(c) * _monomial(xis, a) for a, c in self.coeffs.items()), sp.Integer(0))

    def ahat_matrix(self, xi) -> np.ndarray:
        """``a^_k(xi)`` stacked on a trailing axis ``k = 0..order``."""
        xi = np.asarray(xi, dtype=float)
        cols = [self.kernels[k].transform(xi) if k in self.kernels else np.zeros(xi.shape, complex)
                for k in range(self.order + 1)]
        return np.stack(cols, axis=-1)


# -- ellipticity and the kernel condition ------------------------------------------


@dataclass
class EllipticityReport:
    K_hat: float
    sector_ok: bool
    worst_xi: list
    decaying: bool
    max_arg: float

    @property
    def ok(self) -> bool:
        return self.K_hat > 0 and self.sector_ok and not self.decaying


def _nonzero_freqs(grid: Grid):
    xi = grid.freq_points().reshape(-1, grid.dim)
    r = np.linalg.norm(xi, axis=-1)
    keep = r > 0
    return xi[keep], r[keep]


def ellipticity_check(spec: PolySymbolSpec, phi1: float, grid: Grid, decay_factor: float = 0.75) -> EllipticityReport:
    """``K^ = inf |L(xi)| / sum |xi_k|^{2l}`` over nonzero grid nodes and the sector test.

    ``decaying`` flags an infimum that keeps shrinking with the band: the
    full-band value is below ``decay_factor`` times the half-band value.
    """
    if spec.is_convolution:
        raise UsageError("use condition51_check for convolution specs")
    xi, r = _nonzero_freqs(grid)
    L = spec.L_values(xi)
    den = np.sum(np.abs(xi) ** spec.order, axis=-1)
    ratio = np.abs(L) / den
    i = int(np.argmin(ratio))
    K_full = float(ratio[i])
    half = r <= grid.nyquist / 2
    K_half = float(ratio[half].min()) if half.any() else K_full
    nz = np.abs(L) > 0
    args = np.abs(np.angle(L[nz]))
    max_arg = float(args.max()) if args.size else float("nan")
    sector_ok = bool(nz.all() and max_arg <= phi1 + 1e-12)
    decaying = bool(K_full < decay_factor * K_half)
    return EllipticityReport(K_full, sector_ok, xi[i].tolist(), decaying, max_arg)


@dataclass
class Condition51Report:
    C_hat: float
    sector_ok: bool
    worst_xi: float
    l1_norms: dict
    excluded: int
    max_arg: float

    @property
    def ok(self) -> bool:
        finite = all(np.isfinite(v) for v in self.l1_norms.values())
        return self.C_hat > 0 and self.sector_ok and finite


def condition51_check(spec: PolySymbolSpec, grid: Grid, phi1: float = np.pi / 2) -> Condition51Report:
    """``C^ = inf |L(xi)| / (|xi|^l sum_k |a^_k(xi)|)`` over nonzero nodes.

    Nodes where the denominator underflows, or where ``sum_k |a^_k|`` sits at
    the roundoff floor ``1e3 eps sum_k |a_k|_1``, carry no information and
    are excluded (counted in ``excluded``).
    """
    if not spec.is_convolution:
        raise UsageError("condition51_check needs a convolution spec")
    xi = grid.freq_axis()
    xi = xi[xi != 0]
    L = spec.L_values(xi)
    ah = spec.ahat_matrix(xi)
    tot = np.abs(ah).sum(axis=-1)
    den = np.abs(xi) ** spec.order * tot
    l1 = {k: ker.l1_norm(grid) for k, ker in spec.kernels.items()}
    # transforms at roundoff level (relative to sum |a_k|_1) carry no information
    floor = 1e3 * np.finfo(float).eps * sum(v for v in l1.values() if np.isfinite(v))
    keep = (den > 1e10 * np.finfo(float).tiny) & (tot > floor)
    if not keep.any():
        return Condition51Report(0.0, False, float("nan"), l1, int(xi.size), float("nan"))
    ratio = np.abs(L[keep]) / den[keep]
    i = int(np.argmin(ratio))
    Lk = L[keep]
    nz = np.abs(Lk) > 0
    max_arg = float(np.abs(np.angle(Lk[nz])).max()) if nz.any() else float("nan")
    sector_ok = bool(nz.all() and max_arg <= phi1 + 1e-12)
    return Condition51Report(float(ratio[i]), sector_ok, float(xi[keep][i]), l1,
                             int((~keep).sum()), max_arg)


def _default_scan_grid(dim: int) -> Grid:
    return Grid(dim, 8.0, 256 if dim == 1 else 32)


def build_elliptic_symbols(spec: PolySymbolSpec, A: DiagOperator, lam: complex,
                           phi1: float = np.pi / 2, grid: Grid | None = None,
                           sector: Sector | None = None) -> tuple[Symbol, Symbol]:
    """``sigma_1 = A [A + lambda + L]^{-1}`` and
    ``sigma_2 = sum_{|alpha| <= 2l} |lambda|^{1 - |alpha|/2l} (i xi)^alpha [A + lambda + L]^{-1}``.

    Ellipticity is checked on ``grid`` (a default scan grid if None) and a
    failure raises :class:`ConfigError` naming the worst node.
    """
    if spec.is_convolution:
        raise UsageError("elliptic symbols need polynomial coefficients")
    rep = ellipticity_check(spec, phi1, grid or _default_scan_grid(spec.dim))
    if not rep.ok:
        raise ConfigError(
            f"ellipticity fails: K^ = {rep.K_hat:.3e}, sector_ok = {rep.sector_ok}, "
            f"decaying = {rep.decaying} at xi = {rep.worst_xi}"
        )
    if sector is not None and not bool(sector.contains(lam)):
        raise ConfigError(f"lambda = {lam} is outside the sector of angle {sector.angle}")
    xis = xi_symbols(spec.dim)
    L = spec.L_sympy(xis)
    lam_s = _c(lam)
    pencil = D_SYM + lam_s + L
    s1 = D_SYM / pencil
    two_l = spec.order
    s2 = sp.Integer(0)
    for a in multi_indices(spec.dim, two_l):
        w = abs(complex(lam)) ** (1 - sum(a) / two_l)
        s2 = s2 + sp.Float(w) * _monomial(xis, a)
    s2 = s2 / pencil
    meta = {"lambda": [complex(lam).real, complex(lam).imag], "order": spec.order}
    return (Symbol("sigma1", spec.dim, expr=s1, entries=A.entries, params=meta, q=A.space.q),
            Symbol("sigma2", spec.dim, expr=s2, entries=A.entries, params=meta, q=A.space.q))


def build_conv_symbols(spec: PolySymbolSpec, ahat: Kernel, A: DiagOperator, lam: complex,
                       grid: Grid | None = None, phi1: float = np.pi / 2) -> tuple[Symbol, Symbol, Symbol]:
    """``sigma_0 = lambda P^{-1}``, ``sigma_1 = a^ A P^{-1}`` and
    ``sigma_2 = sum_k |lambda|^{1-k/l} a^_k (i xi)^k P^{-1}`` with
    ``P = a^(xi) A + lambda + L(xi)``.

    ``ahat`` carries the scalar factor of ``A(xi) = a^(xi) diag(d_m)``.
    The kernel condition is checked on ``grid`` when given.
    """
    if not spec.is_convolution:
        raise UsageError("convolution symbols need kernels")
    if lam == 0:
        raise ConfigError("convolution symbols need |lambda| >= lambda_0 > 0")
    if grid is not None:
        rep = condition51_check(spec, grid, phi1)
        if not rep.ok:
            raise ConfigError(f"kernel condition fails: C^ = {rep.C_hat:.3e} at xi = {rep.worst_xi}")
    l = spec.order
    meta = {"lambda": [complex(lam).real, complex(lam).imag], "order": l}
    xis = xi_symbols(1)
    L = spec.L_sympy(xis)
    a_s = ahat.to_sympy(xis[0])
    q = A.space.q
    if L is not None and a_s is not None:
        pencil = a_s * D_SYM + _c(lam) + L
        s0 = _c(lam) / pencil
        s1 = a_s * D_SYM / pencil
        s2 = sp.Integer(0)
        for k, ker in spec.kernels.items():
            s2 = s2 + sp.Float(abs(complex(lam)) ** (1 - k / l)) * ker.to_sympy(xis[0]) * (sp.I * xis[0]) ** k
        s2 = s2 / pencil
        return tuple(Symbol(n, 1, expr=e, entries=A.entries, params=meta, q=q)
                     for n, e in (("sigma0", s0), ("sigma1", s1), ("sigma2", s2)))

    d = A.entries

    def parts(xi):
        x = xi[..., 0]
        a = ahat.transform(x)[..., None]
        P = a * d + lam + spec.L_values(x)[..., None]
        num2 = sum(abs(complex(lam)) ** (1 - k / l) * ker.transform(x) * (1j * x) ** k
                   for k, ker in spec.kernels.items())
        return a, P, np.asarray(num2)[..., None]

    s0 = Symbol("sigma0", 1, evaluator=lambda xi: lam / parts(xi)[1], entries=d, params=meta, q=q)
    s1 = Symbol("sigma1", 1, evaluator=lambda xi: (lambda a, P, n: a * d / P)(*parts(xi)),
                entries=d, params=meta, q=q)
    s2 = Symbol("sigma2", 1, evaluator=lambda xi: (lambda a, P, n: n / P)(*parts(xi)),
                entries=d, params=meta, q=q)
    return s0, s1, s2


# -- multiplier constants ------------------------------------------------------------


def _weighted_derivative_sup(m: Symbol, beta: tuple, xi: np.ndarray, weight: np.ndarray) -> float:
    v = m.derivative(beta, xi)
    nrm = op_norm(v, m.dense, m.q)
    if not np.all(np.isfinite(nrm)):
        raise NumericError(f"derivative {beta} of {m.name} is not finite on the grid")
    return float((weight * nrm).max())


def mikhlin_constant(m: Symbol, grid: Grid, order: int | None = None, eta: float = 1.0,
                     p: float = 1.0, check: bool = True, return_terms: bool = False):
    """``max_{|beta| <= order} sup_xi (1 + |xi|)^{|beta|} |D^beta m(xi)|``.

    Analytic derivatives are spot-checked against Richardson differences;
    difference-only symbols are checked against their own halving.  A
    relative mismatch above ``1e-4`` raises :class:`NumericError`.
    """
    if m.dim != grid.dim:
        raise UsageError("symbol and grid dimensions differ")
    order = mikhlin_order(grid.dim, eta, p) if order is None else int(order)
    xi = grid.freq_points().reshape(-1, grid.dim)
    r = np.linalg.norm(xi, axis=-1)
    sub = _subsample(xi)
    terms = {}
    for beta in multi_indices(grid.dim, order):
        w = (1.0 + r) ** sum(beta)
        terms[beta] = _weighted_derivative_sup(m, beta, xi, w)
        if check and any(beta):
            if m.analytic:
                gap = derivative_consistency(m, beta, sub)
            else:
                _, g = fd_derivative(m, beta, sub)
                ws = (1.0 + np.linalg.norm(sub, axis=-1)) ** sum(beta)
                extra = (None,) * (g.ndim - 1)
                scale = max(terms[beta], float(np.abs(m.evaluate(sub)).max()), np.finfo(float).tiny)
                gap = float((g * ws[(...,) + extra]).max() / scale)
            if gap > FD_TOL:
                raise NumericError(
                    f"derivative {beta} of {m.name} is inconsistent (relative gap {gap:.2e})",
                    {"beta": list(beta), "gap": gap},
                )
    value = max(terms.values())
    return (value, terms) if return_terms else value


@dataclass
class HormanderReport:
    value: float
    inner: dict
    annuli: dict
    radii: list
    skipped: list

    def by_order(self) -> dict:
        """Largest term for each derivative order ``|alpha|``."""
        out: dict = {}
        for (a, *_), v in list(self.annuli.items()) + [((k,), v) for k, v in self.inner.items()]:
            k = sum(a)
            out[k] = max(out.get(k, 0.0), v)
        return out


def hormander_constant(m: Symbol, grid: Grid, p: float = 1.0, order: int | None = None,
                       radii: Sequence[float] | None = None, eta: float = 1.0) -> HormanderReport:
    """Inner integrals over ``|t| <= 2`` and annulus averages
    ``R^{|alpha|} [R^{-N} int_{R <= |t| <= 4R} |D^alpha m|^p]^{1/p}``.

    Quadrature is the frequency-grid sum.  Annuli with ``4R`` beyond the
    Nyquist frequency are skipped with a :class:`TruncationWarning`.
    """
    order = mikhlin_order(grid.dim, eta, p) if order is None else int(order)
    xi = grid.freq_points().reshape(-1, grid.dim)
    r = np.linalg.norm(xi, axis=-1)
    vol = grid.freq_cell_volume
    if radii is None:
        radii = [2.0**j for j in range(0, 64) if 4 * 2.0**j <= grid.nyquist]
    radii = sorted(float(R) for R in radii)
    inner, annuli, skipped = {}, {}, []
    good = []
    for R in radii:
        if 4 * R > grid.nyquist:
            warnings.warn(f"annulus R = {R} exceeds the Nyquist frequency; skipped",
                          TruncationWarning, stacklevel=2)
            skipped.append(R)
        else:
            good.append(R)
    ball = r <= 2.0
    for beta in multi_indices(grid.dim, order):
        nrm = op_norm(m.derivative(beta, xi), m.dense, m.q)
        inner[beta] = float((vol * np.sum(nrm[ball] ** p)) ** (1.0 / p))
        for R in good:
            ring = (r >= R) & (r <= 4 * R)
            avg = R ** (-grid.dim) * vol * np.sum(nrm[ring] ** p)
            annuli[(beta, R)] = float(R ** sum(beta) * avg ** (1.0 / p))
    value = max(list(inner.values()) + list(annuli.values()))
    return HormanderReport(value, inner, annuli, good, skipped)


def besov_smoothness(dim: int, eta: float, p: float) -> float:
    """``N (1/eta - 1/p')``."""
    return dim * (1.0 / eta - (1.0 - 1.0 / p))


def default_symbol_grid(dim: int) -> Grid:
    return Grid(dim, 32.0, 512 if dim == 1 else 64)


def default_dilations() -> np.ndarray:
    return 2.0 ** (np.arange(-40, 17) / 4.0)


@dataclass
class MpEtaReport:
    value: float
    argmin: float
    values: dict
    skipped: list
    smoothness: float


def mp_eta_constant(m: Symbol, p: float = 1.0, eta: float = 1.0, dilations=None,
                    symbol_grid: Grid | None = None, rem_tol: float = 1e-3,
                    refine_tol: float = 1e-2) -> MpEtaReport:
    """``inf_a |m(a .)|_{B^{N(1/eta - 1/p')}_{p,1}}`` over sampled dilations.

    ``m(a xi)`` is sampled on ``symbol_grid`` (its physical nodes play the role
    of xi) and normed with the Fourier Besov definition; the pointwise value
    is the operator norm, i.e. the max over entries for diagonal symbols.

    A dilation counts as resolved when the high-frequency remainder, weighted
    by ``2^{(K+1) s}``, stays below ``rem_tol`` times the norm and a rerun on a grid with twice the samples agrees to
    ``refine_tol``; samples that vanish identically while other dilations do
    not are treated as unresolved too.  If nothing is resolved,
    :class:`ConfigError` is raised.
    """
    from .besov import besov_block_norms

    if m.dense:
        raise UsageError("mp_eta_constant supports diagonal symbols")
    g = symbol_grid or default_symbol_grid(m.dim)
    if g.dim != m.dim:
        raise UsageError("symbol grid dimension differs from the symbol")
    fine = Grid(g.dim, g.half_width, 2 * g.samples)
    s = besov_smoothness(m.dim, eta, p)
    systems = (DyadicSystem(g), DyadicSystem(fine, k_max=kmax_for_grid(g)))
    pw = lambda vals: np.abs(vals).max(axis=-1)  # noqa: E731
    dil = default_dilations() if dilations is None else np.asarray(dilations, dtype=float)

    def norm(grid, system, a):
        f = Field(grid, m.dilate(a).evaluate(grid.points()))
        blocks, rem = besov_block_norms(f, p, system, pw)
        total = float(np.sum(2.0 ** (np.arange(blocks.size) * s) * blocks))
        return total, 2.0 ** (blocks.size * s) * rem

    values, skipped, zeros = {}, [], []
    for a in dil:
        a = float(a)
        total, rem = norm(g, systems[0], a)
        if total == 0.0:
            zeros.append(a)
            continue
        if rem > rem_tol * total:
            skipped.append(a)
            continue
        total2, _ = norm(fine, systems[1], a)
        if abs(total2 - total) > refine_tol * total:
            skipped.append(a)
            continue
        values[a] = total
    if not values:
        if len(zeros) == dil.size:
            return MpEtaReport(0.0, float(dil[0]), {a: 0.0 for a in zeros}, [], s)
        raise ConfigError(f"all {dil.size} dilations overflow the symbol grid")
    skipped = sorted(skipped + zeros)
    best = min(values, key=values.get)
    return MpEtaReport(values[best], best, values, skipped, s)


@dataclass
class BlockwiseReport:
    value: float
    per_block: dict


def blockwise_condition(m: Symbol, p: float = 1.0, eta: float = 1.0, K: int = 4,
                        grid: Grid | None = None, **kw) -> BlockwiseReport:
    """``sup_{k <= K} M_{p,eta}(phi_k m)``.

    ``grid`` is the field grid whose ``K_max`` bounds ``K``.
    """
    if grid is not None and K > kmax_for_grid(grid):
        raise ConfigError(f"K = {K} exceeds K_max = {kmax_for_grid(grid)}")
    per = {}
    for k in range(K + 1):
        mk = m.times(lambda xi, k=k: phi_k(xi, k), name=f"phi_{k}*{m.name}")
        rep = mp_eta_constant(mk, p, eta, **kw)
        per[k] = rep.value
    return BlockwiseReport(max(per.values()), per)


def window_grid(dim: int) -> Grid:
    return Grid(dim, 4.5, 256 if dim == 1 else 64)


@dataclass
class WindowReport:
    value: float
    terms: dict


def lemma212_windows(m: Symbol, l: int, u: float, K: int, grid: Grid | None = None,
                     eta: float = 1.0, p: float = 1.0) -> WindowReport:
    """Windowed ``L_u`` norms of ``D^alpha m`` on ``I_0 = {|t| <= 2}`` and of
    ``D^alpha m_k``, ``m_k = m(2^{k-1} .)``, on ``I_1 = {1 <= |t| <= 4}``.

    ``grid`` supplies the quadrature nodes ``t`` (its physical points).
    """
    if not l > besov_smoothness(m.dim, eta, p):
        raise ConfigError(f"need l > N(1/eta - 1/p') = {besov_smoothness(m.dim, eta, p)}")
    if not u >= p:
        raise ConfigError(f"need u in [p, inf], got {u}")
    g = grid or window_grid(m.dim)
    t = g.points().reshape(-1, m.dim)
    r = np.linalg.norm(t, axis=-1)
    I0 = r <= 2.0
    I1 = (r >= 1.0) & (r <= 4.0)
    if not I1.any() or r.max() < 4.0:
        raise ConfigError("window grid must cover |t| <= 4")

    def lu(vals):
        if np.isinf(u):
            return float(vals.max()) if vals.size else 0.0
        return float((g.cell_volume * np.sum(vals**u)) ** (1.0 / u))

    terms = {}
    for beta in multi_indices(m.dim, l):
        terms[(0, beta)] = lu(op_norm(m.derivative(beta, t[I0]), m.dense, m.q))
        for k in range(1, K + 1):
            mk = m.dilate(2.0 ** (k - 1))
            terms[(k, beta)] = lu(op_norm(mk.derivative(beta, t[I1]), m.dense, m.q))
    return WindowReport(max(terms.values()), terms)


# -- separable family bounds -----------------------------------------------------


@dataclass
class DerivativeBoundsReport:
    A_terms: dict
    kernel_terms: dict
    sigma_terms: dict
    fd_agreement: float
    lambdas: list


def derivative_bounds_check(ahat: Kernel, spec: PolySymbolSpec, A: DiagOperator, grid: Grid,
                            lams, lam0: float, orders=(0, 1, 2)) -> DerivativeBoundsReport:
    """Sups of the separable-family quantities over ``grid`` and the lambda sweep.

    * ``A_terms[(m, 'plain')] = sup |a^{(m)} / a^|`` and ``(m, 'xi')`` the
      ``xi^m``-weighted version (the diagonal factor cancels);
    * ``kernel_terms[(k, m, name)]`` for ``|xi^m a^_k|``, ``|a^_k^{(m)}|`` and
      ``|xi^m a^_k^{(m)}|``;
    * ``sigma_terms[(i, m)]`` a list over lambda of ``sup |xi|^m |d^m sigma_i|``.

    ``fd_agreement`` is the worst relative gap between analytic and
    difference derivatives of the sigma symbols (nan when not analytic).
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    if not lam0 > 0:
        raise ConfigError("lambda_0 must be > 0")
    if np.any(np.abs(lams) < lam0):
        raise ConfigError(f"all |lambda| must be >= lambda_0 = {lam0}")
    xi = grid.freq_axis()
    xs = xi[:, None]
    a_sym = Symbol("ahat", 1, expr=ahat.to_sympy(xi_symbols(1)[0])) if ahat.closed_form else \
        Symbol("ahat", 1, evaluator=lambda x: ahat.transform(x[..., 0])[..., None])
    base = np.abs(a_sym.evaluate(xs)[:, 0])
    A_terms = {}
    for m in orders:
        dm = np.abs(a_sym.derivative((m,), xs)[:, 0])
        A_terms[(m, "plain")] = float((dm / base).max())
        A_terms[(m, "xi")] = float((np.abs(xi) ** m * dm / base).max())
    kernel_terms = {}
    for k, ker in spec.kernels.items():
        ks = Symbol(f"a{k}", 1, expr=ker.to_sympy(xi_symbols(1)[0])) if ker.closed_form else \
            Symbol(f"a{k}", 1, evaluator=lambda x, ker=ker: ker.transform(x[..., 0])[..., None])
        v0 = np.abs(ks.evaluate(xs)[:, 0])
        for m in orders:
            dm = np.abs(ks.derivative((m,), xs)[:, 0])
            kernel_terms[(k, m, "xi^m a")] = float((np.abs(xi) ** m * v0).max())
            kernel_terms[(k, m, "d^m a")] = float(dm.max())
            kernel_terms[(k, m, "xi^m d^m a")] = float((np.abs(xi) ** m * dm).max())
    sigma_terms = {(i, m): [] for i in range(3) for m in orders}
    gap = float("nan")
    sub = _subsample(xs, 100)
    for lam in lams:
        syms = build_conv_symbols(spec, ahat, A, complex(lam))
        for i, s in enumerate(syms):
            for m in orders:
                w = np.abs(xi) ** m
                nrm = op_norm(s.derivative((m,), xs), False)
                sigma_terms[(i, m)].append(float((w * nrm).max()))
                if s.analytic and m:
                    g = derivative_consistency(s, (m,), sub, weight_order=m)
                    gap = g if np.isnan(gap) else max(gap, g)
    return DerivativeBoundsReport(A_terms, kernel_terms, sigma_terms, gap,
                                  [[float(z.real), float(z.imag)] for z in lams])


def symbol_from_expr(text: str, dim: int, entries=None, name: str = "custom", q: float = 2.0) -> Symbol:
    """Diagonal symbol from an expression in ``xi`` (or ``xi1..xi3``) and ``d``."""
    from .expr import parse_expr

    e = parse_expr(text)
    xis = xi_symbols(dim)
    table = {"d": D_SYM}
    if dim == 1:
        table["xi"] = xis[0]
    for k, x in enumerate(xis):
        table[f"xi{k + 1}"] = x
    unknown = e.variables - set(table)
    if unknown:
        raise ConfigError(f"symbol expression uses unknown variables {sorted(unknown)}")
    return Symbol(name, dim, expr=e.to_sympy(table), entries=entries, q=q, params={"expr": text})
