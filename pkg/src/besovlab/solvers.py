"""
Fourier-inversion solvers for constant-coefficient equations with a
diagonal operator coefficient.

* elliptic:     ``sum a_alpha D^alpha u + (A + lambda) u = f``
* convolution:  ``sum_k a_k * u^{(k)} + A_lambda * u = f`` (N = 1), with
  ``A(xi) = a^(xi) diag(d_m)``
* infinite system: the elliptic problem with ``A = diag(d_m)`` on l_q,
  solved for a list of truncations ``M``.

Each solve divides by the pencil ``P(xi) = d_m + lambda + L(xi)`` (or its
convolution analogue) on the frequency nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, SingularPencilError, UsageError
from .grid import FREQUENCY, PHYSICAL, Field, Grid, forward_ft, inverse_ft, lq_norm, spectral_derivative
from .spaces import DiagOperator, Sector, SequenceSpace, certify_summable
from .symbols import (
    D_SYM,
    Kernel,
    PolySymbolSpec,
    Symbol,
    _c,
    condition51_check,
    ellipticity_check,
    xi_symbols,
)

PENCIL_TOL = 1e-13


def _check_pencil(P: np.ndarray, grid: Grid):
    bad = np.abs(P) < PENCIL_TOL
    if bad.any():
        idx = np.argwhere(bad)[0]
        m = int(idx[-1]) + 1
        xi = grid.freq_points()[tuple(idx[:-1])].tolist()
        raise SingularPencilError(
            f"pencil is near-singular at m = {m}, xi = {xi}",
            {"m": m, "xi": xi, "value": complex(P[tuple(idx)])},
        )


@dataclass(frozen=True, eq=False)
class EllipticProblem:
    """``(Q + lambda) u = sum a_alpha D^alpha u + (A + lambda) u = f``.

    ``sector`` is the lambda sector ``S_phi``; ``phi1`` bounds ``arg L(xi)``.
    ``validate`` runs the ellipticity scan on the rhs grid.
    """

    spec: PolySymbolSpec
    A: DiagOperator
    lam: complex
    rhs: Field
    sector: Sector = field(default_factory=lambda: Sector(np.pi / 2))
    phi1: float = np.pi / 4
    validate: bool = True

    def __post_init__(self):
        if self.spec.is_convolution:
            raise ConfigError("elliptic problems take polynomial coefficients")
        if self.rhs.domain != PHYSICAL:
            raise UsageError("rhs must be a physical-domain field")
        if self.rhs.grid.dim != self.spec.dim:
            raise ConfigError("rhs grid dimension differs from the symbol dimension")
        if self.rhs.components != self.A.entries.size:
            raise ConfigError(
                f"rhs has {self.rhs.components} components but A has {self.A.entries.size}"
            )
        if not bool(self.sector.contains(self.lam)):
            raise ConfigError(f"lambda = {self.lam} lies outside S_phi, phi = {self.sector.angle}")
        if self.phi1 + self.sector.angle >= np.pi:
            raise ConfigError("need phi1 + phi < pi")
        if self.validate:
            rep = ellipticity_check(self.spec, self.phi1, self.rhs.grid)
            if not rep.ok:
                raise ConfigError(
                    f"ellipticity fails: K^ = {rep.K_hat:.3e}, sector_ok = {rep.sector_ok}, "
                    f"decaying = {rep.decaying}, worst xi = {rep.worst_xi}"
                )

    @property
    def grid(self) -> Grid:
        return self.rhs.grid

    def pencil(self) -> np.ndarray:
        """``d_m + lambda + L(xi)`` with shape ``grid.shape + (M,)``."""
        L = self.spec.L_values(self.grid.freq_points())
        return self.A.entries + complex(self.lam) + L[..., None]

    def with_rhs(self, rhs: Field) -> "EllipticProblem":
        return EllipticProblem(self.spec, self.A, self.lam, rhs, self.sector, self.phi1, validate=False)

    def with_lambda(self, lam: complex) -> "EllipticProblem":
        return EllipticProblem(self.spec, self.A, lam, self.rhs, self.sector, self.phi1, validate=False)


def solve_elliptic(p: EllipticProblem, spectral: bool = False):
    """``u = F^-1 [A + lambda + L(xi)]^-1 F f``.

    Returns the physical field, or the transformed one with ``spectral=True``.
    """
    P = p.pencil()
    _check_pencil(P, p.grid)
    fh = forward_ft(p.rhs)
    uh = fh.replace(fh.values / P)
    return uh if spectral else inverse_ft(uh)


def residual_field(p: EllipticProblem, u: Field) -> Field:
    """``sum a_alpha D^alpha u + (A + lambda) u - f``.

    Each derivative term is computed separately with spectral derivatives.
    """
    if u.grid != p.grid:
        raise UsageError("u lives on a different grid")
    total = u.values * (p.A.entries + complex(p.lam)) - p.rhs.values
    for alpha, c in p.spec.coeffs.items():
        total = total + c * spectral_derivative(u, alpha).values
    return Field(p.grid, total)


def residual(p: EllipticProblem, u: Field) -> float:
    """``L_2(grid; E)`` norm of :func:`residual_field`."""
    return lq_norm(residual_field(p, u), 2.0)


def pencil_inverse_symbol(spec: PolySymbolSpec, A: DiagOperator, lam: complex) -> Symbol:
    """``[A + lambda + L(xi)]^-1`` as a diagonal symbol."""
    xis = xi_symbols(spec.dim)
    e = 1 / (D_SYM + _c(lam) + spec.L_sympy(xis))
    return Symbol("resolvent", spec.dim, expr=e, entries=A.entries, q=A.space.q,
                  params={"lambda": [complex(lam).real, complex(lam).imag]})


@dataclass(frozen=True)
class EllipticFamily:
    """The ingredients of an elliptic problem except ``lambda`` and ``f``."""

    spec: PolySymbolSpec
    A: DiagOperator
    sector: Sector = field(default_factory=lambda: Sector(np.pi / 2))
    phi1: float = np.pi / 4

    def problem(self, lam: complex, rhs: Field, validate: bool = False) -> EllipticProblem:
        return EllipticProblem(self.spec, self.A, lam, rhs, self.sector, self.phi1, validate)

    def check(self, grid: Grid):
        return ellipticity_check(self.spec, self.phi1, grid)


# -- convolution ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConvolutionProblem:
    """``sum_k a_k * u^{(k)} + A_lambda * u = f`` on R with ``A^(xi) = a^(xi) diag(d_m)``."""

    spec: PolySymbolSpec
    ahat: Kernel
    A: DiagOperator
    lam: complex
    rhs: Field
    lam0: float = 1e-2
    phi1: float = np.pi / 2
    validate: bool = True

    def __post_init__(self):
        if not self.spec.is_convolution:
            raise ConfigError("convolution problems take kernels")
        if self.rhs.grid.dim != 1:
            raise ConfigError("convolution problems are one-dimensional")
        if self.rhs.components != self.A.entries.size:
            raise ConfigError("rhs components do not match A")
        if not self.lam0 > 0:
            raise ConfigError("lambda_0 must be > 0")
        if abs(complex(self.lam)) < self.lam0:
            raise ConfigError(f"|lambda| = {abs(complex(self.lam))} is below lambda_0 = {self.lam0}")
        if self.validate:
            rep = condition51_check(self.spec, self.rhs.grid, self.phi1)
            if not rep.ok:
                raise ConfigError(
                    f"kernel condition fails: C^ = {rep.C_hat:.3e}, sector_ok = {rep.sector_ok}, "
                    f"worst xi = {rep.worst_xi}, L1 norms = {rep.l1_norms}"
                )
            a = self.ahat.transform(self.rhs.grid.freq_axis())
            # positive in the continuum; Gaussian tails may underflow to 0 on the grid
            if np.any(a.real < 0) or np.any(np.abs(a.imag) > 1e-12 * np.abs(a)) or a.real.max() <= 0:
                raise ConfigError("a^(xi) must be real and positive on the grid")

    @property
    def grid(self) -> Grid:
        return self.rhs.grid

    def pencil(self) -> np.ndarray:
        xi = self.grid.freq_axis()
        a = self.ahat.transform(xi)
        L = self.spec.L_values(xi)
        return a[:, None] * self.A.entries + complex(self.lam) + L[:, None]

    def with_lambda(self, lam: complex) -> "ConvolutionProblem":
        return ConvolutionProblem(self.spec, self.ahat, self.A, lam, self.rhs, self.lam0,
                                  self.phi1, validate=False)

    def with_rhs(self, rhs: Field) -> "ConvolutionProblem":
        return ConvolutionProblem(self.spec, self.ahat, self.A, self.lam, rhs, self.lam0,
                                  self.phi1, validate=False)


def solve_convolution(p: ConvolutionProblem, spectral: bool = False):
    """``u = F^-1 [A^(xi) + lambda + L(xi)]^-1 F f``."""
    P = p.pencil()
    _check_pencil(P, p.grid)
    fh = forward_ft(p.rhs)
    uh = fh.replace(fh.values / P)
    return uh if spectral else inverse_ft(uh)


def conv_residual(p: ConvolutionProblem, u: Field) -> float:
    """``L_2`` norm of :func:`conv_residual_field`."""
    return lq_norm(conv_residual_field(p, u), 2.0)


def conv_residual_field(p: ConvolutionProblem, u: Field) -> Field:
    """``sum_k a_k * u^{(k)} + A * u + lambda u - f``.

    Sampled kernels on the solution grid are applied by direct discrete
    convolution; closed-form kernels by their transform.
    """
    from .multipliers import young_convolution

    g = p.grid
    xi = g.freq_axis()
    total = complex(p.lam) * u.values - p.rhs.values
    for k, ker in p.spec.kernels.items():
        du = spectral_derivative(u, (k,))
        if ker.samples is not None and ker.samples.grid == g:
            total = total + young_convolution(ker.samples, du).values
        else:
            dh = forward_ft(du)
            total = total + inverse_ft(dh.replace(dh.values * ker.transform(xi)[:, None])).values
    uh = forward_ft(u)
    Au = inverse_ft(uh.replace(uh.values * p.ahat.transform(xi)[:, None] * p.A.entries)).values
    return Field(g, total + Au)


@dataclass(frozen=True)
class ConvolutionFamily:
    spec: PolySymbolSpec
    ahat: Kernel
    A: DiagOperator
    lam0: float = 1.0
    phi1: float = np.pi / 2

    def problem(self, lam: complex, rhs: Field, validate: bool = False) -> ConvolutionProblem:
        return ConvolutionProblem(self.spec, self.ahat, self.A, lam, rhs, self.lam0, self.phi1, validate)


# -- infinite systems ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class InfiniteSystemProblem:
    """Diagonal infinite system truncated to each ``M`` in ``truncations``.

    Component ``m`` of the right-hand side is ``coefficient(m) * profile(x)``
    where ``coefficient`` is an expression in ``m`` (or a callable).
    """

    weights: str | Callable
    truncations: Sequence[int]
    spec: PolySymbolSpec
    lam: complex
    profile: Field
    coefficient: str | Callable = "1"
    q: float = 2.0

    def __post_init__(self):
        Ms = [int(M) for M in self.truncations]
        if not Ms or any(M < 1 for M in Ms) or Ms != sorted(set(Ms)):
            raise ConfigError("truncations must be increasing positive integers")
        if self.profile.components != 1:
            raise ConfigError("the rhs profile must be scalar")

    def space(self, M: int) -> SequenceSpace:
        return SequenceSpace.from_generator(self.q, M, self.weights)

    def coefficients(self, M: int) -> np.ndarray:
        m = np.arange(1, M + 1, dtype=float)
        if isinstance(self.coefficient, str):
            from .expr import parse_expr

            c = parse_expr(self.coefficient).evaluate(m=m)
        else:
            c = self.coefficient(m)
        return np.broadcast_to(np.asarray(c, dtype=complex), m.shape)

    def rhs(self, M: int) -> Field:
        return Field(self.profile.grid, self.profile.values * self.coefficients(M))


@dataclass
class InfiniteSystemResult:
    solutions: dict
    table: list
    monotone: bool
    certificate: object

    @property
    def ok(self) -> bool:
        return self.monotone


def solve_infinite_system(p: InfiniteSystemProblem, norm_q: float = 2.0) -> InfiniteSystemResult:
    """Solve each truncation by componentwise division and tabulate
    ``|u^(M) - u^(M')|_{L_{norm_q}(grid; l_q)}`` between consecutive truncations.

    ``monotone`` is False when the differences fail to decrease, which is
    reported rather than raised.
    """
    grid = p.profile.grid
    L = p.spec.L_values(grid.freq_points())[..., None]
    gh = forward_ft(p.profile).values
    sols = {}
    for M in p.truncations:
        d = p.space(M).weights
        P = d + complex(p.lam) + L
        _check_pencil(P, grid)
        sols[M] = inverse_ft(Field(grid, gh * p.coefficients(M) / P, FREQUENCY))
    pw = lambda v: np.sum(np.abs(v) ** p.q, axis=-1) ** (1 / p.q)  # noqa: E731
    table = []
    Ms = list(p.truncations)
    for a, b in zip(Ms[:-1], Ms[1:]):
        ua = np.zeros(grid.shape + (b,), dtype=complex)
        ua[..., :a] = sols[a].values
        diff = lq_norm(Field(grid, sols[b].values - ua), norm_q, pw)
        table.append({"M": a, "M_next": b, "difference": diff})
    diffs = [row["difference"] for row in table]
    monotone = all(y < x for x, y in zip(diffs[:-1], diffs[1:]))
    cert = certify_summable(p.space(Ms[-1]))
    return InfiniteSystemResult(sols, table, monotone, cert)
