"""
Uniform periodic grids and E-valued fields
==========================================

Functions on R^N are approximated on the periodic box [-L, L)^N sampled at
``n`` points per axis.  Samples carry ``M`` complex components, one per
coordinate of the truncated coefficient space E.

Transform conventions
---------------------
    forward:  f^(xi) = integral exp(-i xi.x) f(x) dx
              ~ h^N sum_x exp(-i xi.x) f(x)
    inverse:  f(x)   = (2 pi)^-N integral exp(i x.xi) g(xi) dxi

Frequency nodes are xi_j = pi j / L for j = -n/2, ..., n/2 - 1 and are stored
in centered order, i.e. index ``i`` along an axis holds ``j = i - n/2``.  The
physical node ``x_k = -L + k h`` uses the same centered layout, so index
``n/2`` is the origin in both domains.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import fft as sfft

from .errors import DataError, DomainError, UsageError

PHYSICAL = "physical"
FREQUENCY = "frequency"
MAX_DIM = 3


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on the box [-L, L)^N.

    Parameters
    ----------
    dim : int
        Space dimension N, 1 <= N <= 3.
    half_width : float
        L, the half side length of the box.
    samples : int
        Even number of nodes per axis, at least 4.
    """

    dim: int
    half_width: float
    samples: int

    def __post_init__(self):
        if not 1 <= int(self.dim) <= MAX_DIM:
            raise UsageError(f"dim must be in [1, {MAX_DIM}], got {self.dim}")
        if not (self.half_width > 0 and np.isfinite(self.half_width)):
            raise UsageError(f"half_width must be positive, got {self.half_width}")
        if self.samples < 4 or self.samples % 2:
            raise UsageError(f"samples must be even and >= 4, got {self.samples}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.samples

    @property
    def freq_spacing(self) -> float:
        return np.pi / self.half_width

    @property
    def nyquist(self) -> float:
        """Largest resolvable |xi_k| along one axis, pi / h."""
        return np.pi / self.spacing

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.samples,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def freq_cell_volume(self) -> float:
        return self.freq_spacing**self.dim

    def axis(self) -> np.ndarray:
        """Physical nodes along one axis."""
        return -self.half_width + self.spacing * np.arange(self.samples)

    def freq_axis(self) -> np.ndarray:
        """Frequency nodes along one axis (centered order)."""
        j = np.arange(self.samples) - self.samples // 2
        return self.freq_spacing * j

    def points(self) -> np.ndarray:
        """Physical nodes, shape ``grid.shape + (N,)``."""
        return _mesh(self.axis(), self.dim)

    def freq_points(self) -> np.ndarray:
        """Frequency nodes, shape ``grid.shape + (N,)``."""
        return _mesh(self.freq_axis(), self.dim)

    def freq_radius(self) -> np.ndarray:
        return np.linalg.norm(self.freq_points(), axis=-1)

    def radius(self) -> np.ndarray:
        return np.linalg.norm(self.points(), axis=-1)


def _mesh(ax: np.ndarray, dim: int) -> np.ndarray:
    return np.stack(np.meshgrid(*([ax] * dim), indexing="ij"), axis=-1)


@dataclass(frozen=True, eq=False)
class Field:
    """Complex E-valued samples on a grid.

    ``values`` has shape ``grid.shape + (M,)``.  The array is copied and made
    read-only on construction, so fields can be shared freely.
    """

    grid: Grid
    values: np.ndarray
    domain: str = PHYSICAL
    components: int = field(init=False)

    def __post_init__(self):
        if self.domain not in (PHYSICAL, FREQUENCY):
            raise UsageError(f"unknown domain tag {self.domain!r}")
        vals = np.array(self.values, dtype=np.complex128)
        if vals.shape == self.grid.shape:
            vals = vals[..., None]
        if vals.ndim != self.grid.dim + 1 or vals.shape[:-1] != self.grid.shape:
            raise DataError(
                f"values shape {vals.shape} does not match grid shape {self.grid.shape} + (M,)"
            )
        if vals.shape[-1] < 1:
            raise DataError("a field needs at least one component")
        if not np.all(np.isfinite(vals)):
            raise DataError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "components", vals.shape[-1])

    @classmethod
    def from_function(cls, grid: Grid, func: Callable, components: int | None = None):
        """Sample ``func(points)`` where ``points`` has shape ``grid.shape + (N,)``.

        ``func`` may return an array of shape ``grid.shape`` (scalar field) or
        ``grid.shape + (M,)``.
        """
        vals = np.asarray(func(grid.points()))
        if components is not None and vals.shape == grid.shape:
            vals = vals[..., None] * np.ones(components)
        return cls(grid, vals)

    @classmethod
    def zeros(cls, grid: Grid, components: int = 1, domain: str = PHYSICAL):
        return cls(grid, np.zeros(grid.shape + (components,)), domain)

    def replace(self, values: np.ndarray, domain: str | None = None) -> "Field":
        return Field(self.grid, values, self.domain if domain is None else domain)

    def _check_compatible(self, other: "Field"):
        if other.grid != self.grid or other.domain != self.domain:
            raise UsageError("fields live on different grids or domains")

    def __add__(self, other):
        self._check_compatible(other)
        return self.replace(self.values + other.values)

    def __sub__(self, other):
        self._check_compatible(other)
        return self.replace(self.values - other.values)

    def __mul__(self, c):
        return self.replace(complex(c) * self.values)

    __rmul__ = __mul__

    def __neg__(self):
        return self.replace(-self.values)


def _require(f: Field, domain: str):
    if not isinstance(f, Field):
        raise UsageError(f"expected a Field, got {type(f).__name__}")
    if f.domain != domain:
        raise UsageError(f"expected a {domain} field, got {f.domain}")


def _axes(grid: Grid) -> tuple[int, ...]:
    return tuple(range(grid.dim))


def forward_ft(f: Field) -> Field:
    """Discrete Fourier transform ``h^N sum_x exp(-i xi.x) f(x)``."""
    _require(f, PHYSICAL)
    ax = _axes(f.grid)
    vals = sfft.fftshift(sfft.fftn(sfft.ifftshift(f.values, axes=ax), axes=ax), axes=ax)
    return Field(f.grid, vals * f.grid.cell_volume, FREQUENCY)


def inverse_ft(g: Field) -> Field:
    """Inverse of :func:`forward_ft` with the ``(2 pi)^-N`` normalization."""
    _require(g, FREQUENCY)
    ax = _axes(g.grid)
    vals = sfft.fftshift(sfft.ifftn(sfft.ifftshift(g.values, axes=ax), axes=ax), axes=ax)
    return Field(g.grid, vals / g.grid.cell_volume, PHYSICAL)


def monomial_symbol(grid: Grid, alpha: Sequence[int]) -> np.ndarray:
    """``(i xi_1)^a_1 ... (i xi_N)^a_N`` on the frequency nodes."""
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != grid.dim:
        raise UsageError(f"multi-index {alpha} has wrong length for dim {grid.dim}")
    if any(a < 0 for a in alpha):
        raise UsageError(f"multi-index {alpha} has negative entries")
    xi = grid.freq_points()
    out = np.ones(grid.shape, dtype=np.complex128)
    for k, a in enumerate(alpha):
        if a:
            out = out * (1j * xi[..., k]) ** a
    return out


def spectral_derivative(f: Field, alpha: Sequence[int], max_order: int | None = None) -> Field:
    """``D^alpha f`` computed as ``F^-1[(i xi)^alpha F f]``."""
    _require(f, PHYSICAL)
    alpha = tuple(int(a) for a in alpha)
    if any(a < 0 for a in alpha):
        raise UsageError(f"multi-index {alpha} has negative entries")
    if max_order is not None and sum(alpha) > max_order:
        raise UsageError(f"|alpha| = {sum(alpha)} exceeds the configured maximum {max_order}")
    if not any(alpha):
        return f
    fh = forward_ft(f)
    return inverse_ft(fh.replace(fh.values * monomial_symbol(f.grid, alpha)[..., None]))


def pointwise_lq(values: np.ndarray, q: float = 2.0) -> np.ndarray:
    """l_q norm over the trailing component axis."""
    a = np.abs(values)
    if np.isinf(q):
        return a.max(axis=-1)
    return (a**q).sum(axis=-1) ** (1.0 / q)


def lq_norm(f: Field, q: float, pointwise: Callable[[np.ndarray], np.ndarray] | None = None) -> float:
    """``L_q(grid; E)`` norm, ``(h^N sum_x |f(x)|_E^q)^(1/q)``.

    ``pointwise`` maps the value array to the E-norm at each node; it
    defaults to the Euclidean norm over the components.
    """
    pw = pointwise_lq(f.values) if pointwise is None else pointwise(f.values)
    if np.isinf(q):
        return float(pw.max())
    vol = f.grid.cell_volume if f.domain == PHYSICAL else f.grid.freq_cell_volume
    return float((vol * np.sum(pw**q)) ** (1.0 / q))


# -- serialization ------------------------------------------------------------
#
# JSON: {"format": "besovlab.field", "version": 1, "dim", "L", "n", "M",
#        "domain", "values": [[re, im], ...]} with values in row-major order
#        over (grid index..., component).
# Binary: magic b"BLFD", then little-endian <u2 version, u2 dim, d L, u4 n,
#         u4 M, u1 domain (0 physical, 1 frequency)> followed by n^N * M
#         little-endian complex128 values in the same row-major order.

_MAGIC = b"BLFD"
_HEADER = struct.Struct("<HHdIIB")


def field_to_json(f: Field) -> str:
    flat = f.values.reshape(-1)
    return json.dumps(
        {
            "format": "besovlab.field",
            "version": 1,
            "dim": f.grid.dim,
            "L": f.grid.half_width,
            "n": f.grid.samples,
            "M": f.components,
            "domain": f.domain,
            "values": [[float(z.real), float(z.imag)] for z in flat],
        }
    )


def field_from_json(text: str) -> Field:
    d = json.loads(text)
    if d.get("format") != "besovlab.field":
        raise DataError("not a besovlab field document")
    grid = Grid(int(d["dim"]), float(d["L"]), int(d["n"]))
    pairs = np.asarray(d["values"], dtype=float)
    vals = (pairs[:, 0] + 1j * pairs[:, 1]).reshape(grid.shape + (int(d["M"]),))
    return Field(grid, vals, d["domain"])


def field_to_bytes(f: Field) -> bytes:
    head = _HEADER.pack(1, f.grid.dim, f.grid.half_width, f.grid.samples, f.components,
                        0 if f.domain == PHYSICAL else 1)
    return _MAGIC + head + f.values.astype("<c16").tobytes(order="C")


def field_from_bytes(blob: bytes) -> Field:
    if blob[:4] != _MAGIC:
        raise DataError("bad magic; not a besovlab binary field")
    if len(blob) < 4 + _HEADER.size:
        raise DataError("binary field header is truncated")
    version, dim, L, n, M, dom = _HEADER.unpack_from(blob, 4)
    if version != 1:
        raise DataError(f"unsupported binary field version {version}")
    grid = Grid(dim, L, n)
    if len(blob) - 4 - _HEADER.size != 16 * n**dim * M:
        raise DataError("binary field payload has the wrong length")
    body = np.frombuffer(blob, dtype="<c16", offset=4 + _HEADER.size)
    return Field(grid, body.reshape(grid.shape + (M,)), PHYSICAL if dom == 0 else FREQUENCY)


def shift_field(f: Field, axis: int, y: float) -> Field:
    """Translate ``f`` by ``y`` along ``axis``: returns ``x -> f(x + y e_axis)``.

    Shifts that are integer multiples of the spacing are exact index rolls;
    other shifts use band-limited (spectral) interpolation.
    """
    _require(f, PHYSICAL)
    h = f.grid.spacing
    steps = y / h
    if abs(steps - round(steps)) < 1e-9:
        return f.replace(np.roll(f.values, -int(round(steps)), axis=axis))
    fh = forward_ft(f)
    xi = f.grid.freq_points()[..., axis]
    phase = np.exp(1j * y * xi)
    return inverse_ft(fh.replace(fh.values * phase[..., None]))


def check_box_decay(f: Field, tol: float = 1e-14) -> float:
    """Largest |f| on the box faces relative to the overall maximum."""
    _require(f, PHYSICAL)
    a = pointwise_lq(f.values)
    peak = a.max()
    if peak == 0:
        return 0.0
    face = 0.0
    for ax in range(f.grid.dim):
        face = max(face, np.take(a, 0, axis=ax).max(), np.take(a, -1, axis=ax).max())
    return float(face / peak)


def require_within_box(grid: Grid, extent: float, what: str = "shift"):
    if abs(extent) >= 2 * grid.half_width:
        raise DomainError(f"{what} {extent} exceeds the box width {2 * grid.half_width}")
