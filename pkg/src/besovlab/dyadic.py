"""
Littlewood-Paley partition of unity on a frequency grid.

The bump is ``h(s) = exp(-1/((s - 1/2)(2 - s)))`` on (1/2, 2), normalized by
its dyadic dilates::

    psi(s) = h(s) / sum_j h(2^-j s)

so that ``sum_k psi(2^-k s) = 1`` for every ``s > 0``.  Blocks are
``phi_k(t) = psi(2^-k |t|)`` for ``k >= 1`` and ``phi_0 = 1 - sum_{k>=1} phi_k``,
which equals 1 on ``|t| <= 1``, ``psi(|t|)`` on ``1 < |t| < 2`` and 0 beyond.
"""

from __future__ import annotations

import warnings
from typing import Callable

import numpy as np

from .grid import FREQUENCY, PHYSICAL, Field, Grid, forward_ft, inverse_ft


class TruncationWarning(UserWarning):
    """A dyadic block or Besov norm reaches beyond the resolvable band."""


def _bump(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = (s > 0.5) & (s < 2.0)
    si = s[inside]
    out[inside] = np.exp(-1.0 / ((si - 0.5) * (2.0 - si)))
    return out


def build_psi() -> Callable[[np.ndarray], np.ndarray]:
    """The normalized dyadic bump ``psi`` as a vectorized function."""

    def psi(s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        pos = s > 0
        sp = s[pos]
        j0 = np.floor(np.log2(sp))
        den = np.zeros_like(sp)
        for dj in (-1.0, 0.0, 1.0):
            den += _bump(sp * 2.0 ** -(j0 + dj))
        num = _bump(sp)
        nz = num > 0
        res = np.zeros_like(sp)
        res[nz] = num[nz] / den[nz]
        out[pos] = res
        return out

    return psi


PSI = build_psi()


def phi_k(t, k: int, psi=PSI) -> np.ndarray:
    """``phi_k`` evaluated at points ``t``; trailing axis of ``t`` is R^N.

    Scalars and 1-d arrays are treated as radii ``|t|`` directly.
    """
    r = np.abs(np.asarray(t, dtype=float))
    if r.ndim >= 2:
        r = np.linalg.norm(t, axis=-1)
    return phi_radial(r, k, psi)


def phi_radial(r: np.ndarray, k: int, psi=PSI) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if k < 0:
        return np.zeros_like(r)
    if k == 0:
        out = np.where(r <= 1.0, 1.0, 0.0)
        mid = (r > 1.0) & (r < 2.0)
        out[mid] = psi(r[mid])
        return out
    return psi(r * 2.0**-k)


def kmax_for_grid(grid: Grid) -> int:
    """Highest block whose annulus ``I_k`` fits below the Nyquist frequency."""
    return max(int(np.floor(np.log2(grid.nyquist))) - 1, 0)


class DyadicSystem:
    """Partition ``{phi_k}`` sampled on the frequency nodes of ``grid``.

    Parameters
    ----------
    grid : Grid
    psi : callable, optional
        Normalized bump; the default is :func:`build_psi`.
    k_max : int, optional
        Block cutoff; defaults to ``floor(log2(pi / h)) - 1``.
    """

    def __init__(self, grid: Grid, psi=None, k_max: int | None = None):
        self.grid = grid
        self.psi = PSI if psi is None else psi
        self.k_max = kmax_for_grid(grid) if k_max is None else int(k_max)
        self._radius = grid.freq_radius()
        self._cache: dict[int, np.ndarray] = {}

    def weights(self, k: int) -> np.ndarray:
        """``phi_k`` on the frequency nodes (read-only array)."""
        if k not in self._cache:
            w = phi_radial(self._radius, k, self.psi)
            w.setflags(write=False)
            self._cache[k] = w
        return self._cache[k]

    def resolvable(self, k: int) -> bool:
        return k <= self.k_max

    def partition_defect(self) -> float:
        """Max deviation of ``sum_{k<=K_max} phi_k`` from 1 where it must hold."""
        total = sum(self.weights(k) for k in range(self.k_max + 1))
        mask = self._radius <= 2.0**self.k_max
        return float(np.abs(total[mask] - 1.0).max())

    def block_values(self, fh: np.ndarray, k: int) -> np.ndarray:
        """Physical-domain values of block ``k`` from transformed values ``fh``."""
        g = Field(self.grid, fh * self.weights(k)[..., None], FREQUENCY)
        return inverse_ft(g).values

    def blocks(self, f: Field) -> tuple[list[Field], Field]:
        """All resolvable blocks of ``f`` and the high-frequency remainder."""
        fh = forward_ft(f).values
        low = sum(self.weights(k) for k in range(self.k_max + 1))
        out = [Field(self.grid, self.block_values(fh, k)) for k in range(self.k_max + 1)]
        rem = inverse_ft(Field(self.grid, fh * (1.0 - low)[..., None], FREQUENCY))
        return out, rem


def dyadic_block(f: Field, k: int, system: DyadicSystem | None = None) -> Field:
    """``phi_k^vee * f``, computed as ``F^-1[phi_k F f]``."""
    if f.domain != PHYSICAL:
        from .errors import UsageError

        raise UsageError("dyadic_block expects a physical-domain field")
    sys_ = system or DyadicSystem(f.grid)
    if k < 0:
        return Field.zeros(f.grid, f.components)
    if not sys_.resolvable(k):
        warnings.warn(
            f"block {k} exceeds K_max = {sys_.k_max} for this grid; annulus is aliased",
            TruncationWarning,
            stacklevel=2,
        )
    return Field(f.grid, sys_.block_values(forward_ft(f).values, k))
