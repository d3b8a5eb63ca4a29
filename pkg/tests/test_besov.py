"""Difference and dyadic Besov norms, and the anisotropic norm."""

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from besovlab.besov import (
    AnisoParams,
    BesovParams,
    aniso_norm,
    besov_block_norms,
    besov_norm_difference,
    besov_norm_fourier,
    default_difference_order,
    finite_difference,
)
from besovlab.dyadic import DyadicSystem, TruncationWarning
from besovlab.errors import ConfigError, DomainError, NumericError
from besovlab.grid import Field, Grid, inverse_ft, lq_norm, spectral_derivative
from besovlab.multipliers import ProbeEnsemble
from besovlab.spaces import DiagOperator, SequenceSpace, identity_operator

G = Grid(1, 16.0, 512)


def gaussian(grid=G, w=1.0, c=0.0):
    return Field.from_function(grid, lambda x: np.exp(-((x[..., 0] - c) ** 2) / (2 * w * w)))


class TestParams:
    @pytest.mark.parametrize("q,r", [(0.5, 2), (2, 0.9)])
    def test_indices_in_range(self, q, r):
        with pytest.raises(ConfigError):
            BesovParams(q, r, 1.0)

    def test_infinite_indices_allowed(self):
        BesovParams(np.inf, np.inf, 0.5)

    def test_aniso_order(self):
        with pytest.raises(ConfigError):
            AnisoParams(0, BesovParams(2, 2, 1), identity_operator(1))


class TestFiniteDifference:
    def test_constant_annihilated(self):
        g = Grid(1, 4.0, 64)
        f = Field(g, np.full(64, 3.0 + 1j))
        for m in (1, 2, 3):
            assert np.abs(finite_difference(f, 0, 0.25, m).values).max() < 1e-14

    def test_linear(self):
        g = Grid(1, 4.0, 64)
        f = Field(g, g.axis())
        d = finite_difference(f, 0, 0.5, 1).values[:, 0]
        x = g.axis()
        inside = x + 0.5 < g.half_width
        assert np.allclose(d[inside], 0.5, atol=1e-13)
        assert np.all(d[~inside] == 0)

    def test_quadratic_second_difference(self):
        g = Grid(2, 4.0, 32)
        # x^2 is not periodic, so y stays on the grid where shifts are exact rolls
        f = Field(g, g.points()[..., 0] ** 2)
        y = 0.5
        d = finite_difference(f, 0, y, 2).values[..., 0]
        inside = g.points()[..., 0] + 2 * y < g.half_width
        assert np.allclose(d[inside], 2 * y * y, atol=1e-12)

    def test_offgrid_matches_sampled_function(self):
        g = Grid(1, 12.0, 256)
        f = gaussian(g)
        y = 0.1234
        d = finite_difference(f, 0, y, 2, clip=False).values[:, 0]
        x = g.axis()
        exact = np.exp(-((x + 2 * y) ** 2) / 2) - 2 * np.exp(-((x + y) ** 2) / 2) + np.exp(-(x**2) / 2)
        assert np.abs(d - exact).max() < 1e-10

    def test_span_too_wide(self):
        g = Grid(1, 2.0, 32)
        with pytest.raises(DomainError):
            finite_difference(Field.zeros(g), 0, 2.5, 2)


class TestDifferenceNorm:
    def test_zero(self):
        assert besov_norm_difference(Field.zeros(G), BesovParams(2, 2, 0.5)) == 0

    def test_order_must_exceed_s(self):
        with pytest.raises(ConfigError):
            besov_norm_difference(gaussian(), BesovParams(2, 2, 1.0), m=1)

    def test_needs_positive_s(self):
        with pytest.raises(ConfigError):
            besov_norm_difference(gaussian(), BesovParams(2, 2, 0.0))

    def test_default_order(self):
        assert default_difference_order(0.5) == 1
        assert default_difference_order(1.5) == 2
        assert default_difference_order(2.0) == 3

    @pytest.mark.parametrize("q,r,s", [(2, 2, 0.5), (1.5, 1, 1.5), (4, np.inf, 0.5)])
    def test_doubling_quadrature(self, q, r, s):
        p = BesovParams(q, r, s)
        f = gaussian(w=0.8)
        a = besov_norm_difference(f, p, nodes=64)
        b = besov_norm_difference(f, p, nodes=128)
        assert abs(a - b) < 1e-3 * b

    def test_too_few_nodes_raise(self):
        # a two-node rule cannot agree with its own coarsening on an oscillating field
        g = Grid(1, 16.0, 512)
        f = Field.from_function(g, lambda x: np.exp(-x[..., 0] ** 2 / 8) * np.cos(9 * x[..., 0]))
        with pytest.raises(NumericError):
            besov_norm_difference(f, BesovParams(2, 2, 0.5), nodes=3, rtol=1e-6)

    def test_report_fields(self):
        rep = besov_norm_difference(gaussian(), BesovParams(2, 2, 0.5), report=True)
        assert rep.value == pytest.approx(rep.lq_term + sum(rep.axis_terms))
        assert rep.lq_term == pytest.approx(lq_norm(gaussian(), 2))

    @settings(max_examples=15, deadline=None)
    @given(c=st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3, allow_nan=False, allow_infinity=False))
    def test_homogeneous(self, c):
        p = BesovParams(2, 1, 0.5)
        f = gaussian()
        assert besov_norm_difference(f * c, p) == pytest.approx(abs(c) * besov_norm_difference(f, p), rel=1e-10)


class TestFourierNorm:
    def test_zero(self):
        assert besov_norm_fourier(Field.zeros(G), BesovParams(2, 2, 1)) == 0

    def test_r_infinity_is_block_sup(self):
        f = gaussian(w=0.3)
        sysd = DyadicSystem(G)
        norms, _ = besov_block_norms(f, 2, sysd)
        expect = np.max(2.0 ** (np.arange(norms.size) * 1.5) * norms)
        assert besov_norm_fourier(f, BesovParams(2, np.inf, 1.5), sysd) == pytest.approx(expect)

    @pytest.mark.parametrize("r", [1, 2, np.inf])
    @pytest.mark.parametrize("s", [0.5, 1.5])
    def test_narrow_band_bracket(self, r, s):
        # transform inside J_k: at most blocks k-1, k, k+1 are active
        g = Grid(1, 16.0, 1024)
        k = 4
        xi = g.freq_axis()
        a = np.abs(xi)
        fh = np.where((a > 2 ** (k - 1) * 1.05) & (a < 2**k * 0.95), np.exp(-((a - 12) ** 2) / 4), 0.0)
        f = inverse_ft(Field(g, fh, "frequency"))
        norm = besov_norm_fourier(f, BesovParams(2, r, s), DyadicSystem(g))
        fn = lq_norm(f, 2)
        inv_r = 0.0 if np.isinf(r) else 1.0 / r
        lower = 2.0 ** ((k - 1) * s) * 3.0 ** (inv_r - 1) * fn
        upper = 3.0**inv_r * 2.0 ** ((k + 1) * s) * fn
        assert lower <= norm <= upper

    @pytest.mark.filterwarnings("ignore::besovlab.dyadic.TruncationWarning")
    @pytest.mark.parametrize("q", [1.5, 2, 4])
    @pytest.mark.parametrize("r", [1, 2, np.inf])
    @pytest.mark.parametrize("s", [0.5, 1.5])
    def test_dilation_slope(self, q, r, s):
        g = Grid(1, 16.0, 1024)
        sysd = DyadicSystem(g)
        js = np.arange(3)
        vals = []
        for j in js:
            f = Field.from_function(
                g, lambda x: np.exp(-((2**j * x[..., 0]) ** 2) / 18) * np.exp(3.5j * 2**j * x[..., 0])
            )
            vals.append(besov_norm_fourier(f, BesovParams(q, r, s), sysd))
        slope = np.polyfit(js, np.log2(vals), 1)[0]
        target = s - 1 / q
        assert abs(slope - target) <= 0.05 * abs(target) + 1e-3

    def test_monotone_in_s(self):
        f = Field.from_function(G, lambda x: np.exp(-x[..., 0] ** 2 / 2) * np.cos(6 * x[..., 0]))
        vals = [besov_norm_fourier(f, BesovParams(2, 2, s)) for s in (0.0, 0.5, 1.0, 2.0)]
        assert np.all(np.diff(vals) >= 0)

    def test_truncation_warning(self):
        g = Grid(1, 4.0, 64)
        rng = np.random.default_rng(0)
        with pytest.warns(TruncationWarning):
            besov_norm_fourier(Field(g, rng.normal(size=64)), BesovParams(2, 2, 1))

    def test_triangle_inequality(self):
        probes = ProbeEnsemble.corpus(G, 2, count=12, seed=3).probes
        p = BesovParams(1.5, 2, 0.5)
        for f, h in zip(probes[:6], probes[6:]):
            lhs = besov_norm_fourier(f + h, p)
            assert lhs <= besov_norm_fourier(f, p) + besov_norm_fourier(h, p) + 1e-10

    def test_frequency_domain_input(self):
        from besovlab.grid import forward_ft

        f = gaussian(w=0.5)
        a, ra = besov_block_norms(f, 2)
        b, rb = besov_block_norms(forward_ft(f), 2)
        assert np.allclose(a, b, rtol=1e-13) and ra == pytest.approx(rb, abs=1e-15)


class TestEquivalence:
    def test_gaussian_brackets(self):
        f = gaussian()
        for q in (1.5, 2, 4):
            for r in (1, 2, np.inf):
                for s in (0.5, 1.5):
                    p = BesovParams(q, r, s)
                    ratio = besov_norm_difference(f, p) / besov_norm_fourier(f, p)
                    assert 0.1 < ratio < 10


class TestAnisoNorm:
    def test_zero(self):
        params = AnisoParams(2, BesovParams(2, 2, 0.5), identity_operator(1))
        assert aniso_norm(Field.zeros(G), params) == 0

    def test_identity_operator_composition(self):
        u = gaussian(w=0.7)
        b = BesovParams(2, 2, 0.5)
        params = AnisoParams(2, b, identity_operator(1), graph_p=3.0)
        expect = 2 ** (1 / 3) * besov_norm_fourier(u, b) + besov_norm_fourier(spectral_derivative(u, (2,)), b)
        assert aniso_norm(u, params) == pytest.approx(expect, rel=1e-13)

    def test_single_mode_derivative_term(self):
        g = Grid(1, 16.0, 256)
        kappa = 12 * g.freq_spacing
        u = Field.from_function(g, lambda x: np.exp(1j * kappa * x[..., 0]))
        b = BesovParams(2, 2, 1.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            base = besov_norm_fourier(u, b)
            deriv = besov_norm_fourier(spectral_derivative(u, (3,)), b)
        assert deriv == pytest.approx(kappa**3 * base, rel=1e-12)

    def test_weighted_operator(self):
        A = DiagOperator(SequenceSpace.from_generator(2, 3, "m^2"))
        u = Field.from_function(G, lambda x: np.exp(-x[..., 0] ** 2 / 2)[..., None] * np.array([1, 0.5, 0.25]))
        b = BesovParams(2, 2, 0.5)
        total = aniso_norm(u, AnisoParams(2, b, A))
        assert total > aniso_norm(u, AnisoParams(2, b, identity_operator(3)))

    def test_component_mismatch(self):
        from besovlab.errors import UsageError

        with pytest.raises(UsageError):
            aniso_norm(gaussian(), AnisoParams(2, BesovParams(2, 2, 1), identity_operator(2)))
