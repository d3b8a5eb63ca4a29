"""Multipliers, convolutions, probe corpus and norm estimates."""

import numpy as np
import pytest
import sympy as sp

from besovlab.besov import BesovParams
from besovlab.errors import ConfigError, UsageError
from besovlab.grid import Field, Grid, spectral_derivative
from besovlab.multipliers import (
    ProbeEnsemble,
    apply_multiplier,
    block_identity_defect,
    estimate_besov_norm,
    estimate_Lq_norm,
    exponent_line,
    fourier_type_constant,
    kernel_lq_norm,
    young_convolution,
    young_exponent,
)
from besovlab.spaces import identity_operator
from besovlab.symbols import PolySymbolSpec, Symbol, build_elliptic_symbols, mikhlin_constant, symbol_from_expr

G = Grid(1, 16.0, 512)
CORPUS = ProbeEnsemble.corpus(G, 1, 24, seed=11)
IDENT = Symbol("id", 1, expr=sp.Integer(1))


def gaussian(grid, w, components=1):
    return Field.from_function(grid, lambda x: np.exp(-np.sum(x**2, axis=-1) / (2 * w * w)))


def delta(grid):
    v = np.zeros(grid.shape)
    v[(grid.samples // 2,) * grid.dim] = 1.0 / grid.cell_volume
    return Field(grid, v)


class TestProbes:
    def test_deterministic(self):
        a = ProbeEnsemble.corpus(G, 3, 12, seed=5).probes
        b = ProbeEnsemble.corpus(G, 3, 12, seed=5).probes
        assert all(np.array_equal(f.values, h.values) for f, h in zip(a, b))

    def test_seed_changes_probes(self):
        a = ProbeEnsemble.corpus(G, 1, 8, seed=1).probes
        b = ProbeEnsemble.corpus(G, 1, 8, seed=2).probes
        assert not np.array_equal(a[0].values, b[0].values)

    def test_corpus_counts(self):
        ens = ProbeEnsemble.corpus(G, 2, 50)
        assert len(ens) == 50
        assert sorted(ens.counts.values()) == [12, 12, 13, 13]

    def test_unit_peak_and_decay(self):
        for grid in (G, Grid(2, 8.0, 64)):
            for f in ProbeEnsemble.corpus(grid, 3, 16, seed=4):
                peak = np.sqrt((np.abs(f.values) ** 2).sum(axis=-1)).max()
                assert peak == pytest.approx(1.0, rel=1e-14)
                edge = np.abs(np.take(f.values, [0, -1], axis=0)).max()
                assert edge < 1e-14

    def test_mix_is_not_scalar_times_vector(self):
        ens = ProbeEnsemble(G, 3, 0, {"mix": 4})
        ranks = [np.linalg.matrix_rank(f.values, tol=1e-8) for f in ens]
        assert max(ranks) >= 2

    def test_unknown_family(self):
        with pytest.raises(ConfigError):
            ProbeEnsemble(G, 1, 0, {"noise": 2})

    def test_coarse_grid(self):
        with pytest.raises(ConfigError):
            ProbeEnsemble(Grid(1, 2.0, 8))


class TestApplyMultiplier:
    def test_identity(self):
        for f in CORPUS.probes[:6]:
            assert np.abs(apply_multiplier(IDENT, f).values - f.values).max() < 1e-12

    def test_derivative(self):
        m = symbol_from_expr("I*xi", 1)
        for f in CORPUS.probes[:6]:
            d = spectral_derivative(f, (1,))
            assert np.abs(apply_multiplier(m, f).values - d.values).max() < 1e-12 * (1 + np.abs(d.values).max())

    def test_sigma1_identity_weight_closed_form(self):
        # A = I, L = xi^2: sigma_1 = 1 / (1 + lambda + xi^2)
        lam = 2 + 1j
        s1, _ = build_elliptic_symbols(PolySymbolSpec(2, coeffs={(2,): -1}), identity_operator(1), lam)
        f = gaussian(G, 1.3)
        fh = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(f.values[:, 0])))
        xi = G.freq_axis()
        want = np.fft.fftshift(np.fft.ifft(np.fft.ifftshift(fh / (1 + lam + xi**2))))
        assert np.abs(apply_multiplier(s1, f).values[:, 0] - want).max() < 1e-13

    def test_linear(self):
        m = symbol_from_expr("1/(1+xi^2)", 1)
        f, h = CORPUS.probes[0], CORPUS.probes[7]
        a, b = 2 - 1j, 0.5
        lhs = apply_multiplier(m, f * a + h * b).values
        rhs = a * apply_multiplier(m, f).values + b * apply_multiplier(m, h).values
        assert np.abs(lhs - rhs).max() < 1e-13

    def test_composition(self):
        m1 = symbol_from_expr("1/(1+xi^2)", 1)
        m2 = symbol_from_expr("exp(-xi^2/4)", 1)
        m12 = symbol_from_expr("exp(-xi^2/4)/(1+xi^2)", 1)
        for f in CORPUS.probes[:8]:
            lhs = apply_multiplier(m1, apply_multiplier(m2, f)).values
            assert np.abs(lhs - apply_multiplier(m12, f).values).max() < 1e-10

    def test_diagonal_on_components(self):
        from besovlab.spaces import DiagOperator, SequenceSpace

        A = DiagOperator(SequenceSpace.from_generator(2, 3, "m^2"))
        m = symbol_from_expr("d/(d + xi^2)", 1, entries=A.entries)
        f = ProbeEnsemble.corpus(G, 3, 4, seed=1).probes[0]
        out = apply_multiplier(m, f)
        for j, d in enumerate(A.entries):
            scalar = symbol_from_expr(f"{d}/({d} + xi^2)", 1)
            comp = Field(G, f.values[:, j])
            assert np.allclose(out.values[:, j], apply_multiplier(scalar, comp).values[:, 0], atol=1e-14)

    def test_dense_matches_diagonal(self):
        m = symbol_from_expr("d/(d + xi^2)", 1, entries=[1.0, 4.0])
        f = ProbeEnsemble.corpus(G, 2, 4, seed=2).probes[3]
        assert np.allclose(apply_multiplier(m, f).values, apply_multiplier(m.as_dense(), f).values, atol=1e-15)

    def test_frequency_input_rejected(self):
        from besovlab.grid import forward_ft

        with pytest.raises(UsageError):
            apply_multiplier(IDENT, forward_ft(CORPUS.probes[0]))


class TestYoungConvolution:
    def test_delta(self):
        for f in CORPUS.probes[:6]:
            assert np.abs(young_convolution(delta(G), f).values - f.values).max() < 1e-12

    def test_gaussian_closed_form(self):
        a, b = 1.0, 1.5
        out = young_convolution(gaussian(G, a), gaussian(G, b)).values[:, 0]
        x = G.axis()
        s2 = a * a + b * b
        exact = np.sqrt(2 * np.pi) * a * b / np.sqrt(s2) * np.exp(-(x**2) / (2 * s2))
        assert np.abs(out - exact).max() < 1e-8

    def test_zero(self):
        assert np.all(young_convolution(gaussian(G, 1), Field.zeros(G)).values == 0)

    def test_commutes(self):
        f, h = CORPUS.probes[1], CORPUS.probes[9]
        assert np.abs(young_convolution(f, h).values - young_convolution(h, f).values).max() < 1e-10

    def test_grid_mismatch(self):
        with pytest.raises(UsageError):
            young_convolution(gaussian(Grid(1, 8.0, 512), 1), gaussian(G, 1))

    def test_diagonal_kernel(self):
        k = Field(G, np.stack([gaussian(G, 1).values[:, 0], delta(G).values[:, 0]], axis=-1))
        f = ProbeEnsemble.corpus(G, 2, 4, seed=3).probes[0]
        out = young_convolution(k, f).values
        assert np.abs(out[:, 1] - f.values[:, 1]).max() < 1e-12
        scalar = young_convolution(gaussian(G, 1), Field(G, f.values[:, 0])).values[:, 0]
        assert np.abs(out[:, 0] - scalar).max() < 1e-13


class TestLqEstimates:
    def test_identity(self):
        est = estimate_Lq_norm(lambda f: f, 2, 2, CORPUS)
        assert est.value == pytest.approx(1.0, rel=1e-14)

    def test_zero_probe_skipped(self):
        est = estimate_Lq_norm(lambda f: f, 2, 2, [Field.zeros(G), CORPUS.probes[0]])
        assert est.skipped == 1 and len(est.ratios) == 1

    def test_classical_young(self):
        k = gaussian(G, 0.7)
        est = estimate_Lq_norm(lambda f: young_convolution(k, f), 2, 2, CORPUS)
        assert est.value <= kernel_lq_norm(k, 1) * (1 + 1e-9)

    def test_exponent_line(self):
        k = Field.from_function(G, lambda x: np.exp(-np.abs(x[..., 0])) * (1 + np.cos(3 * x[..., 0])))
        triples = exponent_line([1.0, 1.25, 1.5, 2.0], [1.1, 1.5, 2.0, 3.0])
        assert len(triples) >= 10
        for eta, q1, q2 in triples:
            est = estimate_Lq_norm(lambda f: young_convolution(k, f), q1, q2, CORPUS)
            assert est.value <= kernel_lq_norm(k, eta) * (1 + 1e-9), (eta, q1, q2)

    def test_monotone_in_probes(self):
        T = lambda f: young_convolution(gaussian(G, 0.5), f)  # noqa: E731
        sub = estimate_Lq_norm(T, 1.5, 3, CORPUS.probes[:10]).value
        full = estimate_Lq_norm(T, 1.5, 3, CORPUS).value
        assert full >= sub

    def test_bad_exponent(self):
        with pytest.raises(ConfigError):
            estimate_Lq_norm(lambda f: f, 0.5, 2, CORPUS)


class TestYoungExponent:
    def test_values(self):
        assert young_exponent(2, 1) == 2
        assert young_exponent(2, 4 / 3) == pytest.approx(4)
        assert young_exponent(2, 2) == np.inf

    def test_off_line(self):
        with pytest.raises(ConfigError):
            young_exponent(3, 2)

    def test_kernel_norm(self):
        k = gaussian(G, 1.0)
        assert kernel_lq_norm(k, 1) == pytest.approx(np.sqrt(2 * np.pi), rel=1e-12)
        assert kernel_lq_norm(k, np.inf) == 1.0


class TestBesovEstimates:
    def test_identity(self):
        p = BesovParams(2, 2, 0.5)
        est = estimate_besov_norm(lambda f: f, p, p, CORPUS)
        assert est.value == pytest.approx(1.0, abs=1e-10)

    def test_shared_s_and_r(self):
        with pytest.raises(ConfigError):
            estimate_besov_norm(lambda f: f, BesovParams(2, 2, 0.5), BesovParams(2, 2, 1.0), CORPUS)

    @pytest.mark.parametrize("s,r", [(0.5, 2), (1.5, 1), (0.5, np.inf)])
    def test_mikhlin_calibration(self, s, r):
        m = symbol_from_expr("1/(1+xi^2)", 1)
        T = lambda f: apply_multiplier(m, f)  # noqa: E731
        est = estimate_besov_norm(T, BesovParams(2, r, s), BesovParams(2, r, s), CORPUS)
        c = est.value / mikhlin_constant(m, G)
        assert 0 < c <= 1.0

    def test_scaling(self):
        m = symbol_from_expr("exp(-xi^2)", 1)
        p = BesovParams(1.5, 2, 0.5)
        a = estimate_besov_norm(lambda f: apply_multiplier(m, f), p, p, CORPUS).value
        b = estimate_besov_norm(lambda f: apply_multiplier(m * (3 - 4j), f), p, p, CORPUS).value
        assert b == pytest.approx(5 * a, rel=1e-12)


class TestBlockIdentity:
    @pytest.mark.parametrize("text", ["1/(1+xi^2)", "I*xi/(1+xi^2)", "exp(-xi^2/16)"])
    def test_corpus(self, text):
        m = symbol_from_expr(text, 1)
        worst = max(block_identity_defect(m, f, k) for f in CORPUS for k in range(0, 6))
        assert worst <= 1e-10


class TestFourierType:
    def test_p_two_plancherel(self):
        est = fourier_type_constant(CORPUS, 2)
        assert est.value == pytest.approx(np.sqrt(2 * np.pi), rel=1e-10)

    def test_p_one(self):
        assert fourier_type_constant(CORPUS, 1).value <= 1 + 1e-12

    def test_range(self):
        with pytest.raises(ConfigError):
            fourier_type_constant(CORPUS, 3)
