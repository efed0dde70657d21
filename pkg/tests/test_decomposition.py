import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from partialcoin.coefficients import SignedPmf, partial_coin_pmf
from partialcoin.decomposition import (
    BiasedCoinSpec,
    Decomposition,
    NonnegPmf,
    biased_coin_pmf,
    build_biased_g,
    build_biased_h,
    build_g,
    build_h,
    decompose,
    decompose_biased,
    defect_mass,
    product_residual,
    verify_product,
)
from partialcoin.errors import ConfigurationError, DomainError

from conftest import MU_GRID, exact_binomial


def exact_difference_series(mu: Fraction, n_terms: int) -> list[Fraction]:
    """Coefficients of x**1..x**N in (1 + x)**mu - (1 - x**2)**mu, exactly."""
    out = []
    for m in range(1, n_terms + 1):
        c = exact_binomial(mu, m)
        if m % 2 == 0:
            c -= (-1) ** (m // 2) * exact_binomial(mu, m // 2)
        out.append(c)
    return out


def naive_product(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    n = len(g)
    return np.array([sum(f[i] * g[j - i] for i in range(j + 1)) for j in range(n)])


class TestBuildG:
    def test_half_minus_one(self):
        g = build_g(0.5, -1, 4)
        assert g.support_offset == 0
        assert g.probs.tolist() == [0.5, 0.125, 0.0625, 0.0390625]

    def test_shift_zero(self):
        g = build_g(0.5, 0, 2)
        assert g.support.tolist() == [1, 2]
        assert g.probs.tolist() == [0.5, 0.125]

    def test_fair_coin_point_mass(self):
        g = build_g(1.0, -1, 6)
        assert g.support_offset == 0
        assert g.probs[0] == 1.0 and not np.any(g.probs[1:])

    @pytest.mark.parametrize("shift", [-2, 0.5])
    def test_bad_shift(self, shift):
        with pytest.raises(DomainError):
            build_g(0.5, shift, 4)


class TestBuildH:
    def test_examples(self):
        h = build_h(0.5, -1, 4)
        assert h.support_offset == 0
        assert h.probs[0] == pytest.approx(2**-0.5 * 0.5, abs=1e-15)
        assert h.probs[0] == pytest.approx(0.3535534, abs=1e-7)
        assert h.probs[1] == pytest.approx(0.2651650, abs=1e-7)
        assert h.probs[3] == pytest.approx(0.0607670, abs=1e-7)

    def test_x_squared_coefficient_is_three_eighths(self):
        # (1+x)^(1/2) - (1-x^2)^(1/2) = x + 3/8 x^2 + ...
        assert exact_difference_series(Fraction(1, 2), 2) == [Fraction(1, 2), Fraction(3, 8)]
        assert build_h(0.5, -1, 2).probs[1] == pytest.approx(2**-0.5 * 3 / 8, abs=1e-16)

    @pytest.mark.parametrize("mu", [Fraction(1, 2), Fraction(1, 3), Fraction(4, 5)])
    def test_against_exact_series(self, mu):
        h = build_h(float(mu), -1, 40)
        expected = [2 ** -float(mu) * float(c) for c in exact_difference_series(mu, 40)]
        np.testing.assert_allclose(h.probs, expected, rtol=1e-12, atol=1e-16)

    @pytest.mark.parametrize("mu", MU_GRID)
    def test_equals_naive_product(self, mu):
        f = partial_coin_pmf(mu, 300).p
        g = build_g(mu, -1, 300).probs
        np.testing.assert_allclose(build_h(mu, -1, 300).probs, naive_product(f, g), rtol=0, atol=1e-12)

    @pytest.mark.parametrize("mu", MU_GRID)
    def test_strictly_positive(self, mu):
        assert np.all(build_g(mu, -1, 10**5).probs > 0)
        assert np.all(build_h(mu, -1, 10**5).probs > 0)

    def test_fair_coin(self):
        h = build_h(1.0, -1, 4)
        assert h.probs.tolist() == [0.5, 0.5, 0.0, 0.0]


class TestShiftEquivariance:
    @pytest.mark.parametrize("k", [0, 1, 3, 10])
    def test_g_and_h(self, k):
        for build in (build_g, build_h):
            base, shifted = build(0.4, -1, 500), build(0.4, k, 500)
            assert shifted.support_offset == base.support_offset + k + 1
            np.testing.assert_array_equal(shifted.probs, base.probs)

    def test_biased(self):
        spec = BiasedCoinSpec(0.6, 0.4, 0.5)
        for build in (build_biased_g, build_biased_h):
            base, shifted = build(spec, -1, 50), build(spec, 3, 50)
            assert shifted.support_offset == 4
            np.testing.assert_array_equal(shifted.probs, base.probs)


class TestBiasedSpec:
    def test_normalized_swaps(self):
        spec = BiasedCoinSpec.normalized(0.4, 0.6, 0.5)
        assert (spec.a, spec.b, spec.swapped) == (0.6, 0.4, True)
        assert not BiasedCoinSpec.normalized(0.6, 0.4, 0.5).swapped

    def test_fair_allowed_but_flagged(self):
        assert BiasedCoinSpec.normalized(0.5, 0.5, 0.5).is_fair

    @pytest.mark.parametrize("a, b, mu", [(0.3, 0.6, 0.5), (0.0, 1.0, 0.5), (0.6, 0.4, 0.0), (0.4, 0.6, 0.5)])
    def test_invalid(self, a, b, mu):
        with pytest.raises(DomainError):
            BiasedCoinSpec(a, b, mu)

    def test_fair_routed_away(self):
        spec = BiasedCoinSpec(0.5, 0.5, 0.5)
        with pytest.raises(ConfigurationError):
            build_biased_g(spec, -1, 10)
        with pytest.raises(ConfigurationError):
            build_biased_h(spec, -1, 10)


class TestBiasedConstruction:
    spec = BiasedCoinSpec(0.6, 0.4, 0.5)

    def test_g_first_coefficient(self):
        assert build_biased_g(self.spec, -1, 5).probs[0] == pytest.approx(0.5 * 2 / 3, abs=1e-15)

    def test_h_first_coefficient(self):
        h = build_biased_h(self.spec, -1, 5)
        assert h.probs[0] == pytest.approx(0.6**0.5 * (2 / 3) * 0.5, abs=1e-15)
        assert h.probs[0] == pytest.approx(0.2581989, abs=1e-7)

    def test_defect_mass_values(self):
        assert defect_mass(self.spec) == pytest.approx(1 - (1 / 3) ** 0.5, abs=1e-15)
        assert defect_mass(self.spec) == pytest.approx(0.4226497, abs=1e-7)
        c = defect_mass(BiasedCoinSpec(0.7, 0.3, 0.75))
        assert c == pytest.approx(1 - (0.4 / 0.7) ** 0.75, abs=1e-15)
        # 0.3427570, the value often given, is off in the sixth decimal
        assert c == pytest.approx(0.3427570, abs=1e-5)

    def test_defect_mass_vanishes_for_degenerate_coin(self):
        masses = [defect_mass(BiasedCoinSpec(1 - b, b, 0.5)) for b in (1e-2, 1e-4, 1e-8)]
        assert masses[0] > masses[1] > masses[2] > 0
        assert masses[2] < 1e-8

    @pytest.mark.parametrize("a, b, mu", [(0.6, 0.4, 0.5), (0.9, 0.1, 0.5), (0.7, 0.3, 0.75), (0.55, 0.45, 0.2)])
    def test_masses_converge_geometrically(self, a, b, mu):
        spec = BiasedCoinSpec(a, b, mu)
        c = defect_mass(spec)
        r = b / a
        for n in (5, 20, 80):
            bound = r**n / (1 - r)
            assert abs(build_biased_g(spec, -1, n).probs.sum() - c) <= bound + 1e-15
            assert abs(build_biased_h(spec, -1, n).probs.sum() - c) <= bound + 1e-15
        assert build_biased_g(spec, -1, 2000).total_mass == c

    def test_h_mass_identity(self):
        # h(1) = 1 - a**-mu (a**2 - b**2)**mu equals g(1) when a + b = 1
        a, b, mu = 0.7, 0.3, 0.75
        assert 1 - a**-mu * (a * a - b * b) ** mu == pytest.approx(defect_mass(BiasedCoinSpec(a, b, mu)), abs=1e-15)

    def test_near_fair_limit(self):
        eps = 1e-9
        spec = BiasedCoinSpec(0.5 + eps, 0.5 - eps, 0.5)
        assert defect_mass(spec) == pytest.approx(1.0, abs=1e-3)
        np.testing.assert_allclose(
            build_biased_h(spec, -1, 20).probs, build_h(0.5, -1, 20).probs, rtol=1e-6
        )

    def test_biased_f_is_scaled_binomial(self):
        spec = BiasedCoinSpec(0.7, 0.3, 0.75)
        p = biased_coin_pmf(spec, 25).p
        a, b, mu = Fraction(7, 10), Fraction(3, 10), Fraction(3, 4)
        expected = [0.7**0.75 * float((b / a) ** n * exact_binomial(mu, n)) for n in range(26)]
        np.testing.assert_allclose(p, expected, rtol=1e-12)


class TestVerifyProduct:
    def test_half_coin(self):
        assert verify_product(decompose(0.5, -1, 200), 1e-12)

    def test_fair_coin(self):
        d = decompose(1.0, -1, 5)
        assert d.h.probs.tolist()[:2] == [0.5, 0.5]
        assert verify_product(d, 1e-15)

    def test_detects_fault(self):
        d = decompose(0.5, -1, 200)
        p = np.array(d.f.p)
        p[3] += 1e-6
        bad = Decomposition(SignedPmf(0.5, 200, p), d.g, d.h, -1)
        assert not verify_product(bad, 1e-9)

    @pytest.mark.parametrize("mu", [0.1, 0.5, 0.9])
    def test_fft_path(self, mu):
        assert verify_product(decompose(mu, 3, 50_000), 1e-12)

    def test_biased(self):
        assert verify_product(decompose_biased(BiasedCoinSpec(0.6, 0.4, 0.5), 0, 200), 1e-12)

    def test_mismatched_lengths(self):
        d = decompose(0.5, -1, 20)
        with pytest.raises(ConfigurationError):
            verify_product(Decomposition(d.f, d.g, build_h(0.5, -1, 19), -1))
        with pytest.raises(ConfigurationError):
            verify_product(Decomposition(partial_coin_pmf(0.5, 5), d.g, d.h, -1))
        with pytest.raises(ConfigurationError):
            verify_product(Decomposition(d.f, d.g, build_h(0.5, 0, 20), -1))

    def test_residual_shape(self):
        assert product_residual(decompose(0.3, -1, 64)).shape == (64,)


@settings(max_examples=40, deadline=None)
@given(mu=st.floats(0.01, 0.99), n=st.integers(1, 300), k=st.integers(-1, 5))
def test_decomposition_property(mu, n, k):
    d = decompose(mu, k, n)
    assert np.all(d.g.probs > 0) and np.all(d.h.probs > 0)
    assert d.g.probs.sum() <= 1 + 1e-12 and d.h.probs.sum() <= 1 + 1e-12
    assert verify_product(d, 1e-12)


@settings(max_examples=40, deadline=None)
@given(b=st.floats(0.01, 0.49), mu=st.floats(0.05, 1.0), n=st.integers(1, 300))
def test_biased_decomposition_property(b, mu, n):
    spec = BiasedCoinSpec(1 - b, b, mu)
    d = decompose_biased(spec, -1, n)
    assert np.all(d.g.probs >= 0) and np.all(d.h.probs >= 0)
    c = defect_mass(spec)
    assert d.g.probs.sum() <= c + 1e-12 and d.h.probs.sum() <= c + 1e-12
    assert verify_product(d, 1e-12)
