import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obfuskit.errors import (
    MarginalMismatch,
    MassMismatch,
    NegativeMass,
    NotInterior,
    SupportViolation,
)
from obfuskit.prob_core import (
    JointUSX,
    JointXZ,
    Kernel,
    chi2_divergence,
    compose_markov,
    kl_divergence,
    marginalize,
    mutual_information,
    validate_pmf,
)
from tests.conftest import random_direction, random_interior


def naive_kl(p, q, reverse=False):
    idx = range(len(p) - 1, -1, -1) if reverse else range(len(p))
    return sum(p[i] * math.log(p[i] / q[i]) for i in idx if p[i] > 0)


def double_sum_mi(P):
    px, pz = P.sum(axis=1), P.sum(axis=0)
    return sum(
        P[x, z] * math.log(P[x, z] / (px[x] * pz[z]))
        for x in range(P.shape[0])
        for z in range(P.shape[1])
        if P[x, z] > 0
    )


class TestValidatePmf:
    def test_uniform_interior(self):
        p = validate_pmf([0.5, 0.5])
        assert p.interior and p.alphabet_size == 2

    def test_vertex_not_interior(self):
        assert not validate_pmf([1.0, 0.0]).interior

    def test_mass_mismatch(self):
        with pytest.raises(MassMismatch):
            validate_pmf([0.3, 0.3, 0.3])

    def test_negative(self):
        with pytest.raises(NegativeMass):
            validate_pmf([1.1, -0.1])

    def test_tiny_negative_clamped(self):
        p = validate_pmf([1.0 + 5e-13, -5e-13])
        assert p.values[1] == 0.0
        assert abs(p.values.sum() - 1) <= 1e-15

    def test_renormalises_small_deviation(self):
        p = validate_pmf([0.5, 0.5 + 1e-10])
        assert abs(p.values.sum() - 1) <= 1e-15

    def test_immutable(self):
        p = validate_pmf([0.5, 0.5])
        with pytest.raises(ValueError):
            p.values[0] = 1.0


class TestMarginalize:
    def test_uniform(self):
        j = JointUSX(np.full((2, 2, 4), 1 / 16))
        np.testing.assert_allclose(marginalize(j, "X").values, [0.25] * 4, atol=1e-15)

    def test_independent_bits_secret(self, bits):
        # direct summation of the stated tensor: p_S(s) = sum over n of 1/4
        np.testing.assert_allclose(marginalize(bits, "S").values, [0.5, 0.5], atol=1e-15)

    def test_singleton(self):
        j = JointUSX(np.ones((1, 1, 1)))
        assert marginalize(j, "U").values.tolist() == [1.0]

    def test_bad_axis(self, bits):
        with pytest.raises(ValueError):
            marginalize(bits, "Z")

    def test_non_interior_p_x_rejected(self):
        t = np.zeros((1, 1, 2))
        t[0, 0, 0] = 1.0
        with pytest.raises(NotInterior):
            JointUSX(t)


class TestKL:
    def test_identity(self):
        assert kl_divergence([0.5, 0.5], [0.5, 0.5]) == 0.0

    def test_deterministic_vs_uniform(self):
        assert kl_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-15)

    def test_against_reversed_summation(self):
        p, q = [0.6, 0.4], [0.5, 0.5]
        a, b = naive_kl(p, q), naive_kl(p, q, reverse=True)
        assert abs(a - b) <= 1e-15
        assert abs(kl_divergence(p, q) - a) <= 1e-15

    def test_support_violation(self):
        with pytest.raises(SupportViolation):
            kl_divergence([0.5, 0.5], [1.0, 0.0])

    @settings(max_examples=200, deadline=None)
    @given(st.integers(2, 8), st.integers(0, 2**32 - 1))
    def test_nonnegative_and_matches_definition(self, n, seed):
        rng = np.random.default_rng(seed)
        p, q = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))
        d = kl_divergence(p, q)
        assert d >= 0
        assert d == pytest.approx(naive_kl(p, q), rel=1e-12, abs=1e-15)

    def test_zero_iff_equal(self, rng):
        p = rng.dirichlet(np.ones(5))
        assert kl_divergence(p, p) == 0.0
        q = p.copy()
        q[0] += 1e-6
        q[1] -= 1e-6
        assert kl_divergence(p, q) > 0


class TestChi2:
    def test_identity(self):
        assert chi2_divergence([0.3, 0.7], [0.3, 0.7]) == 0.0

    def test_hand_value_delta(self):
        # 2 * 0.1**2 / 0.5
        assert chi2_divergence([0.5, 0.5], [0.6, 0.4]) == pytest.approx(0.04, abs=1e-15)

    def test_hand_value_swap(self):
        assert chi2_divergence([0.25, 0.75], [0.75, 0.25]) == pytest.approx(4 / 3, abs=1e-15)

    def test_not_interior(self):
        with pytest.raises(NotInterior):
            chi2_divergence([1.0, 0.0], [0.5, 0.5])


def test_local_kl_chi2_ratio_shrinks(rng):
    for _ in range(20):
        p = random_interior(rng, 6)
        h = random_direction(rng, p) * np.sqrt(p)
        ratios = []
        for eps in (1e-1, 1e-2, 1e-3):
            if np.any(p + eps * h <= 0):
                break
            r = p + eps * h
            ratios.append(abs(kl_divergence(p, r) - 0.5 * chi2_divergence(p, r)) / eps**2)
            sym = abs(kl_divergence(p, r) - kl_divergence(r, p)) / eps**2
            assert sym <= 10 * eps
        assert all(a > b for a, b in zip(ratios, ratios[1:]))


class TestMutualInformation:
    def test_product(self):
        P = np.outer([0.3, 0.7], [0.2, 0.5, 0.3])
        assert mutual_information(JointXZ(P)) == pytest.approx(0.0, abs=1e-16)

    def test_identity_coupling(self):
        assert mutual_information(JointXZ(np.diag([0.5, 0.5]))) == pytest.approx(math.log(2), abs=1e-15)

    def test_two_by_two_double_sum(self):
        P = np.array([[0.3, 0.2], [0.2, 0.3]])
        ref = double_sum_mi(P)
        assert abs(mutual_information(JointXZ(P)) - ref) <= 1e-12
        assert ref == pytest.approx(0.6 * math.log(1.2) + 0.4 * math.log(0.8), abs=1e-15)

    def test_random_double_sum(self, rng):
        for _ in range(100):
            n, m = rng.integers(1, 8, size=2)
            P = rng.dirichlet(np.ones(n * m)).reshape(n, m)
            assert abs(mutual_information(JointXZ(P)) - double_sum_mi(P)) <= 1e-12


class TestComposeMarkov:
    def test_uninformative_release(self, bits):
        K = np.tile(bits.p_X.values[:, None], (1, 3))
        for j in compose_markov(bits, [0.2, 0.3, 0.5], K):
            assert mutual_information(j) == pytest.approx(0, abs=1e-15)
            np.testing.assert_allclose(j.matrix, np.outer(j.p_X.values, j.p_Z.values), atol=1e-16)

    def test_release_non_sensitive_bit(self, bits):
        # Z = N; brute force over the 2x2x4x2 joint p(u,s,x,z)
        K = np.zeros((4, 2))
        for s in range(2):
            for n in range(2):
                K[2 * s + n, n] = 0.5
        full = np.zeros((2, 2, 4, 2))
        for u in range(2):
            for s in range(2):
                for x in range(4):
                    for z in range(2):
                        full[u, s, x, z] = bits.tensor[u, s, x] * (1.0 if x % 2 == z else 0.0)
        _, juz, jsz = compose_markov(bits, [0.5, 0.5], K)
        np.testing.assert_allclose(juz.matrix, full.sum(axis=(1, 2)), atol=1e-16)
        np.testing.assert_allclose(jsz.matrix, full.sum(axis=(0, 2)), atol=1e-16)
        assert mutual_information(jsz) == pytest.approx(0, abs=1e-15)
        assert mutual_information(juz) == pytest.approx(math.log(2), abs=1e-15)

    def test_constant_release(self, bits):
        jxz, juz, jsz = compose_markov(bits, [1.0], bits.p_X.values[:, None])
        np.testing.assert_allclose(juz.matrix[:, 0], bits.p_U.values, atol=1e-16)

    def test_marginal_mismatch(self, bits):
        K = np.zeros((4, 1))
        K[0, 0] = 1.0
        with pytest.raises(MarginalMismatch):
            compose_markov(bits, [1.0], K)

    def test_marginals_recovered(self, rng):
        from obfuskit.instances import random_joint

        for _ in range(30):
            j = random_joint(rng, 2, 3, 4)
            nz = 3
            pz = rng.dirichlet(np.ones(nz))
            # conditionals p_X + eps * h_z with sum_z pz h_z = 0
            H = rng.standard_normal((4, nz))
            H -= H.mean(axis=0)
            H -= (H @ pz)[:, None]
            H -= H.mean(axis=0)
            H *= 0.01 * j.p_X.values.min() / np.abs(H).max()
            K = j.p_X.values[:, None] + H - (H @ pz)[:, None]
            K /= K.sum(axis=0)
            jxz, juz, jsz = compose_markov(j, pz, Kernel(K) if False else K - 0.0)
            np.testing.assert_allclose(juz.p_X.values, j.p_U.values, atol=1e-12)
            np.testing.assert_allclose(jsz.p_X.values, j.p_S.values, atol=1e-12)
            np.testing.assert_allclose(jxz.p_X.values, j.p_X.values, atol=1e-12)
