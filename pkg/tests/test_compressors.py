import numpy as np
import pytest

from elfsim.compressors import KINDS, Compressor


def rng(seed=0):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


class TestTopK:
    def test_keeps_largest_magnitudes(self):
        c = Compressor("top_k", d=3, k=1)
        out = c.compress(np.array([3.0, 1.0, -2.0]))
        assert np.array_equal(out, [3.0, 0.0, 0.0])

    def test_tie_break_lowest_index(self):
        c = Compressor("top_k", d=3, k=1)
        out = c.compress(np.array([2.0, -2.0, 1.0]))
        assert np.array_equal(out, [2.0, 0.0, 0.0])
        out = c.compress(np.array([-2.0, 2.0, 2.0]))
        assert np.array_equal(out, [-2.0, 0.0, 0.0])

    def test_k_equals_d_is_identity(self):
        c = Compressor("top_k", d=4, k=4)
        v = rng().standard_normal(4)
        assert np.array_equal(c.compress(v), v)

    def test_batch_matches_rowwise(self):
        c = Compressor("top_k", d=6, k=2)
        vs = rng(1).standard_normal((40, 6))
        batch = c.compress(vs)
        for i in range(40):
            assert np.array_equal(batch[i], c.compress(vs[i]))

    def test_pointwise_contraction(self):
        g = rng(2)
        for d, k in ((1, 1), (5, 2), (50, 13)):
            c = Compressor("top_k", d=d, k=k)
            vs = g.standard_normal((200, d)) * np.exp(g.uniform(-3, 3, (200, 1)))
            out = c.compress(vs)
            err = np.einsum("ij,ij->i", out - vs, out - vs)
            norm = np.einsum("ij,ij->i", vs, vs)
            assert np.all(err <= (1 - c.alpha) * norm * (1 + 1e-12))


class TestRandK:
    def test_unscaled_selection(self):
        c = Compressor("rand_k", d=5, k=2)
        v = rng(3).standard_normal(5)
        out = c.compress(v, rng(4))
        kept = out != 0
        assert kept.sum() <= 2
        assert np.array_equal(out[kept], v[kept])

    def test_mean_preserves_k_over_d_of_input(self):
        c = Compressor("rand_k", d=6, k=2)
        v = rng(5).standard_normal(6)
        g = rng(6)
        acc = np.zeros(6)
        trials = 4000
        for _ in range(trials):
            acc += c.compress(v, g)
        assert np.allclose(acc / trials, (2 / 6) * v, atol=0.05)

    def test_contraction_in_expectation(self):
        # selection attains E||Q(v)-v||^2 = (1-k/d)||v||^2 exactly
        c = Compressor("rand_k", d=5, k=2)
        v = rng(7).standard_normal(5)
        g = rng(8)
        trials = 5000
        ratios = np.empty(trials)
        norm = v @ v
        for t in range(trials):
            diff = c.compress(v, g) - v
            ratios[t] = (diff @ diff) / norm
        se = ratios.std(ddof=1) / np.sqrt(trials)
        assert abs(ratios.mean() - (1 - c.alpha)) <= 3 * se

    def test_requires_rng(self):
        c = Compressor("rand_k", d=4, k=1)
        with pytest.raises(ValueError, match="rng"):
            c.compress(np.ones(4))


class TestScaledNatural:
    def test_alpha_is_eight_ninths(self):
        assert Compressor("scaled_natural", d=3).alpha == pytest.approx(8 / 9, abs=1e-15)

    def test_powers_of_two_deterministic(self):
        c = Compressor("scaled_natural", d=4)
        v = np.array([1.0, -2.0, 0.25, 8.0])
        out = c.compress(v, rng(9))
        assert np.allclose(out, (8 / 9) * v, rtol=0, atol=0)

    def test_zero_preserved_sign_preserved(self):
        c = Compressor("scaled_natural", d=3)
        out = c.compress(np.array([0.0, -3.0, 5.0]), rng(10))
        assert out[0] == 0.0
        assert out[1] < 0 < out[2]

    def test_rounds_to_adjacent_powers(self):
        c = Compressor("scaled_natural", d=1)
        g = rng(11)
        for _ in range(200):
            v = np.array([g.uniform(0.1, 10.0)])
            out = c.compress(v, g) * 9 / 8
            e = np.floor(np.log2(v[0]))
            assert out[0] in (2.0**e, 2.0 ** (e + 1))

    def test_unbiased_up_to_scaling(self):
        c = Compressor("scaled_natural", d=1)
        v = np.array([0.7])
        g = rng(12)
        trials = 20000
        acc = 0.0
        for _ in range(trials):
            acc += c.compress(v, g)[0]
        assert acc / trials == pytest.approx((8 / 9) * 0.7, abs=0.01)


class TestScaledWrapper:
    def test_omega_zero_is_identity_bitwise(self):
        c = Compressor("scaled_unbiased_wrapper", d=5, omega=0.0)
        v = rng(13).standard_normal(5)
        assert np.array_equal(c.compress(v), v)
        assert not c.requires_rng

    def test_contraction_exactly_tight(self):
        # the random dilation attains the bound with equality for every input
        omega = 2.0
        c = Compressor("scaled_unbiased_wrapper", d=4, omega=omega)
        v = rng(14).standard_normal(4)
        g = rng(15)
        norm = v @ v
        trials = 4000
        ratios = np.empty(trials)
        for t in range(trials):
            diff = c.compress(v, g) - v
            ratios[t] = (diff @ diff) / norm
        se = ratios.std(ddof=1) / np.sqrt(trials)
        assert abs(ratios.mean() - (1 - c.alpha)) <= 3 * se
        assert c.alpha == pytest.approx(1 / (omega + 1))


class TestIdentity:
    def test_identity_returns_copy(self):
        c = Compressor("identity", d=3)
        v = np.array([1.0, 2.0, 3.0])
        out = c.compress(v)
        assert np.array_equal(out, v)
        out[0] = 99.0
        assert v[0] == 1.0
        assert c.alpha == 1.0


class TestPayloadRules:
    def test_per_kind_counts(self):
        d = 10
        v = np.zeros(d)
        assert Compressor("top_k", d=d, k=3).payload_floats(v) == 6
        assert Compressor("rand_k", d=d, k=4).payload_floats(v) == 8
        assert Compressor("identity", d=d).payload_floats(v) == d
        assert Compressor("scaled_natural", d=d).payload_floats(v) == d
        assert Compressor("scaled_unbiased_wrapper", d=d, omega=1.0).payload_floats(v) == d

    def test_length_mismatch_rejected(self):
        c = Compressor("top_k", d=5, k=2)
        with pytest.raises(ValueError, match="does not match"):
            c.payload_floats(np.zeros(4))
        with pytest.raises(ValueError, match="does not match"):
            c.compress(np.zeros(6))


class TestConfig:
    def test_round_trip(self):
        for cfg in ({"kind": "top_k", "k": 2}, {"kind": "identity"},
                    {"kind": "scaled_unbiased_wrapper", "omega": 1.5},
                    {"kind": "rand_k", "k": 1}, {"kind": "scaled_natural"}):
            c = Compressor.from_config(cfg, d=4)
            assert Compressor.from_config(c.to_config(), d=4) == c

    def test_validation_errors(self):
        with pytest.raises(ValueError, match="unknown compressor kind"):
            Compressor("best_k", d=3)
        with pytest.raises(ValueError, match="requires k"):
            Compressor("top_k", d=3)
        with pytest.raises(ValueError, match="1 <= k <= d"):
            Compressor("top_k", d=3, k=4)
        with pytest.raises(ValueError, match="1 <= k <= d"):
            Compressor("rand_k", d=3, k=0)
        with pytest.raises(ValueError, match="omega"):
            Compressor("scaled_unbiased_wrapper", d=3)
        with pytest.raises(ValueError, match="omega"):
            Compressor("scaled_unbiased_wrapper", d=3, omega=-0.1)
        with pytest.raises(ValueError, match="unknown compressor config keys"):
            Compressor.from_config({"kind": "top_k", "k": 1, "level": 2}, d=3)
        with pytest.raises(ValueError, match="'kind'"):
            Compressor.from_config({"k": 1}, d=3)


def test_alpha_values():
    assert Compressor("top_k", d=10, k=5).alpha == 0.5
    assert Compressor("rand_k", d=8, k=2).alpha == 0.25
    assert Compressor("scaled_unbiased_wrapper", d=3, omega=3.0).alpha == 0.25
    assert Compressor("identity", d=7).alpha == 1.0
