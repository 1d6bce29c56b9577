import math

import numpy as np
import pytest

from elfsim.compressors import Compressor
from elfsim.ensemble import (
    init_law,
    initial_points,
    logged_rounds,
    run_ensemble,
    thread_count,
)
from elfsim.federation import closed_form_totals
from elfsim.metrics import gaussian_kl
from elfsim.potentials import GaussianTarget
from elfsim.traceio import TRACE_COLUMNS, format_float


def rng(seed=0):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def gaussian_potential(seed=0, n=2, d=2):
    return GaussianTarget.random(n=n, d=d, rng=rng(seed)).potential()


class TestThreadCount:
    def test_explicit_wins(self):
        assert thread_count(10, threads=4) == 4

    def test_env_fallback(self, monkeypatch):
        monkeypatch.setenv("ELF_THREADS", "3")
        assert thread_count(10) == 3
        monkeypatch.delenv("ELF_THREADS")
        assert thread_count(10) == 1

    def test_capped_by_chains(self):
        assert thread_count(2, threads=16) == 2

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            thread_count(4, threads=0)


class TestLoggedRounds:
    def test_small_runs_log_every_round(self):
        assert np.array_equal(logged_rounds(10), np.arange(11))

    def test_large_runs_are_strided_with_endpoints(self):
        ks = logged_rounds(2500)
        assert ks[0] == 0 and ks[-1] == 2500
        assert len(ks) <= 1003
        assert np.all(np.diff(ks) >= 1)

    def test_explicit_stride(self):
        ks = logged_rounds(20, log_every=7)
        assert list(ks) == [0, 7, 14, 20]

    def test_zero_rounds(self):
        assert list(logged_rounds(0)) == [0]


class TestInitLaw:
    def test_default_standard_normal(self):
        law = init_law(3, None)
        assert np.array_equal(law.mean, np.zeros(3))
        assert np.array_equal(law.cov, np.eye(3))

    def test_scalar_shorthands(self):
        law = init_law(2, {"kind": "gaussian", "mean": 1.5, "cov": 4.0})
        assert np.array_equal(law.mean, [1.5, 1.5])
        assert np.array_equal(law.cov, 4.0 * np.eye(2))

    def test_point_init_has_no_law(self):
        assert init_law(2, {"kind": "point", "x": [0.0, 1.0]}) is None

    def test_bad_kind(self):
        with pytest.raises(ValueError, match="init kind"):
            init_law(2, {"kind": "uniform"})

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimensions"):
            init_law(2, {"kind": "gaussian", "mean": [1.0, 2.0, 3.0]})


class TestInitialPoints:
    def test_point_init_tiles_exactly(self):
        pot = gaussian_potential(1)
        pts, law = initial_points(0, [0, 1, 2], pot,
                                  {"kind": "point", "x": [1.0, -1.0]})
        assert law is None
        assert np.array_equal(pts, np.tile([1.0, -1.0], (3, 1)))

    def test_gaussian_draws_depend_on_chain_not_order(self):
        pot = gaussian_potential(2)
        a, _ = initial_points(5, [0, 1, 2], pot, None)
        b, _ = initial_points(5, [2, 0], pot, None)
        assert np.array_equal(a[2], b[0])
        assert np.array_equal(a[0], b[1])


class TestRunEnsemble:
    def test_thread_sharding_is_bitwise_invisible(self):
        pot = gaussian_potential(3)
        kw = dict(gamma=0.02, rounds=12, chains=8, master_seed=4,
                  uplink=Compressor("rand_k", d=2, k=1),
                  downlink=Compressor("scaled_natural", d=2))
        a = run_ensemble("belf", pot, threads=1, **kw)
        b = run_ensemble("belf", pot, threads=3, **kw)
        c = run_ensemble("belf", pot, threads=8, **kw)
        def formatted(ens):
            return [[format_float(getattr(r, col)) for col in TRACE_COLUMNS]
                    for r in ens.records]

        for other in (b, c):
            assert np.array_equal(a.x_final, other.x_final)
            assert np.array_equal(a.dual, other.dual)
            assert formatted(a) == formatted(other)

    def test_round_zero_slots(self):
        pot = gaussian_potential(4)
        k1 = Compressor("top_k", d=2, k=1)
        lmc = run_ensemble("lmc", pot, 0.02, 5, 3, 0)
        assert np.all(lmc.dual[:, 0] == 0.0)
        assert np.all(np.isnan(lmc.primal[:, 0]))
        belf = run_ensemble("belf", pot, 0.02, 5, 3, 0, uplink=k1, downlink=k1)
        assert np.all(belf.primal[:, 0] == 0.0)
        assert np.all(np.isnan(belf.step_sq[:, 0]))

    def test_records_cover_logged_rounds(self):
        pot = gaussian_potential(5)
        ens = run_ensemble("lmc", pot, 0.02, 9, 6, 1)
        assert [r.round for r in ens.records] == list(range(1, 10))
        assert ens.records[-1].round == ens.rounds

    def test_proxies_need_enough_chains(self):
        pot = gaussian_potential(6)  # d = 2, needs chains >= 4
        small = run_ensemble("lmc", pot, 0.02, 3, 3, 0)
        assert all(math.isnan(r.kl_proxy) for r in small.records)
        big = run_ensemble("lmc", pot, 0.02, 3, 6, 0)
        assert all(math.isfinite(r.kl_proxy) for r in big.records)

    def test_kl0_matches_closed_form(self):
        pot = gaussian_potential(7)
        ens = run_ensemble("lmc", pot, 0.02, 2, 2, 0)
        assert ens.kl0 == pytest.approx(gaussian_kl(ens.rho0, pot.target_law))

    def test_comm_ledger_matches_closed_form(self):
        pot = gaussian_potential(8)
        k1 = Compressor("top_k", d=2, k=1)
        ens = run_ensemble("delf", pot, 0.02, 7, 3, 0, uplink=k1)
        up, down = closed_form_totals("delf", pot.n, pot.d, 7, uplink_payload=2)
        assert ens.ledger.uplink_floats == up
        assert ens.ledger.downlink_floats == down
        assert ens.records[-1].uplink_floats_cum == up
        assert ens.records[-1].downlink_floats_cum == down

    def test_cumulative_columns_monotone(self):
        pot = gaussian_potential(9)
        ens = run_ensemble("lmc", pot, 0.02, 6, 2, 0)
        ups = [r.uplink_floats_cum for r in ens.records]
        assert all(a < b for a, b in zip(ups, ups[1:]))

    def test_bound_column(self):
        pot = gaussian_potential(10)
        ens = run_ensemble("lmc", pot, 0.02, 4, 2, 0, bound_fn=lambda k: 7.0 / k)
        assert [r.theory_bound for r in ens.records] == [7.0, 3.5, 7.0 / 3, 1.75]
        plain = run_ensemble("lmc", pot, 0.02, 4, 2, 0)
        assert all(math.isnan(r.theory_bound) for r in plain.records)

    @pytest.mark.filterwarnings("ignore:overflow")
    @pytest.mark.filterwarnings("ignore:invalid value")
    def test_divergence_truncates_and_flags(self):
        pot = gaussian_potential(11)
        ens = run_ensemble("lmc", pot, 1e100, 50, 4, 0)
        assert ens.diverged is not None
        assert all(r.round < ens.diverged for r in ens.records)
        assert ens.ledger.last_round <= ens.diverged - 1

    def test_point_init_reproducible(self):
        pot = gaussian_potential(12)
        init = {"kind": "point", "x": [0.5, -0.5]}
        a = run_ensemble("lmc", pot, 0.02, 5, 4, 3, init=init)
        b = run_ensemble("lmc", pot, 0.02, 5, 4, 3, init=init)
        assert np.array_equal(a.x_final, b.x_final)
        assert a.kl0 is None
