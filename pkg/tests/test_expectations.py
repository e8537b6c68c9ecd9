import numpy as np
import pytest

from onebit_mimo import build_scenario, compute_moments, qam16, qpsk, zadoff_chu_pilots
from onebit_mimo.air_interface import bpsk, data_phase
from onebit_mimo.channel import sample_channels
from onebit_mimo.estimator import estimate_energy
from onebit_mimo.expectations import (
    TableBudgetError,
    build_expectation_table,
    expectation_vector_e,
    expected_soft_symbol_mrc,
    expected_soft_symbol_scaled,
    expected_soft_symbols_mrc_batch,
    load_table,
    perfect_csi_table,
    save_table,
    table_cache_key,
)
from onebit_mimo.moments import data_pilot_crosscovariance
from onebit_mimo.oracles import explicit_blmmse_matrix, mc_soft_symbols
from onebit_mimo.validate import elementwise_z


def rows_of(table, perm):
    shape = (table.L,) * table.K
    return np.ravel_multi_index(tuple(perm[table.indices].T), shape)


class TestMrcExpectation:
    def test_single_matches_batch(self, medium):
        sc, book, m = medium
        x = qam16().symbols[[3, 9]]
        cross = data_pilot_crosscovariance(sc, book, x)
        batch = expected_soft_symbols_mrc_batch(m, x[None, :])[0]
        for k in range(2):
            assert expected_soft_symbol_mrc(m, cross, k) == pytest.approx(batch[k], rel=1e-12)

    def test_trace_form(self, small):
        sc, book, m = small
        x = qam16().symbols[[1, 14]]
        c_rrp = data_pilot_crosscovariance(sc, book, x).C_rrp
        for k in range(2):
            B = m.pilot_weighted(k)
            ref = np.sqrt(sc.rho) * np.trace(np.linalg.solve(m.C_rp, B) @ c_rrp)
            assert expected_soft_symbol_mrc(m, data_pilot_crosscovariance(sc, book, x), k) == pytest.approx(ref)

    def test_monte_carlo(self, medium):
        sc, book, m = medium
        X = qam16().symbols[np.array([[0, 15], [5, 10]])]
        est = mc_soft_symbols(sc, book, X, explicit_blmmse_matrix(sc, book, m.A_p, m.C_rp), ("MRC",),
                              20_000, 17)["MRC"]
        assert elementwise_z(expected_soft_symbols_mrc_batch(m, X), est).max() <= 4


class TestScaling:
    def test_zf_unit_energy_identity(self):
        assert expected_soft_symbol_scaled(0.3 - 2j, np.ones(2), 5.0, 1, "ZF") == 0.3 - 2j

    def test_mmse_low_snr(self):
        assert expected_soft_symbol_scaled(1 + 1j, np.array([3.0]), 1e-12, 0, "MMSE") == pytest.approx(1 + 1j)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            expected_soft_symbol_scaled(1.0, np.ones(1), 1.0, 0, "LMMSE")

    def test_tables_are_scaled_mrc(self, medium, mrc_table):
        m = medium[2]
        en = estimate_energy(m)
        zf = build_expectation_table(m, qam16(), "ZF")
        mmse = build_expectation_table(m, qam16(), "MMSE")
        np.testing.assert_allclose(zf.entries, mrc_table.entries / en, rtol=1e-14)
        np.testing.assert_allclose(mmse.entries, mrc_table.entries / (1 + m.scenario.rho * en), rtol=1e-14)


class TestTable:
    def test_shape_and_order(self, mrc_table):
        assert mrc_table.entries.shape == (256, 2)
        np.testing.assert_array_equal(mrc_table.indices[17], [1, 1])
        assert mrc_table.flat_index([15, 0]) == 240

    def test_averaged_recomputed(self, mrc_table):
        for k in range(2):
            for l in range(16):
                ref = mrc_table.entries[mrc_table.indices[:, k] == l, k].mean()
                assert abs(mrc_table.averaged[k, l] - ref) <= 1e-14 * max(1, abs(ref))

    def test_k1_degenerate(self):
        sc = build_scenario(4, 1, 1.0)
        m = compute_moments(sc, zadoff_chu_pilots(3, 1))
        t = build_expectation_table(m, qam16())
        assert t.entries.shape == (16, 1)
        np.testing.assert_array_equal(t.averaged[0], t.entries[:, 0])

    def test_negation_symmetry(self, mrc_table):
        e = mrc_table.entries
        np.testing.assert_allclose(e[rows_of(mrc_table, qam16().negation_permutation())], -e, atol=1e-10)

    def test_rotation_symmetry(self, mrc_table):
        e = mrc_table.entries
        np.testing.assert_allclose(e[rows_of(mrc_table, qam16().rotation_permutation())], 1j * e, atol=1e-10)

    def test_symmetry_shortcut_matches_direct(self, medium, mrc_table):
        fast = build_expectation_table(medium[2], qam16(), "MRC", use_symmetry=True)
        np.testing.assert_allclose(fast.entries, mrc_table.entries, atol=1e-12)

    def test_shortcut_without_rotation_closure(self, medium):
        # BPSK is not closed under multiplication by j; the shortcut falls back to enumeration
        t = build_expectation_table(medium[2], bpsk(), "MRC", use_symmetry=True)
        np.testing.assert_allclose(t.entries, build_expectation_table(medium[2], bpsk()).entries)

    def test_budget(self):
        sc = build_scenario(4, 4, 1.0)
        m = compute_moments(sc, zadoff_chu_pilots(5, 4))
        with pytest.raises(TableBudgetError):
            build_expectation_table(m, qam16())
        assert build_expectation_table(m, qpsk()).entries.shape == (256, 4)

    def test_unknown_kind(self, medium):
        with pytest.raises(ValueError):
            build_expectation_table(medium[2], qam16(), "LMMD")


class TestExpectationVector:
    def test_lookup_exact(self, mrc_table):
        np.testing.assert_array_equal(expectation_vector_e(mrc_table, [3, 7]),
                                      mrc_table.entries[mrc_table.flat_index([3, 7])])

    def test_odd(self, mrc_table):
        neg = qam16().negation_permutation()
        e = expectation_vector_e(mrc_table, [3, 7])
        np.testing.assert_allclose(expectation_vector_e(mrc_table, neg[[3, 7]]), -e, atol=1e-12)

    def test_rotation(self, mrc_table):
        rot = qam16().rotation_permutation()
        e = expectation_vector_e(mrc_table, [3, 7])
        np.testing.assert_allclose(expectation_vector_e(mrc_table, rot[[3, 7]]), 1j * e, atol=1e-12)

    @pytest.mark.parametrize("bad", [[16, 0], [0], [-1, 2]])
    def test_missing(self, mrc_table, bad):
        with pytest.raises(KeyError):
            expectation_vector_e(mrc_table, bad)

    def test_needs_mrc(self, mrc_table):
        with pytest.raises(ValueError):
            expectation_vector_e(mrc_table.scaled(np.ones(2), "ZF"), [0, 0])


class TestPerfectCsi:
    def test_monte_carlo(self):
        sc = build_scenario(4, 2, 1.0)
        x = qam16().symbols[[2, 13]]
        rng = np.random.default_rng(3)
        n = 100_000
        H = sample_channels(sc, rng, n)
        r = data_phase(sc, H, x, rng).r
        v = np.einsum("bmk,bm->bk", H.conj(), r)
        table = perfect_csi_table(sc, qam16(), "MRC")
        closed = table.entries[table.flat_index([2, 13])]
        se = np.sqrt(v.real.var(axis=0) + v.imag.var(axis=0)) / np.sqrt(n)
        assert np.all(np.abs(v.mean(axis=0) - closed) <= 4 * se)

    def test_scaling(self):
        sc = build_scenario(8, 2, 2.0)
        mrc = perfect_csi_table(sc, qam16(), "MRC")
        np.testing.assert_allclose(perfect_csi_table(sc, qam16(), "ZF").entries, mrc.entries / 8)
        np.testing.assert_allclose(perfect_csi_table(sc, qam16(), "MMSE").entries, mrc.entries / (1 + 2.0 * 8))


class TestCache:
    def test_round_trip(self, tmp_path, medium, mrc_table):
        sc, book, _ = medium
        key = table_cache_key(sc, book, qam16(), "MRC")
        save_table(mrc_table, tmp_path / "t.npz", key)
        back = load_table(tmp_path / "t.npz", key)
        np.testing.assert_array_equal(back.entries, mrc_table.entries)
        np.testing.assert_array_equal(back.averaged, mrc_table.averaged)

    def test_stale_or_missing(self, tmp_path, medium, mrc_table):
        sc, book, _ = medium
        key = table_cache_key(sc, book, qam16(), "MRC")
        save_table(mrc_table, tmp_path / "t.npz", key)
        assert load_table(tmp_path / "t.npz", table_cache_key(sc.with_rho(2.0), book, qam16(), "MRC")) is None
        assert load_table(tmp_path / "none.npz", key) is None

    def test_key_depends_on_inputs(self, medium):
        sc, book, _ = medium
        keys = {table_cache_key(sc, book, qam16(), "MRC"), table_cache_key(sc, book, qam16(), "ZF"),
                table_cache_key(sc.with_rho(3.0), book, qam16(), "MRC"), table_cache_key(sc, book, qpsk(), "MRC")}
        assert len(keys) == 4


@pytest.mark.slow
class TestLargeArray:
    """Full-size array: K=2, M=128, tau=31."""

    def test_high_snr_amplitude_overlap(self):
        sc = build_scenario(128, 2, 100.0)
        m = compute_moments(sc, zadoff_chu_pilots(31, 2))
        table = build_expectation_table(m, qam16(), "MRC", use_symmetry=True)
        s = qam16().symbols
        inner = np.flatnonzero(np.isclose(np.abs(s) ** 2, 0.2))
        outer = np.flatnonzero(np.isclose(s, 3 * s[inner][:, None]).any(axis=0))
        e = table.entries[:, 0]
        spacing = np.mean(np.abs(e[:, None] - e[None, :])[np.triu_indices(e.size, 1)])
        worst = 0.0
        for a in inner:
            for b in inner:
                oa, ob = (np.flatnonzero(np.isclose(s, 3 * s[i]))[0] for i in (a, b))
                worst = max(worst, abs(e[table.flat_index([a, b])] - e[table.flat_index([oa, ob])]))
        assert len(outer) == 4
        assert worst < 0.1 * spacing

    def test_mmse_scaling_against_monte_carlo(self):
        sc = build_scenario(128, 2, 1.0)
        book = zadoff_chu_pilots(31, 2)
        m = compute_moments(sc, book)
        X = qam16().symbols[np.array([[0, 5], [15, 3], [6, 9], [10, 12]])]
        closed = expected_soft_symbols_mrc_batch(m, X) / (1 + estimate_energy(m))
        est = mc_soft_symbols(sc, book, X, explicit_blmmse_matrix(sc, book, m.A_p, m.C_rp), ("MMSE",),
                              5000, 1)["MMSE"]
        assert np.max(np.abs(closed - est.mean) / np.abs(est.mean)) <= 0.05
