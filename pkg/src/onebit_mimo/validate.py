"""
Oracle suite: closed forms against Monte Carlo at small dimensions.

``validate(profile)`` returns a machine-readable report. Statistical checks
compare ``|closed form - sample mean|`` with a multiple of the per-element
standard error. The ``desk`` profile uses fewer samples than ``full``; the
tolerances are in standard-error units, so both profiles are valid tests.
"""

import time

import numpy as np

from .air_interface import qam16
from .channel import build_scenario
from .estimator import estimate_energy_iid
from .expectations import build_expectation_table, expected_soft_symbols_mrc_batch
from .moments import compute_moments, data_pilot_crosscovariance, pilot_autocovariance
from .numerics import arcsine_law_oracle, arcsine_map
from .oracles import (
    explicit_blmmse_matrix,
    mc_conditional_covariances,
    mc_data_pilot_crosscovariance,
    mc_estimate_alignment,
    mc_pilot_autocovariance,
    mc_soft_symbols,
)
from .pilots import dft_pilots, favorable_propagation_metric, zadoff_chu_pilots
from .receivers import conditional_cross_covariance, conditional_quantized_covariance

__all__ = ["PROFILES", "validate", "check_arcsine_law", "check_pilot_autocovariance",
           "check_crosscovariance", "check_mrc_expectation", "check_conditional_covariances",
           "check_favorable_propagation", "check_table_symmetry", "elementwise_z"]

PROFILES = {
    "desk": dict(arcsine_pairs=40, arcsine_samples=20_000, cov_samples=20_000, mrc_samples=20_000,
                 cond_samples=100_000, alignment_seeds=100),
    "full": dict(arcsine_pairs=100, arcsine_samples=100_000, cov_samples=100_000, mrc_samples=200_000,
                 cond_samples=1_000_000, alignment_seeds=200),
}

Z_TOL = 4.0


def elementwise_z(closed, estimate):
    """``|closed - mean| / se`` per element; zero-variance elements must match exactly."""
    diff = np.abs(np.asarray(closed) - estimate.mean)
    scale = np.maximum(1.0, np.abs(estimate.mean))
    # constant samples leave only rounding noise in the variance
    fixed = estimate.se <= 1e-9 * scale
    z = diff / np.where(fixed, 1.0, estimate.se)
    return np.where(fixed, np.where(diff <= 1e-9 * scale, 0.0, np.inf), z)


def _entry(name, passed, deviation, tolerance, se=None, samples=None, **detail):
    out = dict(name=name, passed=bool(passed), deviation=float(deviation), tolerance=float(tolerance))
    if se is not None:
        out["se"] = float(se)
    if samples is not None:
        out["samples"] = int(samples)
    out.update(detail)
    return out


def _z_entry(name, z, estimate, quantile=0.99):
    frac = float(np.mean(z <= Z_TOL))
    return _entry(name, frac >= quantile, float(np.max(z)), Z_TOL, se=float(np.max(estimate.se)),
                  samples=estimate.samples, fraction_within=frac, required_fraction=quantile)


def check_arcsine_law(pairs=100, samples=100_000, dim=4, seed=0):
    rng = np.random.default_rng(seed)
    tol = 4.0 / np.sqrt(samples)
    devs = []
    for i in range(pairs):
        a1, a2 = rng.standard_normal(dim), rng.standard_normal(dim)
        cos = a1 @ a2 / (np.linalg.norm(a1) * np.linalg.norm(a2))
        devs.append(abs(arcsine_law_oracle(a1, a2, 1.0, samples, seed=10_000 + i) - arcsine_map(cos)))
    devs = np.array(devs)
    within = int(np.sum(devs <= tol))
    need = int(np.ceil(0.97 * pairs))
    return _entry("arcsine_law", within >= need, devs.max(), tol, se=1.0 / np.sqrt(samples), samples=samples,
                  pairs_within=within, pairs_required=need)


def small_scenario(M=4, K=2, tau=3, rho=1.0):
    return build_scenario(M, K, rho), zadoff_chu_pilots(tau, K)


def check_pilot_autocovariance(samples=100_000, seed=1, omega=arcsine_map):
    sc, book = small_scenario()
    closed = pilot_autocovariance(sc, book, omega=omega)
    est = mc_pilot_autocovariance(sc, book, samples, seed)
    return _z_entry("pilot_autocovariance", elementwise_z(closed, est), est)


CROSS_VECTORS = ((0, 15), (6, 9))


def check_crosscovariance(samples=100_000, seed=2, omega=arcsine_map):
    sc, book = small_scenario()
    c = qam16()
    zs, ses = [], []
    for i, l in enumerate(CROSS_VECTORS):
        x = c.symbols[list(l)]
        closed = data_pilot_crosscovariance(sc, book, x, omega=omega).C_rrp
        est = mc_data_pilot_crosscovariance(sc, book, x, samples, seed + 100 * i)
        zs.append(elementwise_z(closed, est).ravel())
        ses.append(est.se.max())
    z = np.concatenate(zs)
    frac = float(np.mean(z <= Z_TOL))
    return _entry("data_pilot_crosscovariance", frac >= 0.99, z.max(), Z_TOL, se=max(ses), samples=samples,
                  fraction_within=frac, required_fraction=0.99)


MRC_VECTORS = ((0, 0), (0, 15), (5, 10), (3, 12), (6, 9), (15, 1), (7, 7), (10, 4))


def check_mrc_expectation(samples=200_000, seed=3):
    sc, book = small_scenario(M=8, tau=7)
    m = compute_moments(sc, book)
    X = qam16().symbols[np.array(MRC_VECTORS)]
    closed = expected_soft_symbols_mrc_batch(m, X)
    est = mc_soft_symbols(sc, book, X, explicit_blmmse_matrix(sc, book, m.A_p, m.C_rp), ("MRC",), samples, seed)["MRC"]
    z = elementwise_z(closed, est)
    return _entry("mrc_expectation", bool(np.all(z <= Z_TOL)), z.max(), Z_TOL, se=est.se.max(), samples=samples)


def conditional_fixture(seed=4):
    rng = np.random.default_rng(seed)
    H = np.sqrt(0.5) * (rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2)))
    x = qam16().symbols[[2, 13]]
    return H, x


def check_conditional_covariances(samples=1_000_000, seed=5):
    H, x = conditional_fixture()
    rho, K = 1.0, 2
    yr, rr = mc_conditional_covariances(H, x, rho, K, samples, seed)
    z = np.concatenate([elementwise_z(conditional_cross_covariance(H, x, rho, K), yr).ravel(),
                        elementwise_z(conditional_quantized_covariance(H, x, rho, K), rr).ravel()])
    return _entry("conditional_covariances", bool(np.all(z <= Z_TOL)), z.max(), Z_TOL,
                  se=max(yr.se.max(), rr.se.max()), samples=samples)


def check_favorable_propagation(seeds=200, rho=1.0, tau=7, K=2, sizes=(16, 128)):
    book = dft_pilots(tau, K)
    metric = abs(favorable_propagation_metric(book, rho, K, 0, 1))
    means = []
    for M in sizes:
        sc = build_scenario(M, K, rho, iid=True)
        m = compute_moments(sc, book)
        est = explicit_blmmse_matrix(sc, book, m.A_p, m.C_rp)
        energies = estimate_energy_iid(book, M, rho, K)
        means.append(mc_estimate_alignment(sc, book, est, energies, 0, 1, range(seeds)))
    passed = metric <= 1e-10 and means[-1] < means[0]
    return _entry("favorable_propagation", passed, metric, 1e-10, samples=seeds,
                  alignment_small=means[0], alignment_large=means[-1])


def check_table_symmetry(M=8, tau=7, rho=1.0):
    sc, book = small_scenario(M=M, tau=tau, rho=rho)
    c = qam16()
    table = build_expectation_table(compute_moments(sc, book), c, "MRC")
    idx = table.indices
    shape = (c.L,) * table.K
    rot = np.ravel_multi_index(tuple(c.rotation_permutation()[idx].T), shape)
    neg = np.ravel_multi_index(tuple(c.negation_permutation()[idx].T), shape)
    dev = max(np.abs(table.entries[rot] - 1j * table.entries).max(), np.abs(table.entries[neg] + table.entries).max())
    return _entry("table_symmetry", dev <= 1e-10, dev, 1e-10)


def validate(profile="desk", omega=arcsine_map):
    """
    Run every oracle check. ``omega`` replaces the arcsine map in the
    closed-form covariances (negative controls).
    """
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
    p = PROFILES[profile]
    checks = [
        lambda: check_arcsine_law(p["arcsine_pairs"], p["arcsine_samples"]),
        lambda: check_pilot_autocovariance(p["cov_samples"], omega=omega),
        lambda: check_crosscovariance(p["cov_samples"], omega=omega),
        lambda: check_mrc_expectation(p["mrc_samples"]),
        lambda: check_conditional_covariances(p["cond_samples"]),
        lambda: check_favorable_propagation(p["alignment_seeds"]),
        check_table_symmetry,
    ]
    results = []
    for run in checks:
        t0 = time.perf_counter()
        entry = run()
        entry["wall_time_s"] = time.perf_counter() - t0
        results.append(entry)
    return dict(profile=profile, passed=all(c["passed"] for c in results), checks=results)
