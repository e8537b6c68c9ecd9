"""
Monte Carlo oracles for the closed-form statistics.

These functions only sample the signal model and average; they never call
the closed-form assemblies they are used to check. Each returns the sample
mean together with its per-element standard error (for complex entries,
``sqrt((var(Re) + var(Im)) / n)``).
"""

from dataclasses import dataclass

import numpy as np

from .air_interface import awgn, data_phase, one_bit_quantize, pilot_phase
from .channel import sample_channels

__all__ = [
    "MonteCarloEstimate",
    "explicit_blmmse_matrix",
    "mc_pilot_autocovariance",
    "mc_data_pilot_crosscovariance",
    "mc_soft_symbols",
    "mc_conditional_covariances",
    "mc_estimate_alignment",
]

_CHUNK = 20_000
_CHUNK_ELEMENTS = 2 ** 24  # bound on the per-chunk M x M workspace


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: np.ndarray
    se: np.ndarray
    samples: int


class _Accumulator:
    """Running first and second moments of complex arrays (real and imaginary separately)."""

    def __init__(self):
        self.n = 0
        self.s = None
        self.q = None

    def add(self, batch):
        # batch: (n, ...) complex
        re2 = np.sum(batch.real ** 2, axis=0) + 1j * np.sum(batch.imag ** 2, axis=0)
        if self.s is None:
            self.s, self.q = batch.sum(axis=0), re2
        else:
            self.s = self.s + batch.sum(axis=0)
            self.q = self.q + re2
        self.n += batch.shape[0]

    def result(self):
        n = self.n
        mean = self.s / n
        var_re = np.maximum(self.q.real / n - mean.real ** 2, 0.0)
        var_im = np.maximum(self.q.imag / n - mean.imag ** 2, 0.0)
        se = np.sqrt((var_re + var_im) / (n - 1))
        return MonteCarloEstimate(mean=mean, se=se, samples=n)


def _chunks(n, M=1):
    size = max(64, min(_CHUNK, _CHUNK_ELEMENTS // (M * M)))
    done = 0
    while done < n:
        b = min(size, n - done)
        yield b
        done += b


def mc_pilot_autocovariance(scenario, book, samples, seed):
    """Sample ``E[r_p r_p^H]`` over channel and pilot noise."""
    rng = np.random.default_rng(seed)
    acc = _Accumulator()
    for b in _chunks(samples, scenario.M * book.tau):
        H = sample_channels(scenario, rng, b)
        r = pilot_phase(scenario, book, H, rng).r
        acc.add(r[:, :, None] * r[:, None, :].conj())
    return acc.result()


def mc_data_pilot_crosscovariance(scenario, book, x, samples, seed):
    """Sample ``E[r r_p^H | x]`` (M x M tau) over channel, pilot and data noise."""
    rng = np.random.default_rng(seed)
    acc = _Accumulator()
    x = np.asarray(x, dtype=complex)
    for b in _chunks(samples):
        H = sample_channels(scenario, rng, b)
        r_p = pilot_phase(scenario, book, H, rng).r
        r = data_phase(scenario, H, x, rng).r
        acc.add(r[:, :, None] * r_p[:, None, :].conj())
    return acc.result()


def explicit_blmmse_matrix(scenario, book, A_p, C_rp):
    """
    The estimator ``sqrt(rho) C_h Pbar^H A_p C_rp^{-1}`` built with explicit
    Kronecker products (``Pbar = P^* kron I_M``); maps ``r_p`` to
    ``vec(H)`` stacked UE by UE.
    """
    M, K, rho = scenario.M, scenario.K, scenario.rho
    P = book.P[:, :K]
    Pbar = np.kron(P.conj(), np.eye(M))  # (M tau, M K)
    C_h = np.zeros((M * K, M * K), dtype=complex)
    for k in range(K):
        C_h[k * M:(k + 1) * M, k * M:(k + 1) * M] = scenario.covariances[k]
    left = np.sqrt(rho) * C_h @ Pbar.conj().T @ np.diag(A_p)
    return np.linalg.solve(C_rp.T, left.T).T  # left @ C_rp^{-1}


def _apply_receiver(H_hat, r, kind, rho):
    """``V^H r`` for a batch: H_hat (B, M, K), r (B, M)."""
    Hh_H = np.conj(np.swapaxes(H_hat, 1, 2))
    if kind == "MRC":
        return np.einsum("bkm,bm->bk", Hh_H, r)
    if kind == "ZF":
        gram = Hh_H @ H_hat
        return np.linalg.solve(gram, np.einsum("bkm,bm->bk", Hh_H, r)[..., None])[..., 0]
    if kind == "MMSE":
        M = H_hat.shape[1]
        A = rho * H_hat @ Hh_H + np.eye(M)[None]
        V = np.linalg.solve(A, H_hat)  # (rho H H^H + I)^{-1} H in M x M form
        return np.einsum("bmk,bm->bk", V.conj(), r)
    raise ValueError(f"unknown receiver {kind!r}")


def mc_soft_symbols(scenario, book, X, estimator, kinds=("MRC",), samples=10_000, seed=0):
    """
    Empirical means of the soft symbols ``V^H r`` for each symbol vector in
    ``X`` (B, K). Channel and pilot noise are shared across the vectors of
    one draw; data noise is drawn per vector.

    ``estimator`` is the explicit (M K x M tau) BLMMSE matrix.
    Returns ``{kind: MonteCarloEstimate}`` with means of shape (B, K).
    """
    rng = np.random.default_rng(seed)
    X = np.atleast_2d(np.asarray(X, dtype=complex))
    M, K = scenario.M, scenario.K
    acc = {kind: _Accumulator() for kind in kinds}
    for b in _chunks(samples, M if "MMSE" in kinds else 1):
        H = sample_channels(scenario, rng, b)
        r_p = pilot_phase(scenario, book, H, rng).r
        h = r_p @ estimator.T  # (b, M K), UE-major
        H_hat = np.swapaxes(h.reshape(b, K, M), 1, 2)
        outs = {kind: np.empty((b, X.shape[0], K), dtype=complex) for kind in kinds}
        for i, x in enumerate(X):
            r = data_phase(scenario, H, x, rng).r
            for kind in kinds:
                outs[kind][:, i] = _apply_receiver(H_hat, r, kind, scenario.rho)
        for kind in kinds:
            acc[kind].add(outs[kind])
    return {kind: a.result() for kind, a in acc.items()}


def mc_conditional_covariances(H, x, rho, K, samples, seed):
    """
    Noise-only sampling of ``E[y r^H | x]`` and ``E[r r^H | x]`` for a fixed
    channel ``H`` and symbol vector ``x``.
    """
    rng = np.random.default_rng(seed)
    mean_y = np.sqrt(rho) * (np.asarray(H) @ np.asarray(x, dtype=complex))
    acc_yr, acc_rr = _Accumulator(), _Accumulator()
    for b in _chunks(samples):
        y = mean_y[None, :] + awgn(rng, (b, mean_y.size))
        r = one_bit_quantize(y, rho, K)
        acc_yr.add(y[:, :, None] * r[:, None, :].conj())
        acc_rr.add(r[:, :, None] * r[:, None, :].conj())
    return acc_yr.result(), acc_rr.result()


def mc_estimate_alignment(scenario, book, estimator, energies, k, k_prime, seeds):
    """
    Mean of ``|h_hat_k^H h_hat_k'| / sqrt(E||h_hat_k||^2 E||h_hat_k'||^2)``
    with one channel and pilot-noise draw per seed.
    """
    M, K = scenario.M, scenario.K
    vals = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        H = sample_channels(scenario, rng, 1)
        r_p = pilot_phase(scenario, book, H, rng).r
        h = (r_p @ estimator.T).reshape(K, M)
        vals.append(abs(np.vdot(h[k], h[k_prime])) / np.sqrt(energies[k] * energies[k_prime]))
    return float(np.mean(vals))
