"""Bussgang LMMSE (BLMMSE) channel estimation from quantized pilots."""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "EstimatedChannel",
    "blmmse_estimate",
    "estimate_energy",
    "estimate_energy_iid",
    "estimate_pairwise_alignment",
]


@dataclass(frozen=True)
class EstimatedChannel:
    H_hat: np.ndarray  # (..., M, K)
    per_ue_energy_closed_form: np.ndarray  # (K,)


def blmmse_estimate(moments, r_p):
    """
    ``h_hat_k = sqrt(rho) C_k P_k^T A_p C_rp^{-1} r_p`` for every UE.

    ``P_k^T w`` is evaluated as the pilot-weighted block sum
    ``sum_u P_uk w[u M : (u + 1) M]``. ``r_p`` may be a batch of shape
    (B, M tau); the result then has shape (B, M, K).
    """
    r_p = np.asarray(r_p)
    M, tau = moments.M, moments.tau
    if r_p.shape[-1] != M * tau:
        raise ValueError(f"r_p must have length {M * tau}, got {r_p.shape[-1]}")
    batch = r_p.ndim == 2
    rhs = r_p.T if batch else r_p
    w = moments.A_p[:, None] * moments.solve(rhs) if batch else moments.A_p * moments.solve(rhs)
    # w: (M tau,) or (M tau, B) -> blocks (tau, M[, B])
    blocks = w.reshape((tau, M) + w.shape[1:])
    P = moments.book.P
    summed = np.einsum("uk,um...->km...", P, blocks)  # (K, M[, B])
    cov = moments.scenario.covariances
    h = np.sqrt(moments.scenario.rho) * np.einsum("kij,kj...->ki...", cov, summed)  # (K, M[, B])
    H_hat = np.moveaxis(h, 0, -1)  # (M, K) or (M, B, K)
    if batch:
        H_hat = np.moveaxis(H_hat, 1, 0)
    return EstimatedChannel(H_hat=H_hat, per_ue_energy_closed_form=estimate_energy(moments))


def estimate_energy(moments):
    """``E||h_hat_k||^2 = rho tr(C_k P_k^T A_p C_rp^{-1} A_p P_k^* C_k)`` for all k."""
    cached = getattr(moments, "_energy", None)
    if cached is not None:
        return cached
    rho = moments.scenario.rho
    out = np.empty(moments.scenario.K)
    for k in range(moments.scenario.K):
        B = moments.pilot_weighted(k)
        out[k] = rho * np.sum(B.conj() * moments.W[k]).real
    object.__setattr__(moments, "_energy", out)
    return out


def estimate_energy_iid(book, M, rho, K):
    """
    Estimate energies for i.i.d. fading:
    ``M 2 rho / (pi (rho K + 1)) p_k^T Phi^{-1} p_k^*``.
    """
    phi = book.phi(rho, K)
    P = book.P[:, :K]
    q = np.einsum("uk,uk->k", P, np.linalg.solve(phi, P.conj())).real
    return M * 2.0 * rho / (np.pi * (rho * K + 1)) * q


def estimate_pairwise_alignment(H_hat, k, k_prime, energies):
    """``h_hat_k^H h_hat_k' / sqrt(E||h_hat_k||^2 E||h_hat_k'||^2)`` for one realization."""
    if k == k_prime:
        raise ValueError("alignment needs two distinct UEs")
    H_hat = np.asarray(H_hat)
    return complex(np.vdot(H_hat[:, k], H_hat[:, k_prime]) / np.sqrt(energies[k] * energies[k_prime]))
