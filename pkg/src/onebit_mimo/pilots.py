"""
Orthogonal pilot matrices (Zadoff-Chu and DFT) and the quantized pilot
Gram matrix that governs estimate orthogonality for i.i.d. channels.
"""

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .numerics import arcsine_map

__all__ = [
    "PilotBook",
    "zadoff_chu_pilots",
    "dft_pilots",
    "pilot_gram_phi",
    "favorable_propagation_metric",
]


def _is_prime(n):
    if n < 2:
        return False
    return all(n % d for d in range(2, math.isqrt(n) + 1))


@dataclass(frozen=True)
class PilotBook:
    """
    Pilot matrix ``P`` (tau x K, unit-modulus entries, orthogonal columns).

    The quantized Gram matrix is cached per (rho, K) on first use.
    """

    P: np.ndarray
    kind: str
    root: int = 0
    _phi_cache: dict = field(default_factory=dict, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    @property
    def tau(self):
        return self.P.shape[0]

    @property
    def K(self):
        return self.P.shape[1]

    def phi(self, rho, K=None):
        K = self.K if K is None else K
        key = (float(rho), int(K))
        with self._lock:
            if key not in self._phi_cache:
                self._phi_cache[key] = _phi(self.P, rho, K)
            return self._phi_cache[key]


def zadoff_chu_pilots(tau=31, K=2, root=1):
    """
    Cyclic shifts of one Zadoff-Chu root sequence.

    The base sequence is ``z[n] = exp(-j pi root n (n + 1) / tau)``; UE k
    (0-based) gets ``z`` cyclically shifted by ``k * (tau // K)``. For prime
    ``tau`` distinct shifts are exactly orthogonal.
    """
    if not _is_prime(tau):
        raise ValueError(f"Zadoff-Chu pilot length must be prime, got {tau}")
    if K > tau or K < 1:
        raise ValueError(f"need 1 <= K <= tau, got K={K}, tau={tau}")
    if math.gcd(root, tau) != 1:
        raise ValueError(f"root {root} must be coprime with tau {tau}")
    n = np.arange(tau)
    z = np.exp(-1j * np.pi * root * n * (n + 1) / tau)
    step = tau // K
    P = np.stack([np.roll(z, k * step) for k in range(K)], axis=1)
    return PilotBook(P=P, kind="zadoff_chu", root=root)


def dft_pilots(tau, K):
    """First K columns of the tau-point DFT matrix (unit-modulus entries)."""
    if K > tau or K < 1:
        raise ValueError(f"need 1 <= K <= tau, got K={K}, tau={tau}")
    u = np.arange(tau)[:, None]
    k = np.arange(K)[None, :]
    return PilotBook(P=np.exp(-2j * np.pi * u * k / tau), kind="dft")


def _phi(P, rho, K):
    g = rho * (P @ P.conj().T) / (rho * K + 1)
    phi = arcsine_map(np.clip(g.real, -1, 1)) - 1j * arcsine_map(np.clip(g.imag, -1, 1))
    np.fill_diagonal(phi, 1.0)
    return phi


def pilot_gram_phi(book, rho, K=None):
    """
    Quantized pilot Gram matrix (tau x tau): unit diagonal and, for u != v,
    ``Omega(rho sum_k Re[P_uk P_vk^*] / (rho K + 1)) - j Omega(rho sum_k Im[P_uk P_vk^*] / (rho K + 1))``.
    """
    if not rho > 0:
        raise ValueError("rho must be positive")
    return book.phi(rho, K)


def favorable_propagation_metric(book, rho, K, k, k_prime):
    """
    Normalized ``p_k^T Phi^{-1} p_k'^*``: the limit of the normalized inner
    product between two channel estimates for i.i.d. fading.

    ``k`` and ``k_prime`` are 0-based UE indices and must differ.
    """
    if k == k_prime:
        raise ValueError("favorable_propagation_metric needs two distinct UEs")
    phi = pilot_gram_phi(book, rho, K)
    P = book.P
    try:
        sol = np.linalg.solve(phi, P.conj())
    except np.linalg.LinAlgError as exc:
        raise ValueError("pilot Gram matrix is singular") from exc
    gram = P.T @ sol  # [a, b] = p_a^T Phi^{-1} p_b^*
    return complex(gram[k, k_prime] / np.sqrt(gram[k, k].real * gram[k_prime, k_prime].real))
