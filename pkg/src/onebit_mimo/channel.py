"""
Spatially correlated Rayleigh fading: one-ring covariance matrices for a
uniform linear array and channel sampling.
"""

from dataclasses import dataclass, field

import numpy as np

from .numerics import hermitian_sqrt

__all__ = [
    "ChannelScenario",
    "one_ring_covariance",
    "build_scenario",
    "sample_channel",
    "sample_channels",
]

QUADRATURE_NODES = 128


def one_ring_covariance(M, azimuth_deg, spread_deg, spacing_wavelengths=0.5, nodes=QUADRATURE_NODES):
    """
    Spatial covariance of a ULA seen from a uniform ring of local scatterers.

    ``[C]_{m,n}`` is the average of ``exp(j 2 pi d (m - n) sin(phi + delta))``
    over ``delta`` uniform in ``[-spread/2, spread/2]``. The integral is
    evaluated with Gauss-Legendre quadrature and the result is scaled to
    ``trace(C) = M``.

    Parameters
    ----------
    M : int
        Number of antennas.
    azimuth_deg : float
        Nominal angle of arrival.
    spread_deg : float
        Full angular spread, in (0, 180).
    spacing_wavelengths : float
        Antenna spacing in wavelengths.
    nodes : int
        Quadrature order (at least 64).

    Returns
    -------
    C : ndarray, shape (M, M)
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    if not 0.0 < spread_deg < 180.0:
        raise ValueError(f"angular spread must lie in (0, 180) degrees, got {spread_deg}")
    if spacing_wavelengths <= 0:
        raise ValueError("antenna spacing must be positive")
    if nodes < 64:
        raise ValueError("use at least 64 quadrature nodes")
    half = np.deg2rad(spread_deg) / 2.0
    phi = np.deg2rad(azimuth_deg)
    t, w = np.polynomial.legendre.leggauss(nodes)
    delta = half * t
    weights = w / 2.0  # (1 / 2 half) * half * w
    lags = np.arange(M)
    # first column of the Toeplitz matrix: lag d = m - n >= 0
    col = np.exp(1j * 2 * np.pi * spacing_wavelengths * np.outer(lags, np.sin(phi + delta))) @ weights
    diff = lags[:, None] - lags[None, :]
    c = np.where(diff >= 0, col[np.abs(diff)], np.conj(col[np.abs(diff)]))
    c = 0.5 * (c + c.conj().T)
    return c * (M / np.trace(c).real)


@dataclass(frozen=True)
class ChannelScenario:
    """Per-UE covariances and SNR: the statistical ground truth of a run."""

    M: int
    K: int
    rho: float
    covariances: np.ndarray  # (K, M, M)
    sqrt_covariances: np.ndarray = field(repr=False)  # (K, M, M)
    iid: bool = False

    def __post_init__(self):
        if self.M < 1 or self.K < 1:
            raise ValueError("M and K must be >= 1")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.covariances.shape != (self.K, self.M, self.M):
            raise ValueError(f"covariances must have shape {(self.K, self.M, self.M)}")

    def with_rho(self, rho):
        """Same spatial statistics at another SNR."""
        return ChannelScenario(self.M, self.K, float(rho), self.covariances, self.sqrt_covariances, self.iid)


def scenario_from_covariances(covariances, rho, iid=False):
    cov = np.asarray(covariances, dtype=complex)
    K, M, _ = cov.shape
    sq = np.stack([hermitian_sqrt(c) for c in cov])
    return ChannelScenario(M=M, K=K, rho=float(rho), covariances=cov, sqrt_covariances=sq, iid=iid)


def build_scenario(M, K, rho, azimuth0_deg=-45.0, separation_deg=30.0, spread_deg=30.0,
                   spacing_wavelengths=0.5, iid=False):
    """
    Build a multi-UE scenario. UE k (0-based) sits at azimuth
    ``azimuth0_deg + k * separation_deg``; with ``iid=True`` every
    covariance is the identity.
    """
    if iid:
        cov = np.broadcast_to(np.eye(M, dtype=complex), (K, M, M)).copy()
        return ChannelScenario(M=M, K=K, rho=float(rho), covariances=cov, sqrt_covariances=cov.copy(), iid=True)
    cov = np.stack([
        one_ring_covariance(M, azimuth0_deg + k * separation_deg, spread_deg, spacing_wavelengths)
        for k in range(K)
    ])
    return scenario_from_covariances(cov, rho)


def _cn(rng, shape):
    return np.sqrt(0.5) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def sample_channels(scenario, rng, n):
    """Draw ``n`` independent channel matrices, shape (n, M, K)."""
    g = _cn(rng, (n, scenario.K, scenario.M))
    # h_k = C_k^{1/2} g_k
    h = np.einsum("kij,nkj->nik", scenario.sqrt_covariances, g)
    return h


def sample_channel(scenario, rng):
    """
    One channel realization ``H`` (M x K) with ``h_k = C_k^{1/2} g_k`` and
    ``g_k`` i.i.d. CN(0, 1).
    """
    return sample_channels(scenario, rng, 1)[0]
