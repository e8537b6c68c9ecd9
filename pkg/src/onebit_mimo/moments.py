"""
Closed-form second-order statistics of the 1-bit quantized pilot and data
signals.

All statistics follow from the arcsine law applied to the unquantized
Gaussian signals. Matrix indices use the pilot vectorization of
:mod:`onebit_mimo.air_interface` (entry ``u * M + m``).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .numerics import arcsine_map

__all__ = [
    "QuantizedMoments",
    "DataCrossMoments",
    "alpha_vector",
    "beta_vector",
    "bussgang_gain_pilot",
    "pilot_autocovariance",
    "data_pilot_crosscovariance",
    "crosscovariance_batch",
    "compute_moments",
]

# |zeta| or |eta| components beyond this indicate an assembly bug
RANGE_SLACK = 1e-9


def alpha_vector(scenario):
    """``alpha_m = [rho sum_k C_k + I]_{m,m}``."""
    return 1.0 + scenario.rho * np.einsum("kmm->m", scenario.covariances).real


def beta_vector(scenario, x):
    """``beta_m = [rho sum_k C_k |x_k|^2 + I]_{m,m}``; ``x`` of shape (K,) or (B, K)."""
    diag = np.einsum("kmm->km", scenario.covariances).real
    return 1.0 + scenario.rho * (np.abs(np.asarray(x)) ** 2) @ diag


def _omega_complex(z, omega, what):
    """``omega(Re z) + j omega(Im z)`` after a range check on both parts."""
    worst = max(np.max(np.abs(z.real), initial=0.0), np.max(np.abs(z.imag), initial=0.0))
    if worst > 1.0 + RANGE_SLACK:
        raise FloatingPointError(f"{what} component {worst:.6g} exceeds 1: covariance assembly is inconsistent")
    return omega(np.clip(z.real, -1.0, 1.0)) + 1j * omega(np.clip(z.imag, -1.0, 1.0))


def bussgang_gain_pilot(scenario, book):
    """
    Diagonal of the pilot Bussgang gain ``sqrt(2/pi (rho K + 1)) diag(C_yp)^{-1/2}``.

    Returns the length ``M tau`` diagonal.
    """
    rho, K = scenario.rho, scenario.K
    diag_c = np.einsum("kmm->km", scenario.covariances).real  # (K, M)
    # diag(C_yp) at (u, m) = rho sum_k |P_uk|^2 [C_k]_mm + 1
    d = 1.0 + rho * (np.abs(book.P) ** 2) @ diag_c  # (tau, M)
    return np.sqrt(2.0 / np.pi * (rho * K + 1) / d.ravel())


def pilot_autocovariance(scenario, book, omega=arcsine_map):
    """
    ``C_rp = E[r_p r_p^H]`` (M tau x M tau).

    ``zeta_{m,n,u,v} = rho / sqrt(alpha_m alpha_n) [sum_k C_k^T P_uk P_vk^*]_{m,n}``
    and off-diagonal entries ``(rho K + 1)(Omega(Re zeta) - j Omega(Im zeta))``.
    The ``omega`` hook exists for negative-control testing only.
    """
    rho, K, M = scenario.rho, scenario.K, scenario.M
    P = book.P
    tau = P.shape[0]
    alpha = alpha_vector(scenario)
    ct = np.swapaxes(scenario.covariances, -1, -2)  # C_k^T
    pp = P[:, None, :] * P.conj()[None, :, :]  # (u, v, k): P_uk P_vk^*
    # zeta[u, m, v, n]
    zeta = np.einsum("uvk,kmn->umvn", pp, ct) * rho
    zeta /= np.sqrt(alpha)[None, :, None, None]
    zeta /= np.sqrt(alpha)[None, None, None, :]
    zeta = zeta.reshape(M * tau, M * tau)
    conj_form = _omega_complex(zeta, omega, "zeta")
    c = (rho * K + 1) * conj_form.conj()
    np.fill_diagonal(c, rho * K + 1)
    return c


def crosscovariance_batch(scenario, book, X, omega=arcsine_map, _template=None):
    """
    ``C_rrp = E[r r_p^H | x]`` for a batch of symbol vectors.

    Parameters
    ----------
    X : ndarray, shape (B, K)

    Returns
    -------
    C_rrp : ndarray, shape (B, M, M tau); entry ``[b, m, u M + n]``.
    beta : ndarray, shape (B, M)
    """
    rho, K, M = scenario.rho, scenario.K, scenario.M
    X = np.atleast_2d(np.asarray(X, dtype=complex))
    tau = book.tau
    alpha = alpha_vector(scenario)
    beta = beta_vector(scenario, X)
    # T[k, m, u, n] = [C_k]_{m,n} P_uk
    T = _template if _template is not None else np.einsum("kmn,uk->kmun", scenario.covariances, book.P)
    eta = rho * np.einsum("bk,kmun->bmun", X, T)
    eta /= np.sqrt(beta)[:, :, None, None]
    eta /= np.sqrt(alpha)[None, None, None, :]
    eta = eta.reshape(X.shape[0], M, tau * M)
    return (rho * K + 1) * _omega_complex(eta, omega, "eta"), beta


@dataclass(frozen=True)
class DataCrossMoments:
    x: np.ndarray
    beta: np.ndarray
    C_rrp: np.ndarray


def data_pilot_crosscovariance(scenario, book, x, omega=arcsine_map):
    """
    ``C_rrp`` (M x M tau) for one symbol vector, with
    ``eta_{m,n,u} = rho / sqrt(alpha_n beta_m) [sum_k C_k x_k P_uk]_{m,n}`` and
    entries ``(rho K + 1)(Omega(Re eta) + j Omega(Im eta))``.
    """
    x = np.asarray(x, dtype=complex)
    c, beta = crosscovariance_batch(scenario, book, x[None, :], omega=omega)
    return DataCrossMoments(x=x, beta=beta[0], C_rrp=c[0])


@dataclass(frozen=True)
class QuantizedMoments:
    """
    Pilot-phase statistics of one (scenario, pilot book) pair.

    ``W[k]`` caches ``C_rp^{-1} A_p P_k^* C_k`` (M tau x M); it is the only
    x-independent factor needed by the soft-symbol expectation, the
    estimate energy and (through ``W[k]^H``) the channel estimator itself.
    """

    scenario: object
    book: object
    A_p: np.ndarray
    C_rp: np.ndarray
    alpha: np.ndarray
    cho: tuple = field(repr=False)
    ridge: float = 0.0
    W: np.ndarray = field(repr=False, default=None)
    template: np.ndarray = field(repr=False, default=None)

    @property
    def M(self):
        return self.scenario.M

    @property
    def tau(self):
        return self.book.tau

    def solve(self, b):
        """Apply ``C_rp^{-1}`` via the cached Cholesky factor."""
        return linalg.cho_solve(self.cho, b, check_finite=False)

    def pilot_weighted(self, k):
        """``A_p P_k^* C_k`` (M tau x M) without forming the Kronecker factor."""
        P = self.book.P
        blocks = P[:, k].conj()[:, None, None] * self.scenario.covariances[k][None, :, :]  # (tau, M, M)
        return self.A_p[:, None] * blocks.reshape(self.tau * self.M, self.M)


def _factorize(c, scale):
    try:
        return linalg.cho_factor(c, lower=True, check_finite=False), 0.0
    except linalg.LinAlgError:
        eps = 1e-10 * scale
        n = c.shape[0]
        while True:
            try:
                return linalg.cho_factor(c + eps * np.eye(n), lower=True, check_finite=False), eps
            except linalg.LinAlgError:
                eps *= 10.0
                if eps > 1e-2 * scale:
                    raise


def compute_moments(scenario, book, omega=arcsine_map):
    """Assemble and factorize the pilot statistics for a scenario."""
    if book.K < scenario.K:
        raise ValueError(f"pilot book serves {book.K} UEs, scenario has {scenario.K}")
    if book.K > scenario.K:
        book = type(book)(P=book.P[:, : scenario.K], kind=book.kind, root=book.root)
    A_p = bussgang_gain_pilot(scenario, book)
    C_rp = pilot_autocovariance(scenario, book, omega=omega)
    cho, ridge = _factorize(C_rp, scenario.rho * scenario.K + 1)
    m = QuantizedMoments(scenario=scenario, book=book, A_p=A_p, C_rp=C_rp,
                         alpha=alpha_vector(scenario), cho=cho, ridge=ridge)
    B = np.stack([m.pilot_weighted(k) for k in range(scenario.K)])  # (K, M tau, M)
    W = np.stack([m.solve(b) for b in B])
    T = np.einsum("kmn,uk->kmun", scenario.covariances, book.P)
    object.__setattr__(m, "W", W)
    object.__setattr__(m, "template", T)
    return m
