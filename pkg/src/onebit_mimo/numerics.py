"""
Dense complex-matrix kernels and the scalar maps used by every quantized
second-order statistic: the arcsine law and the error function.
"""

from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "HermitianFactorization",
    "arcsine_map",
    "erf_map",
    "complex_erf",
    "hermitian_factor",
    "hermitian_sqrt",
    "pseudo_inverse",
    "arcsine_law_oracle",
    "rel_fro",
]

# Tolerance on |x| - 1 before arcsine_map refuses its input.
ARCSINE_DOMAIN_SLACK = 1e-12
# Eigenvalues down to -CLAMP_RTOL * lambda_max are rounding noise.
CLAMP_RTOL = 1e-10


def rel_fro(a, b):
    """Relative Frobenius distance ||a - b|| / ||b|| (absolute if b == 0)."""
    a = np.asarray(a)
    b = np.asarray(b)
    nb = np.linalg.norm(b)
    diff = np.linalg.norm(a - b)
    return diff / nb if nb > 0 else diff


def arcsine_map(x):
    """
    Arcsine law map ``(2/pi) * arcsin(x)``.

    Works elementwise on scalars or arrays. Values whose magnitude exceeds
    one by at most 1e-12 are clamped; anything further out raises.

    Parameters
    ----------
    x : float or ndarray
        Correlation coefficient(s) in [-1, 1].

    Returns
    -------
    float or ndarray
        E[sgn(u) sgn(v)] for jointly Gaussian u, v with correlation x.
    """
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    if np.any(ax > 1.0 + ARCSINE_DOMAIN_SLACK) or np.any(np.isnan(x)):
        worst = float(np.nanmax(ax)) if not np.all(np.isnan(ax)) else float("nan")
        raise ValueError(f"arcsine_map argument out of [-1, 1]: max |x| = {worst!r}")
    # odd by construction: evaluate on |x| and reattach the sign
    out = np.copysign((2.0 / np.pi) * np.arcsin(np.minimum(ax, 1.0)), x)
    return out[()] if out.ndim == 0 else out


def erf_map(x):
    """
    Error function ``(2/sqrt(pi)) * int_0^x exp(-t^2) dt``.

    Raises ValueError on non-finite input.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("erf_map requires finite input")
    out = np.copysign(special.erf(np.abs(x)), x)
    return out[()] if out.ndim == 0 else out


def complex_erf(z):
    """Componentwise error function ``erf(Re z) + j erf(Im z)``."""
    z = np.asarray(z)
    return erf_map(z.real) + 1j * erf_map(z.imag)


@dataclass(frozen=True)
class HermitianFactorization:
    """Eigen-decomposition ``C = U diag(w) U^H`` with ``w`` in descending order."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self):
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.conj().T


def _check_hermitian(c, tol=1e-10):
    c = np.asarray(c, dtype=complex)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {c.shape}")
    scale = max(np.linalg.norm(c), 1.0)
    if np.linalg.norm(c - c.conj().T) > tol * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    return 0.5 * (c + c.conj().T)


def hermitian_factor(c):
    """Eigen-decompose a Hermitian matrix (eigenvalues descending)."""
    c = _check_hermitian(c)
    w, u = np.linalg.eigh(c)
    return HermitianFactorization(eigenvalues=w[::-1].copy(), eigenvectors=u[:, ::-1].copy())


def hermitian_sqrt(c):
    """
    Principal square root of a Hermitian positive semidefinite matrix.

    Slightly negative eigenvalues (down to -1e-10 times the largest one)
    are treated as zero. A strongly indefinite input raises ValueError.
    """
    fac = hermitian_factor(c)
    w = fac.eigenvalues
    lmax = max(w[0], 0.0)
    if w[-1] < -CLAMP_RTOL * lmax or (lmax == 0.0 and w[-1] < 0):
        raise ValueError(f"matrix is not positive semidefinite: most negative eigenvalue {w[-1]:.3e}")
    w = np.clip(w, 0.0, None)
    u = fac.eigenvectors
    s = (u * np.sqrt(w)) @ u.conj().T
    return 0.5 * (s + s.conj().T)


def pseudo_inverse(a, rel_tol=1e-10):
    """
    Moore-Penrose pseudo-inverse by truncated SVD.

    Singular values below ``rel_tol * sigma_max`` are discarded.
    """
    if not 0.0 < rel_tol < 1.0:
        raise ValueError("rel_tol must lie in (0, 1)")
    a = np.asarray(a)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {a.shape}")
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((a.shape[1], a.shape[0]), dtype=np.result_type(a, float))
    keep = s > rel_tol * s[0]
    inv_s = np.zeros_like(s)
    inv_s[keep] = 1.0 / s[keep]
    return (vh.conj().T * inv_s) @ u.conj().T


def arcsine_law_oracle(a1, a2, variance, samples, seed):
    """
    Monte Carlo estimate of E[sgn(a1^T z) sgn(a2^T z)] with z ~ N(0, variance I).

    Only meant as an independent check of :func:`arcsine_map`.
    """
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    if a1.shape != a2.shape or a1.ndim != 1:
        raise ValueError("a1 and a2 must be vectors of equal length")
    if np.linalg.norm(a1) == 0.0 or np.linalg.norm(a2) == 0.0:
        raise ValueError("a1 and a2 must be nonzero")
    if variance <= 0:
        raise ValueError("variance must be positive")
    rng = np.random.default_rng(seed)
    z = rng.normal(scale=np.sqrt(variance), size=(int(samples), a1.size))
    s1 = np.where(z @ a1 >= 0, 1.0, -1.0)
    s2 = np.where(z @ a2 >= 0, 1.0, -1.0)
    return float(np.mean(s1 * s2))
