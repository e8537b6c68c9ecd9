"""
Linear receivers: the conventional MRC/ZF/MMSE structures and the linear
minimum mean dispersion (LMMD) receiver built from conditional Bussgang
statistics of the quantized data signal.

Complex error function convention: ``Phi(a + jb) = erf(a) + j erf(b)``.
"""

from dataclasses import dataclass

import numpy as np

from .expectations import DEFAULT_TABLE_BUDGET, TableBudgetError, index_vectors
from .numerics import complex_erf, pseudo_inverse

__all__ = [
    "Receiver",
    "LmmdPrecomputation",
    "conventional_receiver",
    "conditional_bussgang_gain",
    "conditional_cross_covariance",
    "conditional_quantized_covariance",
    "lmmd_precompute",
    "lmmd_receiver",
    "combine",
]

RECEIVER_KINDS = ("MRC", "ZF", "MMSE", "LMMD")


@dataclass(frozen=True)
class Receiver:
    kind: str
    V: np.ndarray  # (M, K)
    csi_mode: str = "estimated"


def conventional_receiver(H, rho, kind, csi_mode="estimated"):
    """
    ``MRC: V = H``; ``ZF: V = H (H^H H)^{-1}``; ``MMSE: V = (rho H H^H + I)^{-1} H``.

    The MMSE matrix is computed through the equivalent K x K system
    ``H (rho H^H H + I)^{-1}``.
    """
    H = np.asarray(H)
    kind = kind.upper()
    if kind == "MRC":
        return Receiver("MRC", H, csi_mode)
    gram = H.conj().T @ H
    K = H.shape[1]
    if kind == "ZF":
        s = np.linalg.svd(H, compute_uv=False)
        if s[-1] <= 1e-12 * max(s[0], 1e-300):
            raise np.linalg.LinAlgError("ZF needs a full column rank channel")
        return Receiver("ZF", np.linalg.solve(gram.T, H.T).T, csi_mode)
    if kind == "MMSE":
        A = rho * gram + np.eye(K)
        return Receiver("MMSE", np.linalg.solve(A.T, H.T).T, csi_mode)
    raise ValueError(f"unknown conventional receiver {kind!r}")


def _scale(rho, K):
    return np.sqrt((rho * K + 1) / 2.0)


def conditional_cross_covariance(H_eff, x, rho, K):
    """
    ``C_{yr|x} = E_z[y r^H | x]`` for ``y ~ CN(sqrt(rho) H x, I)``.

    With ``zeta = sqrt(rho) H x`` this is
    ``s (zeta Phi(zeta)^H + diag(pi^{-1/2} (exp(-Re^2 zeta) + exp(-Im^2 zeta))))``.
    """
    zeta = np.sqrt(rho) * (np.asarray(H_eff) @ np.asarray(x, dtype=complex))
    f = complex_erf(zeta)
    d = (np.exp(-zeta.real ** 2) + np.exp(-zeta.imag ** 2)) / np.sqrt(np.pi)
    return _scale(rho, K) * (np.outer(zeta, f.conj()) + np.diag(d))


def conditional_bussgang_gain(H_eff, x, rho, K):
    """
    ``G(x) = C_{yr|x}^H C_{y|x}^{-1}`` with ``C_{y|x} = rho H x x^H H^H + I``
    inverted through the rank-one identity.
    """
    w = np.sqrt(rho) * (np.asarray(H_eff) @ np.asarray(x, dtype=complex))
    M = w.size
    c_y_inv = np.eye(M) - np.outer(w, w.conj()) / (1.0 + np.vdot(w, w).real)
    return conditional_cross_covariance(H_eff, x, rho, K).conj().T @ c_y_inv


def conditional_quantized_covariance(H_eff, x, rho, K):
    """``C_{r|x}``: ``rho K + 1`` on the diagonal, ``s^2 Phi(zeta_n) Phi(zeta_m)^*`` elsewhere."""
    zeta = np.sqrt(rho) * (np.asarray(H_eff) @ np.asarray(x, dtype=complex))
    f = complex_erf(zeta)
    c = _scale(rho, K) ** 2 * np.outer(f, f.conj())
    np.fill_diagonal(c, rho * K + 1)
    return c


@dataclass(frozen=True)
class LmmdPrecomputation:
    C_r: np.ndarray
    C_r_pinv: np.ndarray
    rhs: np.ndarray  # (sqrt(rho) / L^K) sum_x G(x) H x e(x)^H


def lmmd_precompute(H_eff, table, constellation, rho, K, rel_tol=1e-10, budget=DEFAULT_TABLE_BUDGET):
    """
    Average quantized covariance ``C_r`` and the right-hand side
    ``(sqrt(rho) / L^K) sum_x G(x) H x e(x)^H`` over all x in S^K.

    Everything is vectorized over x: with ``u = H x / (1 + rho ||H x||^2)``
    one has ``G(x) H x = s (Phi(zeta) zeta^H u + d * u)``.
    """
    if table.receiver_kind != "MRC":
        raise ValueError("LMMD targets the MRC expectations e(x)")
    L = constellation.L
    if L ** K > budget:
        raise TableBudgetError(f"L^K = {L ** K} exceeds the LMMD budget {budget}")
    H = np.asarray(H_eff)
    X = constellation.symbols[index_vectors(L, K)]  # (N, K)
    n = X.shape[0]
    hx = X @ H.T  # (N, M): row i is H x_i
    zeta = np.sqrt(rho) * hx
    f = complex_erf(zeta)
    s = _scale(rho, K)
    c_r = s ** 2 * (f.T @ f.conj()) / n
    np.fill_diagonal(c_r, rho * K + 1)
    d = (np.exp(-zeta.real ** 2) + np.exp(-zeta.imag ** 2)) / np.sqrt(np.pi)
    u = hx / (1.0 + rho * np.sum(np.abs(hx) ** 2, axis=1))[:, None]
    proj = np.sum(zeta.conj() * u, axis=1)  # zeta^H u
    g = s * (f * proj[:, None] + d * u)  # (N, M): G(x) H x
    rhs = np.sqrt(rho) / n * (g.T @ table.entries.conj())  # (M, K)
    return LmmdPrecomputation(C_r=c_r, C_r_pinv=pseudo_inverse(c_r, rel_tol), rhs=rhs)


def lmmd_receiver(H_eff, table, constellation, rho, K, csi_mode="estimated", rel_tol=1e-10,
                  budget=DEFAULT_TABLE_BUDGET):
    """``V = (sqrt(rho) / L^K) C_r^+ sum_x G(x) H x e(x)^H``."""
    pre = lmmd_precompute(H_eff, table, constellation, rho, K, rel_tol, budget)
    return Receiver("LMMD", pre.C_r_pinv @ pre.rhs, csi_mode)


def combine(receiver, r):
    """Soft estimates ``x_hat = V^H r``; ``r`` may be a batch (B, M)."""
    r = np.asarray(r)
    return r @ receiver.V.conj()
