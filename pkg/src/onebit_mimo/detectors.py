"""
Minimum-distance detectors against an expectation table, and the robust
ML (RML) detector working directly on quantized signs.

Every detector has a batched form (``*_batch``) used by the simulator; the
single-observation functions are thin wrappers. Ties always resolve to
the smallest lexicographic index.
"""

from dataclasses import dataclass

import numpy as np

from .expectations import index_vectors

__all__ = [
    "Decision",
    "DETECTORS",
    "e_sud",
    "h_sud",
    "genie_detect",
    "jd",
    "n_jd",
    "rml_detect",
    "rml_theta",
    "rml_objective",
    "e_sud_batch",
    "h_sud_batch",
    "genie_batch",
    "jd_batch",
    "n_jd_batch",
    "rml_batch",
]

DETECTORS = ("e_sud", "h_sud", "genie", "jd", "n_jd", "rml")


@dataclass(frozen=True)
class Decision:
    indices: np.ndarray
    strategy: str
    search_size: int


def _sq(a):
    return a.real ** 2 + a.imag ** 2


def e_sud_batch(X_hat, table):
    """Per UE, nearest of all L^K table values of that UE."""
    X_hat = np.atleast_2d(X_hat)
    idx = table.indices
    out = np.empty(X_hat.shape, dtype=np.intp)
    for k in range(table.K):
        d = _sq(X_hat[:, k, None] - table.entries[None, :, k])
        out[:, k] = idx[np.argmin(d, axis=1), k]
    return out


def h_sud_batch(X_hat, table):
    """Per UE, nearest of the L interference-averaged references."""
    X_hat = np.atleast_2d(X_hat)
    d = _sq(X_hat[:, :, None] - table.averaged[None, :, :])  # (B, K, L)
    return np.argmin(d, axis=2)


def genie_batch(X_hat, table, true_indices):
    """Per UE, nearest of the L table values with the interferers fixed to the truth."""
    X_hat = np.atleast_2d(X_hat)
    true_indices = np.atleast_2d(true_indices)
    L, K = table.L, table.K
    shape = (L,) * K
    out = np.empty(X_hat.shape, dtype=np.intp)
    for k in range(K):
        cand = np.repeat(true_indices[:, None, :], L, axis=1)  # (B, L, K)
        cand[:, :, k] = np.arange(L)[None, :]
        rows = np.ravel_multi_index(tuple(np.moveaxis(cand, -1, 0)), shape)  # (B, L)
        d = _sq(X_hat[:, k, None] - table.entries[rows, k])
        out[:, k] = np.argmin(d, axis=1)
    return out


def jd_batch(X_hat, table):
    """Nearest expectation vector over all L^K rows (Euclidean norm)."""
    X_hat = np.atleast_2d(X_hat)
    d = np.zeros((X_hat.shape[0], table.entries.shape[0]))
    for k in range(table.K):
        d += _sq(X_hat[:, k, None] - table.entries[None, :, k])
    return table.indices[np.argmin(d, axis=1)]


def n_jd_batch(X_hat, table, N):
    """
    Shortlist the N nearest averaged references per UE, then search the
    N^K vectors of the Cartesian product of the shortlists.
    """
    L, K = table.L, table.K
    if not 1 <= N <= L:
        raise ValueError(f"N must satisfy 1 <= N <= L={L}, got {N}")
    X_hat = np.atleast_2d(X_hat)
    B = X_hat.shape[0]
    d_avg = _sq(X_hat[:, :, None] - table.averaged[None, :, :])  # (B, K, L)
    short = np.argsort(d_avg, axis=2, kind="stable")[:, :, :N]  # (B, K, N)
    # candidate index vectors, combos in product order, then sorted by table row
    combo = index_vectors(N, K)  # (N^K, K) positions into the shortlists
    cand = np.take_along_axis(short[:, None, :, :].repeat(combo.shape[0], axis=1),
                              combo[None, :, :, None], axis=3)[..., 0]  # (B, N^K, K)
    rows = np.ravel_multi_index(tuple(np.moveaxis(cand, -1, 0)), (L,) * K)  # (B, N^K)
    rows = np.sort(rows, axis=1)
    d = np.zeros(rows.shape)
    for k in range(K):
        d += _sq(X_hat[:, k, None] - table.entries[rows, k])
    best = rows[np.arange(B), np.argmin(d, axis=1)]
    return table.indices[best]


def e_sud(x_hat_k, table, k):
    return int(e_sud_batch(_one_ue(x_hat_k, k, table.K), table)[0, k])


def h_sud(x_hat_k, table, k):
    return int(h_sud_batch(_one_ue(x_hat_k, k, table.K), table)[0, k])


def genie_detect(x_hat_k, table, k, true_interferer_indices):
    """``true_interferer_indices`` is a full length-K index vector; entry k is ignored."""
    truth = np.array(true_interferer_indices, dtype=np.intp)
    return int(genie_batch(_one_ue(x_hat_k, k, table.K), table, truth[None, :])[0, k])


def _one_ue(x_hat_k, k, K):
    v = np.zeros((1, K), dtype=complex)
    v[0, k] = x_hat_k
    return v


def jd(x_hat, table):
    return Decision(jd_batch(np.asarray(x_hat)[None, :], table)[0], "jd", table.L ** table.K)


def n_jd(x_hat, table, N):
    return Decision(n_jd_batch(np.asarray(x_hat)[None, :], table, N)[0], "n_jd", N ** table.K)


def rml_theta(rho, K):
    """Sigmoid slope ``1.702 sqrt(4 rho / (rho K + 1))``."""
    return 1.702 * np.sqrt(4.0 * rho / (rho * K + 1))


def _real_stack(v):
    return np.concatenate([v.real, v.imag], axis=-1)


def rml_objective(r_signs, H_eff, x, theta):
    """``sum_m log(1 + exp(-theta r_m g_m^T x))`` on the real-stacked model."""
    a = _real_stack(np.asarray(H_eff) @ np.asarray(x, dtype=complex))
    return float(np.sum(np.logaddexp(0.0, -theta * np.asarray(r_signs) * a)))


def rml_batch(R, H_eff, rho, K, constellation):
    """
    Full-search RML for a batch of quantized observations ``R`` (B, M).

    Only the signs of ``R`` enter; the quantizer scale is a positive
    constant that could be folded into ``theta``.
    """
    R = np.atleast_2d(R)
    theta = rml_theta(rho, K)
    idx = index_vectors(constellation.L, K)
    X = constellation.symbols[idx]
    A = _real_stack(X @ np.asarray(H_eff).T)  # (N, 2M): g_m^T x for each candidate
    signs = _real_stack(R)
    pos = (signs >= 0).astype(float)  # sgn(0) = +1
    # r_m in {+1, -1}: log(1 + exp(-theta r a)) picks softplus(-theta a) or softplus(theta a)
    obj = pos @ np.logaddexp(0.0, -theta * A).T + (1.0 - pos) @ np.logaddexp(0.0, theta * A).T
    return idx[np.argmin(obj, axis=1)]


def rml_detect(r, H_eff, rho, K, constellation):
    return Decision(rml_batch(np.asarray(r)[None, :], H_eff, rho, K, constellation)[0], "rml",
                    constellation.L ** K)
