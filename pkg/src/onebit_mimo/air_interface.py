"""
Transmit constellations, AWGN, and the 1-bit quantizer for the pilot and
data phases.

Vectorization convention: the pilot observation ``vec(Y_p)`` is stacked
column by column, so entry ``u * M + m`` (0-based) belongs to antenna
``m`` and pilot symbol ``u``.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Constellation",
    "QuantizedObservation",
    "qam16",
    "bpsk",
    "qpsk",
    "constellation_by_label",
    "quantizer_scale",
    "one_bit_quantize",
    "pilot_phase",
    "data_phase",
    "vec_pilot",
    "unvec_pilot",
    "awgn",
]


@dataclass(frozen=True)
class Constellation:
    """Ordered, unit-average-power symbol alphabet."""

    symbols: np.ndarray
    label: str

    def __post_init__(self):
        s = np.asarray(self.symbols, dtype=complex)
        if abs(np.mean(np.abs(s) ** 2) - 1.0) > 1e-12:
            raise ValueError("constellation must have unit average power")
        if len(np.unique(np.round(s, 12))) != s.size:
            raise ValueError("constellation symbols must be distinct")

    @property
    def L(self):
        return self.symbols.size

    def rotation_permutation(self):
        """Index map ``perm`` with ``symbols[perm[l]] == 1j * symbols[l]``; None if not closed."""
        return _match_permutation(self.symbols, 1j * self.symbols)

    def negation_permutation(self):
        return _match_permutation(self.symbols, -self.symbols)


def _match_permutation(symbols, target):
    d = np.abs(target[:, None] - symbols[None, :])
    perm = np.argmin(d, axis=1)
    if np.max(d[np.arange(symbols.size), perm]) > 1e-12:
        return None
    return perm


def qam16():
    """Square 16-QAM scaled by 1/sqrt(10); index ``4 * i_re + i_im`` over levels (-3, -1, 1, 3)."""
    levels = np.array([-3.0, -1.0, 1.0, 3.0])
    pts = (levels[:, None] + 1j * levels[None, :]).ravel() / np.sqrt(10.0)
    return Constellation(symbols=pts, label="16qam")


def qpsk():
    levels = np.array([-1.0, 1.0])
    pts = (levels[:, None] + 1j * levels[None, :]).ravel() / np.sqrt(2.0)
    return Constellation(symbols=pts, label="qpsk")


def bpsk():
    return Constellation(symbols=np.array([-1.0 + 0j, 1.0 + 0j]), label="bpsk")


_CONSTELLATIONS = {"16qam": qam16, "qam16": qam16, "qpsk": qpsk, "bpsk": bpsk}


def constellation_by_label(label):
    try:
        return _CONSTELLATIONS[label.lower()]()
    except KeyError:
        raise ValueError(f"unknown constellation {label!r}; choose from {sorted(_CONSTELLATIONS)}") from None


@dataclass(frozen=True)
class QuantizedObservation:
    """Unquantized signal ``y`` and its 1-bit version ``r``."""

    y: np.ndarray
    r: np.ndarray


def quantizer_scale(rho, K):
    return np.sqrt((rho * K + 1) / 2.0)


def one_bit_quantize(X, rho, K):
    """
    ``sqrt((rho K + 1) / 2) * (sgn(Re X) + j sgn(Im X))`` with ``sgn(0) = +1``.
    """
    X = np.asarray(X)
    s = quantizer_scale(rho, K)
    re = np.where(X.real >= 0, 1.0, -1.0)
    im = np.where(X.imag >= 0, 1.0, -1.0)
    return s * (re + 1j * im)


def awgn(rng, shape):
    """i.i.d. CN(0, 1) samples (real and imaginary parts of variance 1/2)."""
    return np.sqrt(0.5) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def vec_pilot(Y):
    """Column-major vectorization of (..., M, tau) into (..., M * tau)."""
    Y = np.asarray(Y)
    return np.swapaxes(Y, -1, -2).reshape(Y.shape[:-2] + (Y.shape[-1] * Y.shape[-2],))


def unvec_pilot(y, M):
    y = np.asarray(y)
    tau = y.shape[-1] // M
    return np.swapaxes(y.reshape(y.shape[:-1] + (tau, M)), -1, -2)


def pilot_phase(scenario, book, H, rng, noise=True):
    """
    Quantized pilot observation ``r_p = Q(vec(sqrt(rho) H P^H + Z_p))``.

    ``H`` may carry leading batch dimensions, shape (..., M, K).
    """
    H = np.asarray(H)
    rho = scenario.rho
    Y = np.sqrt(rho) * (H @ book.P.conj().T)
    if noise:
        Y = Y + awgn(rng, Y.shape)
    y = vec_pilot(Y)
    return QuantizedObservation(y=y, r=one_bit_quantize(y, rho, scenario.K))


def data_phase(scenario, H, x, rng, noise=True):
    """
    Quantized data observation ``r = Q(sqrt(rho) H x + z)``.

    ``H`` has shape (..., M, K) and ``x`` shape (K,) or (..., K).
    """
    H = np.asarray(H)
    x = np.asarray(x, dtype=complex)
    y = np.sqrt(scenario.rho) * np.einsum("...mk,...k->...m", H, x)
    if noise:
        y = y + awgn(rng, y.shape)
    return QuantizedObservation(y=y, r=one_bit_quantize(y, scenario.rho, scenario.K))
