"""Complex Battle-Lemarie filter bank and the wavelet transform of a path.

Filters live in the frequency domain on the FFT grid. Wavelets are analytic
(zero on non-positive frequencies) and are dilations of one cubic-spline
Battle-Lemarie mother wavelet. The low-pass channel collects all the scales
coarser than ``2**J``.

Normalization: a real signal has half of its non-DC energy on positive
frequencies, so the analytic filters carry a factor ``sqrt(2)`` and the
transform is an isometry, ``sum_j ||x * psi_j||**2 = ||x||**2``. The
Littlewood-Paley identity then reads, for every grid frequency ``w > 0``::

    1/2 * sum_j (|psi_j(w)|**2 + |psi_j(-w)|**2) + |phi_J(w)|**2 = 1
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "FilterBank",
    "WaveletCoefficients",
    "battle_lemarie_sq",
    "build_filter_bank",
    "default_num_scales",
    "littlewood_paley_sum",
    "wavelet_transform",
]

# sinc(u + k)**8 decays like k**-8: 12 terms per side reach round-off
_SINC_TERMS = np.arange(-12, 13)


def _spline_autocorrelation(u: np.ndarray) -> np.ndarray:
    """``sum_k |theta(u + 2k pi)|**2`` for the cubic B-spline theta.

    The sum is 2pi-periodic, smooth and bounded away from zero.
    """
    r = np.mod(u, 2 * np.pi) / (2 * np.pi)
    return np.sum(np.sinc(r[..., None] + _SINC_TERMS) ** 8, axis=-1)


def battle_lemarie_sq(omega) -> np.ndarray:
    """Squared modulus of the cubic Battle-Lemarie wavelet spectrum.

    Written with the spline autocorrelation sums so that it has no removable
    singularity: ``|psi(w)|**2 = sin(w/4)**8 * sinc4(w)**8 *
    A(w/2 + pi) / (A(w) A(w/2))``. It vanishes like ``w**8`` at 0 (four
    vanishing moments) and satisfies ``sum_{j in Z} |psi(2**j w)|**2 = 1``.
    """
    w = np.abs(np.asarray(omega, dtype=float))
    quarter = w / 4
    envelope = np.sin(quarter) ** 8 * np.sinc(quarter / np.pi) ** 8
    ratio = _spline_autocorrelation(w / 2 + np.pi) / (
        _spline_autocorrelation(w) * _spline_autocorrelation(w / 2)
    )
    return envelope * ratio


def _grid_battle_lemarie_sq(j: int, k: np.ndarray, M: int, table: np.ndarray) -> np.ndarray:
    """:func:`battle_lemarie_sq` at ``2**j * 2pi k / M`` for ``j >= 1``.

    Every autocorrelation argument falls on the ``M``-point grid modulo 2pi,
    so ``table[i] = A(2pi i / M)`` replaces the sinc sums.
    """
    quarter = 2.0**j * 2 * np.pi * k / M / 4
    envelope = np.sin(quarter) ** 8 * np.sinc(quarter / np.pi) ** 8
    full, half = (k << j) % M, (k << (j - 1)) % M
    return envelope * table[(half + M // 2) % M] / (table[full] * table[half])


def default_num_scales(n: int) -> int:
    return max(1, int(np.floor(np.log2(n))) - 3)


@dataclass(frozen=True, eq=False)
class FilterBank:
    """Frequency-domain filters for ``num_scales`` octaves.

    ``psi_hat`` has shape ``(J, n_fft)`` and ``phi_hat`` shape ``(n_fft,)``,
    both indexed like ``numpy.fft.fft`` output. ``n_fft`` is the next power
    of two above ``signal_length``; shorter signals are zero-padded.
    """

    num_scales: int
    signal_length: int
    n_fft: int
    psi_hat: np.ndarray
    phi_hat: np.ndarray

    @property
    def J(self) -> int:
        return self.num_scales

    @property
    def N(self) -> int:
        return self.signal_length

    def frequencies(self) -> np.ndarray:
        """Angular frequency of each FFT bin, Nyquist counted as ``+pi``."""
        k = np.arange(self.n_fft)
        k = np.where(k <= self.n_fft // 2, k, k - self.n_fft)
        return 2 * np.pi * k / self.n_fft


def build_filter_bank(N: int, J: int | None = None) -> FilterBank:
    if J is None:
        J = default_num_scales(N)
    if J <= 0:
        raise ValueError(f"number of scales must be positive, got J={J}")
    if 2**J >= N:
        raise ValueError(f"largest scale 2**{J} = {2**J} must be smaller than N = {N}")
    M = 1 << int(np.ceil(np.log2(N)))

    half = M // 2
    k = np.arange(1, half + 1, dtype=np.int64)  # omega = 2pi k / M in (0, pi]
    table = _spline_autocorrelation(2 * np.pi * np.arange(M) / M)

    # j = 1..J wavelets, then the tail j > J until it is below round-off
    raw = np.stack([_grid_battle_lemarie_sq(j, k, M, table) for j in range(1, J + 1)])
    # the tail stops once 2**j * omega_min passes 2**6 * 2pi, where |psi|**2 < 1e-16
    n_tail = max(1, int(np.log2(M)) + 7 - J)
    tail = sum(_grid_battle_lemarie_sq(j, k, M, table) for j in range(J + 1, J + 1 + n_tail))
    total = raw.sum(axis=0) + tail

    psi = np.zeros((J, M), dtype=complex)
    interior = raw / total
    interior[:, :-1] *= 2.0  # Nyquist bin is its own mirror image
    psi[:, 1 : half + 1] = np.sqrt(interior)

    phi = np.zeros(M)
    phi[0] = 1.0
    low = np.sqrt(tail / total)
    phi[1 : half + 1] = low
    phi[half + 1 :] = low[:-1][::-1]

    psi.setflags(write=False)
    phi.setflags(write=False)
    return FilterBank(J, int(N), M, psi, phi)


def littlewood_paley_sum(bank: FilterBank) -> np.ndarray:
    """Two-sided Littlewood-Paley sum on the positive bins ``1..n_fft/2``."""
    M = bank.n_fft
    pos = np.arange(1, M // 2 + 1)
    neg = (M - pos) % M
    sq = np.abs(bank.psi_hat) ** 2
    return 0.5 * (sq[:, pos] + sq[:, neg]).sum(axis=0) + bank.phi_hat[pos] ** 2


@dataclass(frozen=True, eq=False)
class WaveletCoefficients:
    """``values[j - 1]`` is ``W_j x`` for j = 1..J; ``values[J]`` is the low-pass."""

    values: np.ndarray

    @property
    def wavelets(self) -> np.ndarray:
        return self.values[:-1]

    @property
    def lowpass(self) -> np.ndarray:
        return self.values[-1]


def _as_array(x) -> np.ndarray:
    return np.asarray(getattr(x, "x", x), dtype=float)


def _pad_fft(x: np.ndarray, M: int) -> np.ndarray:
    return np.fft.fft(x, n=M, axis=-1)


def wavelet_transform(x, bank: FilterBank) -> WaveletCoefficients:
    x = _as_array(x)
    if x.shape[-1] != bank.N:
        raise ValueError(f"path length {x.shape[-1]} does not match filter bank N = {bank.N}")
    xh = _pad_fft(x, bank.n_fft)
    filters = np.concatenate([bank.psi_hat, bank.phi_hat[None, :]])
    out = np.fft.ifft(xh[..., None, :] * filters, axis=-1)[..., : bank.N]
    return WaveletCoefficients(out)
