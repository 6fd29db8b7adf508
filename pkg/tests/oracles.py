"""Independent reference implementations used by the tests."""

import numpy as np


def _circular_convolve(v, h):
    """Direct O(N^2) circular convolution ``sum_m v[m] h[(n - m) mod N]``."""
    N = len(v)
    out = np.zeros(N, dtype=complex)
    for n in range(N):
        for m in range(N):
            out[n] += v[m] * h[(n - m) % N]
    return out


def brute_force_spectra(x, bank):
    """All spectra entries from time-domain filters and explicit formulas.

    Requires ``bank.n_fft == len(x)``. Ordering follows ``spectra_index``.
    """
    x = np.asarray(x, dtype=float)
    N, J = len(x), bank.J
    assert bank.n_fft == N
    t = np.arange(N) / (N - 1)
    xc = x - x[0] - t * (x[-1] - x[0])
    psi_t = [np.fft.ifft(bank.psi_hat[j]) for j in range(J)]
    W = [_circular_convolve(xc, psi_t[j]) for j in range(J)]
    A = [np.abs(w) for w in W]
    P = [np.mean(a**2) for a in A]
    out = []
    out += [np.mean(A[j]) ** 2 / P[j] for j in range(J)]
    out += [P[j] for j in range(J)]
    for j in range(J):
        for jp in range(j + 1):
            out.append(np.mean(W[j] * A[jp]) / np.sqrt(P[j] * P[jp]))
    for j2 in range(1, J):
        for j1 in range(j2):
            for j1p in range(j1, j2):
                u1 = _circular_convolve(A[j1], psi_t[j2])
                u2 = _circular_convolve(A[j1p], psi_t[j2])
                out.append(np.mean(u1 * np.conj(u2)) / np.sqrt(P[j1] * P[j1p]))
    for j in range(1, J + 1):
        lag = 2**j
        d = x[lag:] - x[:-lag]
        out.append(np.mean(1 / (1 + np.exp(-d))))
    return np.array(out, dtype=complex)


def ar1_increments(n_paths, N, rho, rng, sigma=1.0):
    """Paths whose daily increments follow a stationary Gaussian AR(1)."""
    e = rng.standard_normal((n_paths, N - 1)) * sigma
    dx = np.empty_like(e)
    dx[:, 0] = e[:, 0] / np.sqrt(1 - rho * rho)
    for t in range(1, N - 1):
        dx[:, t] = rho * dx[:, t - 1] + e[:, t]
    return np.concatenate([np.zeros((n_paths, 1)), np.cumsum(dx, axis=1)], axis=1)


def gbm_log_paths(n_paths, n_steps, sigma, rng, dt=1 / 252):
    """Zero-rate GBM log-prices starting at 0 (martingale prices)."""
    z = rng.standard_normal((n_paths, n_steps))
    dx = sigma * np.sqrt(dt) * z - 0.5 * sigma * sigma * dt
    return np.concatenate([np.zeros((n_paths, 1)), np.cumsum(dx, axis=1)], axis=1)
