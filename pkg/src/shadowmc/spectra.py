"""Scattering Spectra of a log-price path.

The statistics vector is, for scales j = 1..J of a :class:`FilterBank`::

    phi1[j]           <|W_j x|>**2 / <|W_j x|**2>
    phi2[j]           <|W_j x|**2>
    phi3[j, j']       <W_j x |W_j' x|> / (sigma_j sigma_j')              j >= j'
    phi4[j1, j1', j2] <W_j2|W_j1 x| conj(W_j2|W_j1' x|)> / (sigma_j1 sigma_j1')
                                                                    j1 <= j1' < j2
    sign[j]           <sigmoid(x(t) - x(t - 2**j))>

with ``sigma_j**2 = phi2[j]`` and ``<.>`` a time average over all samples of
the circular convolution outputs (sign moments average over the ``N - 2**j``
valid increments of the raw path).

Wavelet channels are computed on the path minus its end-to-end chord, so that
the periodic extension seen by the FFT has no jump between ``x[N-1]`` and
``x[0]``. The wavelets have four vanishing moments, so away from the boundary
this leaves every ``W_j x`` unchanged; without it the wrap-around jump of a
random walk (of size ~sqrt(N)) dominates every scale.

The forward pass keeps its intermediates so that the loss gradient can be
obtained by an explicit adjoint sweep (see :func:`spectra_vjp`).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .wavelets import FilterBank, build_filter_bank

__all__ = [
    "COMPONENTS",
    "DegenerateInputError",
    "KINDS",
    "ScatteringSpectra",
    "SpectraIndex",
    "compute_spectra",
    "gaussian_reference",
    "load_spectra",
    "normalized_spectra",
    "perturb_spectra",
    "remove_chord",
    "save_spectra",
    "spectra_distance",
    "spectra_index",
    "spectra_vjp",
]

KINDS = ("phi1", "phi2", "phi3", "phi4", "sign")
COMPONENTS = ("phi1", "phi3_modulus", "phi4", "imaginary_parts")


class DegenerateInputError(ValueError):
    """Raised when a path has a vanishing wavelet channel (e.g. constant input)."""


@dataclass(frozen=True)
class SpectraIndex:
    """Ordered descriptors ``(kind, *scales)`` with scales counted from 1."""

    J: int
    entries: tuple[tuple, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def mask(self, kind: str) -> np.ndarray:
        return np.array([e[0] == kind for e in self.entries])

    def scales(self, kind: str) -> np.ndarray:
        return np.array([e[1:] for e in self.entries if e[0] == kind], dtype=int)

    def counts(self) -> dict[str, int]:
        return {k: int(self.mask(k).sum()) for k in KINDS}


def spectra_index(J: int) -> SpectraIndex:
    entries: list[tuple] = []
    entries += [("phi1", j) for j in range(1, J + 1)]
    entries += [("phi2", j) for j in range(1, J + 1)]
    entries += [("phi3", j, jp) for j in range(1, J + 1) for jp in range(1, j + 1)]
    entries += [
        ("phi4", j1, j1p, j2)
        for j2 in range(2, J + 1)
        for j1 in range(1, j2)
        for j1p in range(j1, j2)
    ]
    entries += [("sign", j) for j in range(1, J + 1)]
    return SpectraIndex(J, tuple(entries))


@dataclass(frozen=True, eq=False)
class ScatteringSpectra:
    """Statistics aligned with ``index``.

    ``scale`` records the unit the path was measured in: the statistics are
    those of ``x / scale`` (1 for raw log-prices; see :func:`normalized_spectra`).
    """

    index: SpectraIndex
    values: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        if len(self.values) != len(self.index):
            raise ValueError("values are not aligned with the index")

    def __getitem__(self, kind: str) -> np.ndarray:
        return self.values[self.index.mask(kind)]

    def replace(self, kind: str, new_values) -> "ScatteringSpectra":
        v = self.values.copy()
        v[self.index.mask(kind)] = new_values
        return ScatteringSpectra(self.index, v, self.scale)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def to_dict(self) -> dict:
        return {
            "format": "scattering-spectra",
            "version": 1,
            "J": self.index.J,
            "scale": self.scale,
            "entries": [
                {"kind": e[0], "scales": list(e[1:]), "re": float(v.real), "im": float(v.imag)}
                for e, v in zip(self.index.entries, self.values)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScatteringSpectra":
        if d.get("format") != "scattering-spectra":
            raise ValueError("not a scattering-spectra document")
        index = spectra_index(int(d["J"]))
        entries = tuple((e["kind"], *e["scales"]) for e in d["entries"])
        if entries != index.entries:
            raise ValueError("entries do not match the canonical index for this J")
        values = np.array([complex(e["re"], e["im"]) for e in d["entries"]])
        return cls(index, values, float(d.get("scale", 1.0)))


def save_spectra(spectra: ScatteringSpectra, path) -> None:
    Path(path).write_text(json.dumps(spectra.to_dict(), indent=1))


def load_spectra(path) -> ScatteringSpectra:
    return ScatteringSpectra.from_dict(json.loads(Path(path).read_text()))


@dataclass
class _Forward:
    """Intermediates of one forward pass, consumed by :func:`spectra_vjp`."""

    bank: FilterBank
    x: np.ndarray
    W: np.ndarray
    A: np.ndarray
    P: np.ndarray
    m1: np.ndarray
    pairs3: tuple[np.ndarray, np.ndarray]
    num3: np.ndarray
    pairs2: tuple[np.ndarray, np.ndarray]
    U: np.ndarray
    quad4: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    num4: np.ndarray
    sig: list[np.ndarray] = field(default_factory=list)


def _convolve(v: np.ndarray, filters: np.ndarray, bank: FilterBank) -> np.ndarray:
    vh = np.fft.fft(v, n=bank.n_fft, axis=-1)
    return np.fft.ifft(vh * filters, axis=-1)[..., : bank.N]


def _convolve_adjoint(g: np.ndarray, filters: np.ndarray, bank: FilterBank) -> np.ndarray:
    gh = np.fft.fft(g, n=bank.n_fft, axis=-1)
    return np.fft.ifft(gh * np.conj(filters), axis=-1)[..., : bank.N]


def _layout(J: int):
    a3, b3 = np.array([(j, jp) for j in range(J) for jp in range(j + 1)]).T
    # first-stage scale / second-stage scale pairs for |W_j1 x| * psi_j2
    pairs = [(j1, j2) for j2 in range(1, J) for j1 in range(j2)]
    pj1, pj2 = np.array(pairs).T
    slot = {p: i for i, p in enumerate(pairs)}
    quad = [
        (j1, j1p, slot[(j1, j2)], slot[(j1p, j2)])
        for j2 in range(1, J)
        for j1 in range(j2)
        for j1p in range(j1, j2)
    ]
    q1, q1p, u1, u2 = np.array(quad).T
    return (a3, b3), (pj1, pj2), (q1, q1p, u1, u2)


def remove_chord(x: np.ndarray) -> np.ndarray:
    """Subtract the straight line through ``(0, x[0])`` and ``(N-1, x[N-1])``."""
    t = np.arange(x.shape[-1]) / (x.shape[-1] - 1)
    return x - x[..., :1] - t * (x[..., -1:] - x[..., :1])


def _remove_chord_adjoint(g: np.ndarray) -> np.ndarray:
    t = np.arange(len(g)) / (len(g) - 1)
    out = g.copy()
    out[0] -= np.sum(g * (1 - t))
    out[-1] -= np.sum(g * t)
    return out


def _forward(x, bank: FilterBank, modulus_smoothing: float = 0.0):
    x = np.asarray(getattr(x, "x", x), dtype=float)
    if x.shape != (bank.N,):
        raise ValueError(f"path length {x.shape} does not match filter bank N = {bank.N}")
    J, N = bank.J, bank.N
    W = _convolve(remove_chord(x), bank.psi_hat, bank)
    sq = W.real**2 + W.imag**2
    P = sq.mean(axis=1)
    if not np.all(P > 0) or not np.all(np.isfinite(P)):
        raise DegenerateInputError("a wavelet channel has zero energy (constant input?)")
    A = np.sqrt(sq + modulus_smoothing**2)
    m1 = A.mean(axis=1)

    (a3, b3), (pj1, pj2), (q1, q1p, u1, u2) = _layout(J)
    # cross moments as Gram matrices (BLAS) rather than elementwise products
    num3 = (W @ A.T / N)[a3, b3]
    U = _convolve(A[pj1], bank.psi_hat[pj2], bank)
    num4 = np.empty(len(q1), dtype=complex)
    start = pos = 0
    for j2 in range(1, J):
        Ub = U[start : start + j2]  # rows (j1, j2) for j1 = 0 .. j2 - 1
        G = Ub @ Ub.conj().T / N
        iu = np.triu_indices(j2)
        num4[pos : pos + len(iu[0])] = G[iu]
        start += j2
        pos += len(iu[0])

    sig, sign = [], []
    for j in range(1, J + 1):
        lag = 2**j
        s = 1.0 / (1.0 + np.exp(-(x[lag:] - x[:-lag])))
        sig.append(s)
        sign.append(s.mean())

    values = np.concatenate(
        [
            m1**2 / P,
            P,
            num3 / np.sqrt(P[a3] * P[b3]),
            num4 / np.sqrt(P[q1] * P[q1p]),
            np.array(sign),
        ]
    ).astype(complex)
    fw = _Forward(bank, x, W, A, P, m1, (a3, b3), num3, (pj1, pj2), U, (q1, q1p, u1, u2), num4, sig)
    return values, fw


def spectra_vjp(fw: _Forward, g: np.ndarray) -> np.ndarray:
    """Pull a cotangent on the spectra values back to the path.

    ``g`` holds ``dL/dRe(phi) + 1j * dL/dIm(phi)`` for a real loss ``L``;
    the result is ``dL/dx``.
    """
    bank, W, A, P = fw.bank, fw.W, fw.A, fw.P
    J, N = bank.J, bank.N
    (a3, b3), (pj1, pj2), (q1, q1p, u1, u2) = fw.pairs3, fw.pairs2, fw.quad4
    n3, n4 = len(a3), len(q1)
    g1 = g[:J].real
    g2 = g[J : 2 * J].real
    g3 = g[2 * J : 2 * J + n3]
    g4 = g[2 * J + n3 : 2 * J + n3 + n4]
    gs = g[2 * J + n3 + n4 :].real

    gP = g2.copy()
    gA = np.zeros_like(A)
    gW = np.zeros_like(W)

    gP -= g1 * fw.m1**2 / P**2
    gA += (g1 * 2 * fw.m1 / P / N)[:, None]

    s3 = np.sqrt(P[a3] * P[b3])
    gn3 = g3 / s3
    gs3 = np.real(np.conj(-fw.num3 / s3**2) * g3)
    np.add.at(gW, a3, A[b3] * gn3[:, None] / N)
    np.add.at(gA, b3, np.real(np.conj(W[a3]) * gn3[:, None]) / N)
    np.add.at(gP, a3, gs3 * P[b3] / (2 * s3))
    np.add.at(gP, b3, gs3 * P[a3] / (2 * s3))

    s4 = np.sqrt(P[q1] * P[q1p])
    gn4 = g4 / s4
    gs4 = np.real(np.conj(-fw.num4 / s4**2) * g4)
    gU = np.zeros_like(fw.U)
    np.add.at(gU, u1, fw.U[u2] * gn4[:, None] / N)
    np.add.at(gU, u2, fw.U[u1] * np.conj(gn4)[:, None] / N)
    np.add.at(gP, q1, gs4 * P[q1p] / (2 * s4))
    np.add.at(gP, q1p, gs4 * P[q1] / (2 * s4))
    np.add.at(gA, pj1, _convolve_adjoint(gU, bank.psi_hat[pj2], bank).real)

    gW += gA * W / A
    gW += gP[:, None] * 2 * W / N
    gx = _remove_chord_adjoint(_convolve_adjoint(gW, bank.psi_hat, bank).real.sum(axis=0))

    for j in range(1, J + 1):
        lag = 2**j
        s = fw.sig[j - 1]
        gd = gs[j - 1] * s * (1 - s) / len(s)
        gx[lag:] += gd
        gx[:-lag] -= gd
    return gx


def compute_spectra(x, bank: FilterBank | None = None, J: int | None = None) -> ScatteringSpectra:
    x_arr = np.asarray(getattr(x, "x", x), dtype=float)
    if bank is None:
        bank = build_filter_bank(len(x_arr), J)
    values, _ = _forward(x_arr, bank)
    return ScatteringSpectra(spectra_index(bank.J), values)


def normalized_spectra(x, bank: FilterBank | None = None, J: int | None = None) -> ScatteringSpectra:
    """Spectra of ``x / s`` where ``s`` is the standard deviation of the daily increments.

    The loss weighs every entry equally, and the sign moments only behave
    like ``P(dx > 0)`` when increments are of order one, so targets for
    synthesis are taken in these units. ``s`` is kept as ``scale``.
    """
    x_arr = np.asarray(getattr(x, "x", x), dtype=float)
    s = float(np.std(np.diff(x_arr)))
    if s == 0:
        raise DegenerateInputError("constant path")
    out = compute_spectra(x_arr / s, bank, J)
    return ScatteringSpectra(out.index, out.values, s)


def _check_aligned(a: ScatteringSpectra, b: ScatteringSpectra) -> None:
    if a.index != b.index:
        raise ValueError("spectra have different index sets")


def spectra_distance(a: ScatteringSpectra, b: ScatteringSpectra) -> float:
    _check_aligned(a, b)
    d = a.values - b.values
    return float(np.sqrt(np.sum(d.real**2 + d.imag**2)))


def gaussian_reference(
    target: ScatteringSpectra, bank: FilterBank, n_realizations: int = 16, seed: int = 0
) -> ScatteringSpectra:
    """Spectra of a Gaussian model with the same per-scale variance as ``target``.

    phi1 = pi/4, phi3 = 0 and sign = 1/2 are exact Gaussian values; phi4 is the
    real part of a Monte-Carlo average over Gaussian random walks (its
    imaginary part vanishes by time reversibility).
    """
    rng = np.random.default_rng(seed)
    idx = target.index
    phi4 = np.zeros(int(idx.mask("phi4").sum()), dtype=complex)
    for _ in range(n_realizations):
        walk = np.cumsum(rng.standard_normal(bank.N))
        phi4 += compute_spectra(walk, bank)["phi4"]
    ref = target.replace("phi1", np.pi / 4).replace("phi3", 0.0).replace("sign", 0.5)
    return ref.replace("phi4", (phi4 / n_realizations).real)


def perturb_spectra(
    target: ScatteringSpectra, gaussian_ref: ScatteringSpectra, component: str, lam: float
) -> ScatteringSpectra:
    """Move one family of statistics towards (lam < 1) or away from a Gaussian reference.

    ``phi1`` and ``phi4`` interpolate ``(1 - lam) * ref + lam * target``;
    ``phi3_modulus`` scales phi3 by lam; ``imaginary_parts`` scales the
    imaginary parts of phi3 and phi4 by lam (lam = 0 gives ``Re phi``).
    """
    _check_aligned(target, gaussian_ref)
    if lam < 0:
        raise ValueError("lam must be non-negative")
    if component in ("phi1", "phi4"):
        mixed = (1 - lam) * gaussian_ref[component] + lam * target[component]
        return target.replace(component, mixed)
    if component == "phi3_modulus":
        return target.replace("phi3", (1 - lam) * gaussian_ref["phi3"] + lam * target["phi3"])
    if component == "imaginary_parts":
        out = target
        for kind in ("phi3", "phi4"):
            v = target[kind]
            out = out.replace(kind, v.real + 1j * lam * v.imag)
        return out
    raise ValueError(f"unknown component {component!r}; expected one of {COMPONENTS}")
