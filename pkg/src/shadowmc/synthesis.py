"""Microcanonical synthesis: paths whose Scattering Spectra match a target.

Starting from Gaussian white noise, the squared spectra distance to the target
is minimized with L-BFGS until the distance falls below
``epsilon_rel * ||target||``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .dataset import DatasetWriter, PathDataset
from .spectra import ScatteringSpectra, _forward, compute_spectra, spectra_distance, spectra_vjp
from .wavelets import FilterBank, build_filter_bank

__all__ = [
    "SynthesisConfig",
    "SynthesisResult",
    "generate_dataset",
    "loss",
    "loss_and_gradient",
    "loss_gradient",
    "synthesize",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SynthesisConfig:
    epsilon_rel: float = 1e-3
    max_iterations: int = 1000
    lbfgs_memory: int = 10
    # relative to the target's RMS wavelet amplitude sqrt(mean phi2)
    modulus_smoothing: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if not self.epsilon_rel > 0:
            raise ValueError("epsilon_rel must be positive")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")
        if self.lbfgs_memory < 1:
            raise ValueError("lbfgs_memory must be at least 1")
        if self.modulus_smoothing < 0:
            raise ValueError("modulus_smoothing must be non-negative")


@dataclass
class SynthesisResult:
    path: np.ndarray
    final_loss: float
    iterations: int
    converged: bool
    seed: int = 0
    loss_history: list[float] = field(default_factory=list)


def _check_target(target: ScatteringSpectra, bank: FilterBank) -> None:
    if target.index.J != bank.J:
        raise ValueError(f"target has J={target.index.J}, filter bank has J={bank.J}")
    if not np.all(np.isfinite(target.values)):
        raise ValueError("target spectra must be finite")


def _smoothing(target: ScatteringSpectra, relative: float) -> float:
    return relative * float(np.sqrt(np.mean(target["phi2"].real)))


def loss(x, target: ScatteringSpectra, bank: FilterBank) -> float:
    _check_target(target, bank)
    return spectra_distance(compute_spectra(x, bank), target) ** 2


def loss_and_gradient(x, target: ScatteringSpectra, bank: FilterBank, modulus_smoothing: float = 0.0):
    """Loss and its gradient; ``modulus_smoothing`` is absolute here."""
    values, fw = _forward(x, bank, modulus_smoothing)
    d = values - target.values
    value = float(np.sum(d.real**2 + d.imag**2))
    return value, spectra_vjp(fw, 2 * d)


def loss_gradient(x, target: ScatteringSpectra, bank: FilterBank, modulus_smoothing: float | None = None):
    """Gradient of :func:`loss` by an adjoint sweep through the spectra pipeline.

    The modulus is smoothed as ``sqrt(|z|**2 + eps**2)``; by default ``eps`` is
    ``1e-8`` times the target's RMS wavelet amplitude.
    """
    _check_target(target, bank)
    if modulus_smoothing is None:
        modulus_smoothing = _smoothing(target, SynthesisConfig.modulus_smoothing)
    return loss_and_gradient(x, target, bank, modulus_smoothing)[1]


def _initial_path(target: ScatteringSpectra, bank: FilterBank, rng: np.random.Generator) -> np.ndarray:
    noise = rng.standard_normal(bank.N)
    level = compute_spectra(noise, bank)["phi2"].real.sum()
    return noise * np.sqrt(target["phi2"].real.sum() / level)


def synthesize(
    target: ScatteringSpectra,
    N: int | None = None,
    config: SynthesisConfig = SynthesisConfig(),
    bank: FilterBank | None = None,
) -> SynthesisResult:
    if bank is None:
        bank = build_filter_bank(N, target.index.J)
    if N is not None and N != bank.N:
        raise ValueError(f"N={N} does not match filter bank N={bank.N}")
    _check_target(target, bank)
    rng = np.random.default_rng(config.seed)
    x0 = _initial_path(target, bank, rng)
    eps = config.epsilon_rel * target.norm()
    eps_m = _smoothing(target, config.modulus_smoothing)

    f0, _ = loss_and_gradient(x0, target, bank, eps_m)
    history = [f0]
    if config.max_iterations == 0 or np.sqrt(f0) <= eps:
        return SynthesisResult(x0, f0, 0, bool(np.sqrt(f0) <= eps), config.seed, history)

    state = {"x": x0, "f": f0}

    def callback(intermediate_result):
        state["x"] = intermediate_result.x.copy()
        state["f"] = float(intermediate_result.fun)
        history.append(state["f"])
        if np.sqrt(state["f"]) <= eps:
            raise StopIteration

    res = minimize(
        loss_and_gradient,
        x0,
        args=(target, bank, eps_m),
        jac=True,
        method="L-BFGS-B",
        callback=callback,
        options={
            "maxiter": config.max_iterations,
            "maxcor": config.lbfgs_memory,
            "maxfun": 20 * config.max_iterations,
            "ftol": 0.0,
            "gtol": 0.0,
        },
    )
    x = state["x"]
    final = loss(x, target, bank)
    converged = bool(np.sqrt(final) <= eps)
    log.debug("synthesis seed=%d: %d iterations, loss %.3e (%s)", config.seed, len(history) - 1, final, res.message)
    return SynthesisResult(x, final, len(history) - 1, converged, config.seed, history)


def _synthesize_job(args):
    target, config, bank = args
    r = synthesize(target, config=config, bank=bank)
    return r.path, r.seed, r.final_loss, r.converged


def generate_dataset(
    target: ScatteringSpectra,
    count: int,
    N: int,
    config: SynthesisConfig = SynthesisConfig(),
    out_path=None,
    workers: int = 1,
) -> PathDataset:
    """Run ``count`` independent syntheses (seeds ``config.seed + i``).

    Non-converged paths are kept and flagged. Paths are stored in log-price
    units, i.e. multiplied by ``target.scale``. With ``out_path`` the dataset
    is also streamed to disk in the binary path format.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    bank = build_filter_bank(N, target.index.J)
    jobs = [(target, replace(config, seed=config.seed + i), bank) for i in range(count)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_synthesize_job, jobs))
    else:
        results = [_synthesize_job(j) for j in jobs]

    results = [(r[0] * target.scale, *r[1:]) for r in results]
    ds = PathDataset(
        np.stack([r[0] for r in results]),
        [r[1] for r in results],
        [r[2] for r in results],
        [r[3] for r in results],
    )
    if out_path is not None:
        with DatasetWriter(out_path, N) as w:
            for row, s, l, c in results:
                w.append(row, s, l, c)
    return ds
