"""Scattering Spectra models of log-prices and Path Shadowing Monte-Carlo."""

from .dataset import PathDataset, WindowSpec, load_dataset, save_dataset
from .embedding import EmbeddedPast, EmbeddingConfig, embed, shadow_distance, threshold
from .options import PricingJob, SmileSurface, bs_price, hmc_price, implied_vol, ps_hmc_smile, smile_metrics
from .paths import LogPricePath, load_prices, write_prices
from .pdv import PdvBetas, PdvKernels, pdv_simulate
from .shadow import ShadowSet, estimate, predict_distribution, scan
from .spectra import ScatteringSpectra, compute_spectra, normalized_spectra, spectra_distance
from .synthesis import SynthesisConfig, SynthesisResult, generate_dataset, loss, loss_gradient, synthesize
from .volatility import predict_benchmark, predict_ps_mc, realized_variance, score_r2
from .wavelets import FilterBank, build_filter_bank, wavelet_transform

__version__ = "0.1.0"
