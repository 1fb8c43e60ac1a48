"""EMCCD detection model: detection probabilities in, count frames out.

The chain is deliberately simple: per pixel, the expected photoelectron
number is QE * (flux * probability + dark), a Poisson draw realizes the
shot noise, the electron-multiplying register applies a deterministic
gain, and Gaussian read noise is added before rounding and clamping at
zero.  The stochastic excess-noise factor of a real EM register is out
of scope; means and contrasts are what the model preserves.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
import os

import numpy as np

from .rng import CounterStream


@dataclass(frozen=True)
class CameraConfig:
    """Acquisition settings mirroring a single-photon EMCCD.

    ``read_noise_sigma`` of None resolves to twice the EM gain, scaling
    the default read noise with the output amplification.
    """

    pixel_pitch_um: float = 16.0
    exposure_s: float = 0.5
    em_gain: float = 20.0
    quantum_efficiency: float = 0.7
    read_noise_sigma: float | None = None
    dark_rate: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.pixel_pitch_um <= 0 or self.exposure_s <= 0:
            raise ValueError("pixel pitch and exposure must be positive")
        if self.em_gain <= 0:
            raise ValueError("EM gain must be positive")
        if not (0.0 <= self.quantum_efficiency <= 1.0):
            raise ValueError("quantum efficiency must be in [0, 1]")
        if self.read_noise_sigma is not None and self.read_noise_sigma < 0:
            raise ValueError("read noise must be non-negative")
        if self.dark_rate < 0:
            raise ValueError("dark rate must be non-negative")

    def read_noise(self) -> float:
        return 2.0 * self.em_gain if self.read_noise_sigma is None else self.read_noise_sigma

    def with_seed(self, seed: int) -> "CameraConfig":
        return replace(self, rng_seed=int(seed))


@dataclass(frozen=True)
class ImageFrame:
    """One sensor readout plus provenance metadata.

    Sampled frames hold non-negative integers.  Expectation frames (the
    noiseless mode of the pipeline) hold the exact per-pixel means as
    floats so model identities survive at full precision.
    """

    counts: np.ndarray
    label: str = ""
    scenario_id: str = ""
    stream_id: int = 0
    config: CameraConfig | None = field(default=None, repr=False)

    @property
    def shape(self):
        return self.counts.shape

    def total(self) -> float:
        return float(self.counts.sum())


def expected_counts(prob_map, flux_map, cfg: CameraConfig) -> np.ndarray:
    """Mean output counts: em_gain * QE * (flux * p + dark_rate * exposure)."""
    prob = np.asarray(prob_map, dtype=np.float64)
    flux = np.asarray(flux_map, dtype=np.float64)
    if prob.shape != flux.shape:
        raise ValueError(f"probability {prob.shape} and flux {flux.shape} shapes differ")
    if np.any(prob < 0) or np.any(prob > 1):
        raise ValueError("probabilities must be in [0, 1]")
    if np.any(flux < 0):
        raise ValueError("flux must be non-negative")
    dark = cfg.dark_rate * cfg.exposure_s
    return cfg.em_gain * cfg.quantum_efficiency * (flux * prob + dark)


def _resolve_threads(threads: int) -> int:
    if threads == 0:
        return os.cpu_count() or 1
    if threads < 0:
        raise ValueError("threads must be >= 0")
    return threads


def _row_chunks(rows: int, threads: int):
    per = -(-rows // threads)
    return [(lo, min(lo + per, rows)) for lo in range(0, rows, per)]


def sample_frame(mean_map, cfg: CameraConfig, stream_id: int, *,
                 threads: int = 1, exact_expectation: bool = False,
                 label: str = "", scenario_id: str = "") -> ImageFrame:
    """Realize one noisy readout of the given per-pixel means.

    Photoelectrons are Poisson with mean ``mean/em_gain``; the output is
    round(k * em_gain + N(0, read_noise)) clamped at zero.  Each pixel
    draws from a counter-based stream keyed by (rng_seed, stream_id,
    pixel index), so the frame is bit-identical however the grid is
    chunked across threads.  With ``exact_expectation`` the rounded mean
    map is returned instead (no randomness at all), which is what golden
    image tests pin.
    """
    mean = np.asarray(mean_map, dtype=np.float64)
    if np.any(mean < 0) or not np.all(np.isfinite(mean)):
        raise ValueError("means must be finite and non-negative")
    if exact_expectation:
        counts = np.rint(mean).astype(np.int64)
        return ImageFrame(counts=counts, label=label, scenario_id=scenario_id,
                          stream_id=stream_id, config=cfg)

    rows, cols = mean.shape
    lam = mean / cfg.em_gain
    cell_ids = np.arange(rows * cols, dtype=np.uint64).reshape(rows, cols)
    stream = CounterStream(cfg.rng_seed, stream_id)
    sigma = cfg.read_noise()
    out = np.empty((rows, cols), dtype=np.int64)

    def fill(lo, hi):
        electrons = stream.poisson(lam[lo:hi], cell_ids[lo:hi]).astype(np.float64)
        signal = electrons * cfg.em_gain
        if sigma > 0:
            signal = signal + sigma * stream.normal(cell_ids[lo:hi])
        out[lo:hi] = np.maximum(np.rint(signal), 0.0).astype(np.int64)

    threads = _resolve_threads(threads)
    if threads <= 1 or rows < 2:
        fill(0, rows)
    else:
        chunks = _row_chunks(rows, threads)
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            list(pool.map(lambda span: fill(*span), chunks))
    return ImageFrame(counts=out, label=label, scenario_id=scenario_id,
                      stream_id=stream_id, config=cfg)


def combine_frames(a: ImageFrame, b: ImageFrame, mode: str) -> np.ndarray:
    """Pixelwise sum or (signed) difference of two frames.

    The sum restores the plain beam profile, the difference doubles the
    interference contrast while the common background cancels.
    """
    if a.counts.shape != b.counts.shape:
        raise ValueError("frames must share a shape")
    if mode == "sum":
        return a.counts + b.counts
    if mode == "diff":
        return a.counts - b.counts
    raise ValueError(f"mode must be 'sum' or 'diff', got {mode!r}")
