"""Physical parameter layer: wavelengths, phase objects, imaging, coherence.

Covers the bookkeeping that turns laboratory quantities into the
dimensionless (T, gamma) samples consumed by the quantum core:

* wavelength triples and their energy-conservation residual,
* etch depth <-> imparted phase for dielectric phase objects,
* object-to-camera magnification and grid remapping,
* coherence length and the path-mismatch visibility penalty,
* the illumination envelope across the sensor.

Units follow the attribute suffixes: nm, um, mm, mW, radians.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from . import pgm
from .qcore import TWO_PI

ENERGY_TOL_PER_NM = 1e-5

# Out-of-beam camera pixels see an empty path: full transmission, no phase.
EMPTY_PATH = (1.0, 0.0)


@dataclass(frozen=True)
class WavelengthTriple:
    """Pump, signal and idler wavelengths of the down-conversion pair."""

    pump_nm: float
    signal_nm: float
    idler_nm: float

    def __post_init__(self):
        if min(self.pump_nm, self.signal_nm, self.idler_nm) <= 0:
            raise ValueError("wavelengths must be positive")
        if not self.signal_nm < self.idler_nm:
            raise ValueError("the detected signal must be the shorter wavelength")

    def validate_energy(self, tol_per_nm: float = ENERGY_TOL_PER_NM):
        res = energy_conservation_residual(self)
        if abs(res) > tol_per_nm:
            raise ValueError(
                f"1/pump - 1/signal - 1/idler = {res:.3e} nm^-1 exceeds {tol_per_nm:g}")


def energy_conservation_residual(w: WavelengthTriple) -> float:
    """1/lambda_p - 1/lambda_s - 1/lambda_i in nm^-1 (0 for a perfect pair)."""
    return 1.0 / w.pump_nm - 1.0 / w.signal_nm - 1.0 / w.idler_nm


@dataclass(frozen=True)
class ImagingGeometry:
    """Relay focal lengths and the camera sampling grid."""

    f1_mm: float = 75.0
    f2_mm: float = 150.0
    pixel_pitch_um: float = 16.0
    rows: int = 256
    cols: int = 256

    def __post_init__(self):
        if min(self.f1_mm, self.f2_mm, self.pixel_pitch_um) <= 0:
            raise ValueError("focal lengths and pixel pitch must be positive")
        if self.rows < 1 or self.cols < 1:
            raise ValueError("camera grid must be at least 1x1")

    def pixel_centers_mm(self):
        """Physical (y, x) coordinates of pixel centers, origin at chip center."""
        pitch = self.pixel_pitch_um * 1e-3
        y = (np.arange(self.rows) - (self.rows - 1) / 2.0) * pitch
        x = (np.arange(self.cols) - (self.cols - 1) / 2.0) * pitch
        return y[:, None], x[None, :]


def magnification(geometry: ImagingGeometry, wavelengths: WavelengthTriple) -> float:
    """Object-to-camera magnification F2 * lambda_s / (F1 * lambda_i).

    The wavelength ratio enters because the object sits in the idler beam
    while the camera sees the signal beam.
    """
    return geometry.f2_mm * wavelengths.signal_nm / (geometry.f1_mm * wavelengths.idler_nm)


def coherence_length(wavelength_nm: float, bandwidth_nm: float) -> float:
    """lambda^2 / delta_lambda, converted to mm."""
    if bandwidth_nm <= 0:
        raise ValueError("bandwidth must be positive")
    return wavelength_nm ** 2 / bandwidth_nm * 1e-6


def mismatch_visibility_factor(path_mismatch_mm: float, coherence_mm: float) -> float:
    """Gaussian interference envelope exp(-(dL/l_c)^2).

    1 for matched interferometer arms, effectively 0 once the mismatch is
    many coherence lengths.
    """
    if coherence_mm <= 0:
        raise ValueError("coherence length must be positive")
    if path_mismatch_mm < 0:
        raise ValueError("path mismatch must be non-negative")
    return math.exp(-((path_mismatch_mm / coherence_mm) ** 2))


def etch_phase(depth_nm, n: float, wavelength_nm: float):
    """Phase imparted by an etched step: 2*pi*(n-1)*depth/lambda, mod 2*pi.

    Broadcasts over array depths.
    """
    if n <= 1.0:
        raise ValueError("refractive index must exceed 1")
    if wavelength_nm <= 0:
        raise ValueError("wavelength must be positive")
    depth = np.asarray(depth_nm, dtype=np.float64)
    if np.any(depth < 0):
        raise ValueError("etch depths must be non-negative")
    phase = np.mod(TWO_PI * (n - 1.0) * depth / wavelength_nm, TWO_PI)
    return float(phase) if phase.ndim == 0 else phase


def etch_depth_for_phase(target_rad: float, n: float, wavelength_nm: float) -> float:
    """Depth in nm producing ``target_rad`` of phase; inverse of etch_phase."""
    if n <= 1.0:
        raise ValueError("refractive index must exceed 1")
    if target_rad < 0:
        raise ValueError("target phase must be non-negative")
    return target_rad * wavelength_nm / (TWO_PI * (n - 1.0))


class IndexTable:
    """Tabulated refractive index with linear interpolation in wavelength."""

    def __init__(self, entries):
        rows = sorted((float(w), float(n)) for w, n in entries)
        if not rows:
            raise ValueError("index table must not be empty")
        for w, n in rows:
            if w <= 0:
                raise ValueError("table wavelengths must be positive")
            if n <= 1.0:
                raise ValueError(f"refractive index at {w} nm must exceed 1")
        self._wavelengths = np.array([w for w, _ in rows])
        self._indices = np.array([n for _, n in rows])

    @property
    def entries(self):
        return list(zip(self._wavelengths.tolist(), self._indices.tolist()))

    def __call__(self, wavelength_nm: float) -> float:
        lo, hi = self._wavelengths[0], self._wavelengths[-1]
        if not (lo <= wavelength_nm <= hi):
            raise ValueError(
                f"{wavelength_nm} nm outside the tabulated range [{lo}, {hi}] nm")
        return float(np.interp(wavelength_nm, self._wavelengths, self._indices))


# Stock tables: single crystal silicon near the long probe wavelength and
# fused silica at the two wavelengths of the non-degenerate configuration
# (values cross-checked against the standard dispersion relation for
# fused silica; agreement is within 2.4e-4).
SILICON_INDEX = IndexTable([(1550.0, 3.48)])
SILICA_INDEX = IndexTable([(820.0, 1.4528), (1515.0, 1.4446)])

BUILTIN_INDEX_TABLES = {
    "silicon": SILICON_INDEX,
    "silica": SILICA_INDEX,
}


class Placement(Enum):
    """Which interferometer arm the object sits in."""

    IDLER_PATH = "idler"
    SIGNAL_PATH = "signal"
    NONE = "none"


@dataclass(frozen=True)
class PhaseObjectSpec:
    """Physical description of an object on its own object-plane grid.

    ``depth_nm`` holds etch depths, ``amplitude_mask`` per-pixel amplitude
    transmittance (None means fully transparent), both sampled at
    ``pitch_um``.
    """

    depth_nm: np.ndarray
    pitch_um: float
    index_table: IndexTable
    amplitude_mask: np.ndarray | None = None
    placement: Placement = Placement.IDLER_PATH

    def __post_init__(self):
        depth = np.asarray(self.depth_nm, dtype=np.float64)
        if depth.ndim != 2:
            raise ValueError("depth map must be 2D")
        if not np.all(np.isfinite(depth)) or np.any(depth < 0):
            raise ValueError("etch depths must be finite and non-negative")
        object.__setattr__(self, "depth_nm", depth)
        if self.pitch_um <= 0:
            raise ValueError("object pitch must be positive")
        if self.amplitude_mask is not None:
            mask = np.asarray(self.amplitude_mask, dtype=np.float64)
            if mask.shape != depth.shape:
                raise ValueError("amplitude mask must match the depth map shape")
            if np.any(mask < 0) or np.any(mask > 1) or not np.all(np.isfinite(mask)):
                raise ValueError("amplitude mask values must be in [0, 1]")
            object.__setattr__(self, "amplitude_mask", mask)


@dataclass(frozen=True)
class ObjectMap:
    """Per-pixel (T, gamma) response on some grid, plus its pitch."""

    transmittance: np.ndarray
    phase: np.ndarray
    pitch_um: float
    placement: Placement

    def __post_init__(self):
        if self.transmittance.shape != self.phase.shape:
            raise ValueError("T and phase grids must share a shape")


def rasterize_phase_object(spec: PhaseObjectSpec, probe_nm: float) -> ObjectMap:
    """Convert a physical object into its (T, gamma) response at ``probe_nm``."""
    n = spec.index_table(probe_nm)
    phase = etch_phase(spec.depth_nm, n, probe_nm)
    if spec.amplitude_mask is None:
        t = np.ones_like(spec.depth_nm)
    else:
        t = spec.amplitude_mask.copy()
    return ObjectMap(transmittance=t, phase=np.asarray(phase),
                     pitch_um=spec.pitch_um, placement=spec.placement)


def remap_object_to_camera(obj_map: ObjectMap, mag: float,
                           geometry: ImagingGeometry) -> ObjectMap:
    """Resample an object-plane map onto the camera grid.

    Each camera pixel center is pulled back to the object plane through
    the magnification and sampled bilinearly: directly in T, and through
    the unit phasor e^{i gamma} for the phase, which avoids seam
    artifacts where gamma wraps through 2*pi.  Pixels that land outside
    the object grid see an empty path.
    """
    if mag <= 0:
        raise ValueError("magnification must be positive")
    rows_o, cols_o = obj_map.transmittance.shape
    if rows_o < 1 or cols_o < 1:
        raise ValueError("degenerate object grid")

    y_mm, x_mm = geometry.pixel_centers_mm()
    pitch_obj_mm = obj_map.pitch_um * 1e-3
    # fractional object-grid indices of each camera pixel center
    fy = (y_mm / mag) / pitch_obj_mm + (rows_o - 1) / 2.0
    fx = (x_mm / mag) / pitch_obj_mm + (cols_o - 1) / 2.0
    fy, fx = np.broadcast_arrays(fy, fx)

    inside = (fy >= 0) & (fy <= rows_o - 1) & (fx >= 0) & (fx <= cols_o - 1)
    fy_c = np.clip(fy, 0, rows_o - 1)
    fx_c = np.clip(fx, 0, cols_o - 1)
    y0 = np.floor(fy_c).astype(np.intp)
    x0 = np.floor(fx_c).astype(np.intp)
    y1 = np.minimum(y0 + 1, rows_o - 1)
    x1 = np.minimum(x0 + 1, cols_o - 1)
    wy = fy_c - y0
    wx = fx_c - x0

    def lerp(grid):
        top = grid[y0, x0] * (1 - wx) + grid[y0, x1] * wx
        bot = grid[y1, x0] * (1 - wx) + grid[y1, x1] * wx
        return top * (1 - wy) + bot * wy

    t_cam = lerp(obj_map.transmittance)
    phasor = lerp(np.exp(1j * obj_map.phase))
    # renormalize; a vanishing phasor (opposite phases meeting) has no
    # meaningful angle, use 0 there
    gamma_cam = np.mod(np.angle(phasor), TWO_PI)
    gamma_cam[np.abs(phasor) < 1e-12] = 0.0

    t_cam = np.where(inside, t_cam, EMPTY_PATH[0])
    gamma_cam = np.where(inside, gamma_cam, EMPTY_PATH[1])
    return ObjectMap(transmittance=t_cam, phase=gamma_cam,
                     pitch_um=geometry.pixel_pitch_um, placement=obj_map.placement)


def gaussian_envelope(geometry: ImagingGeometry, waist_mm: float,
                      peak_rate: float) -> np.ndarray:
    """Illumination in photons/pixel/exposure: a centered Gaussian beam.

    ``waist_mm`` is the 1/e^2 intensity radius.
    """
    if waist_mm <= 0:
        raise ValueError("beam waist must be positive")
    if peak_rate < 0:
        raise ValueError("peak rate must be non-negative")
    y_mm, x_mm = geometry.pixel_centers_mm()
    r_sq = y_mm ** 2 + x_mm ** 2
    return peak_rate * np.exp(-2.0 * r_sq / waist_mm ** 2)


def phase_object_from_dict(doc: dict, base_dir) -> PhaseObjectSpec:
    """Build a phase object from its JSON document.

    The document references 16-bit PGM rasters relative to ``base_dir``:

        {"pitch_um": 8.0,
         "depth_map_pgm": "depth.pgm",
         "depth_scale_nm_per_level": 0.5,
         "index_table": [[820.0, 1.4528], [1515.0, 1.4446]],
         "amplitude_mask_pgm": null,
         "placement": "idler"}

    Mask PGM values map linearly onto T in [0, 1].
    """
    required = {"pitch_um", "depth_map_pgm", "depth_scale_nm_per_level",
                "index_table", "placement"}
    missing = required - doc.keys()
    if missing:
        raise ValueError(f"phase object document is missing keys {sorted(missing)}")
    base = Path(base_dir)
    depth_raw, _ = pgm.read_pgm(base / doc["depth_map_pgm"])
    depth = depth_raw.astype(np.float64) * float(doc["depth_scale_nm_per_level"])
    mask = None
    if doc.get("amplitude_mask_pgm"):
        mask_raw, _ = pgm.read_pgm(base / doc["amplitude_mask_pgm"])
        mask = mask_raw.astype(np.float64) / 65535.0
    return PhaseObjectSpec(
        depth_nm=depth,
        pitch_um=float(doc["pitch_um"]),
        index_table=IndexTable(doc["index_table"]),
        amplitude_mask=mask,
        placement=Placement(doc["placement"]),
    )


def load_phase_object(path) -> PhaseObjectSpec:
    """Load a phase object from a JSON descriptor file."""
    path = Path(path)
    return phase_object_from_dict(json.loads(path.read_text()), path.parent)
