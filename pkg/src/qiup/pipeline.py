"""End-to-end experiment runner.

Composes the layers per camera pixel: the optics layer supplies the
(T, gamma) response and the illumination envelope, the quantum core
supplies output probabilities, and the camera layer turns probabilities
into count frames.  On top of the single-exposure path sit the phase
scan with its sinusoid fit, the interaction-free coincidence map, and
the stimulated-emission null check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import optics, qcore
from .camera import CameraConfig, ImageFrame, expected_counts, sample_frame
from .optics import (ImagingGeometry, ObjectMap, PhaseObjectSpec, Placement,
                     WavelengthTriple, coherence_length, gaussian_envelope,
                     magnification, mismatch_visibility_factor,
                     rasterize_phase_object, remap_object_to_camera)
from .rng import CounterStream, splitmix64

# Free brightness calibration: peak photons/pixel/exposure at the
# reference pump power, scaled linearly with the configured power.
PEAK_RATE_REFERENCE = 1000.0
REFERENCE_PUMP_MW = 150.0

ORACLE_FRACTION = 0.01
ORACLE_TOL = 1e-9


class ScenarioError(ValueError):
    """A scenario violates its invariants."""


@dataclass(frozen=True)
class Scenario:
    """Complete description of one run of the experiment."""

    wavelengths: WavelengthTriple = WavelengthTriple(532.0, 810.0, 1550.0)
    geometry: ImagingGeometry = ImagingGeometry()
    object_spec: PhaseObjectSpec | None = None
    builtin_object: str | None = None
    idler_blocked: bool = False
    pump_phase_rad: float = 0.0
    setup_visibility: float = 0.77
    path_mismatch_mm: float = 0.0
    filter_bandwidth_nm: float = 3.0
    beam_waist_mm: float = 1.5
    pump_power_mw: float = 150.0
    idler_detector_efficiency: float = 0.0
    camera: CameraConfig = field(default_factory=CameraConfig)
    name: str = "custom"

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, camera=self.camera.with_seed(seed))


def validate_scenario(s: Scenario) -> None:
    """Raise ScenarioError on any violated invariant."""
    try:
        s.wavelengths.validate_energy()
        if not (0.0 <= s.setup_visibility <= 1.0):
            raise ValueError("setup visibility must be in [0, 1]")
        if not (0.0 <= s.idler_detector_efficiency <= 1.0):
            raise ValueError("idler detector efficiency must be in [0, 1]")
        if s.path_mismatch_mm < 0:
            raise ValueError("path mismatch must be non-negative")
        if s.filter_bandwidth_nm <= 0:
            raise ValueError("filter bandwidth must be positive")
        if s.beam_waist_mm <= 0:
            raise ValueError("beam waist must be positive")
        if s.pump_power_mw <= 0:
            raise ValueError("pump power must be positive")
        if not math.isclose(s.geometry.pixel_pitch_um, s.camera.pixel_pitch_um,
                            rel_tol=0, abs_tol=1e-9):
            raise ValueError("geometry and camera disagree on the pixel pitch")
        if not math.isfinite(s.pump_phase_rad):
            raise ValueError("pump phase must be finite")
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc


def effective_visibility(s: Scenario) -> float:
    """Setup visibility degraded by any arm-length mismatch."""
    l_c = coherence_length(s.wavelengths.signal_nm, s.filter_bandwidth_nm)
    return s.setup_visibility * mismatch_visibility_factor(s.path_mismatch_mm, l_c)


def peak_rate(s: Scenario) -> float:
    return PEAK_RATE_REFERENCE * s.pump_power_mw / REFERENCE_PUMP_MW


@dataclass(frozen=True)
class ScenarioMaps:
    """Per-camera-pixel ingredients of a run."""

    transmittance: np.ndarray
    gamma_idler: np.ndarray
    gamma_signal: np.ndarray
    flux: np.ndarray
    v_eff: float
    p_g: np.ndarray
    p_h: np.ndarray


def effective_maps(s: Scenario) -> ScenarioMaps:
    """Resolve a scenario into per-pixel (T, phases, flux, probabilities)."""
    validate_scenario(s)
    shape = (s.geometry.rows, s.geometry.cols)
    t_map = np.ones(shape)
    gamma_idler = np.zeros(shape)
    gamma_signal = np.zeros(shape)

    spec = s.object_spec
    if spec is not None and spec.placement is not Placement.NONE:
        probe_nm = (s.wavelengths.idler_nm if spec.placement is Placement.IDLER_PATH
                    else s.wavelengths.signal_nm)
        obj_map = rasterize_phase_object(spec, probe_nm)
        cam_map = remap_object_to_camera(obj_map, magnification(s.geometry, s.wavelengths),
                                         s.geometry)
        t_map = cam_map.transmittance
        if spec.placement is Placement.IDLER_PATH:
            gamma_idler = cam_map.phase
        else:
            gamma_signal = cam_map.phase

    v_eff = effective_visibility(s)
    if s.idler_blocked:
        p_g = np.full(shape, 0.5)
        p_h = np.full(shape, 0.5)
    else:
        pair = qcore.closed_form_probabilities(t_map, gamma_idler, gamma_signal,
                                               s.pump_phase_rad, v_eff)
        p_g, p_h = pair.p_g, pair.p_h
    flux = gaussian_envelope(s.geometry, s.beam_waist_mm, peak_rate(s))
    return ScenarioMaps(transmittance=t_map, gamma_idler=gamma_idler,
                        gamma_signal=gamma_signal, flux=flux, v_eff=v_eff,
                        p_g=p_g, p_h=p_h)


def _trace_oracle_check(s: Scenario, maps: ScenarioMaps) -> None:
    """Spot-check the vectorized closed form against the exact trace.

    On a deterministic ~1% pixel subsample, rebuild the joint state for
    the pixel's (T, gamma) and compare the traced-out probabilities with
    the ideal-instrument closed form.
    """
    n_pix = maps.p_g.size
    n_check = max(1, round(ORACLE_FRACTION * n_pix))
    picker = np.random.default_rng(splitmix64(s.camera.rng_seed) ^ 0xA5A5A5A5)
    idx = picker.choice(n_pix, size=min(n_check, n_pix), replace=False)

    t = maps.transmittance.ravel()[idx]
    g_i = maps.gamma_idler.ravel()[idx]
    g_s = maps.gamma_signal.ravel()[idx]
    ideal = qcore.closed_form_probabilities(t, g_i, g_s, s.pump_phase_rad, 1.0)
    for j, flat in enumerate(idx):
        obj = qcore.ObjectResponse(float(t[j]), float(g_i[j]))
        phi = s.pump_phase_rad - float(g_s[j])
        if s.idler_blocked:
            state = qcore.build_blocked_state(obj, phi)
            expect_g = 0.5
        else:
            state = qcore.build_joint_state(obj, phi)
            expect_g = float(np.asarray(ideal.p_g).ravel()[j])
        traced = qcore.detection_probabilities(state)
        if abs(traced.p_g - expect_g) > ORACLE_TOL or abs(traced.p_g + traced.p_h - 1.0) > ORACLE_TOL:
            raise RuntimeError(
                f"closed form disagrees with the trace oracle at pixel {flat}: "
                f"{traced.p_g} vs {expect_g}")


def simulate_outputs(s: Scenario, *, stream_base: int = 0, threads: int = 1,
                     noiseless: bool = False, oracle_check: bool = True):
    """Simulate both beam splitter outputs of one exposure.

    Returns (frame_g, frame_h).  In noiseless mode the frames carry the
    exact expected counts as floats; otherwise they are integer Poisson/
    read-noise realizations drawn on streams 2*stream_base (output g)
    and 2*stream_base + 1 (output h).
    """
    maps = effective_maps(s)
    if oracle_check:
        _trace_oracle_check(s, maps)
    mean_g = expected_counts(maps.p_g, maps.flux, s.camera)
    mean_h = expected_counts(maps.p_h, maps.flux, s.camera)
    if noiseless:
        frame_g = ImageFrame(counts=mean_g, label="G", scenario_id=s.name,
                             stream_id=2 * stream_base, config=s.camera)
        frame_h = ImageFrame(counts=mean_h, label="H", scenario_id=s.name,
                             stream_id=2 * stream_base + 1, config=s.camera)
        return frame_g, frame_h
    frame_g = sample_frame(mean_g, s.camera, 2 * stream_base, threads=threads,
                           label="G", scenario_id=s.name)
    frame_h = sample_frame(mean_h, s.camera, 2 * stream_base + 1, threads=threads,
                           label="H", scenario_id=s.name)
    return frame_g, frame_h


@dataclass(frozen=True)
class FringeData:
    """Counts at output g versus scanned pump phase."""

    phases: np.ndarray
    counts: np.ndarray
    shots_per_step: int = 1
    roi: str = ""

    def __post_init__(self):
        if len(self.phases) != len(self.counts):
            raise ValueError("phases and counts must align")
        if np.any(np.diff(self.phases) <= 0):
            raise ValueError("phases must be strictly increasing")


def roi_mask(s: Scenario, roi=None) -> np.ndarray:
    """Region of interest as a boolean mask.

    ``roi`` is (top, left, height, width) in pixels, or None for the
    default bucket-detector emulation: a centered disk of radius half
    the beam waist (clipped to the sensor).
    """
    rows, cols = s.geometry.rows, s.geometry.cols
    if roi is None:
        y_mm, x_mm = s.geometry.pixel_centers_mm()
        mask = (y_mm ** 2 + x_mm ** 2) <= (s.beam_waist_mm / 2.0) ** 2
        mask = np.broadcast_to(mask, (rows, cols)).copy()
    else:
        top, left, height, width = roi
        if height <= 0 or width <= 0:
            raise ScenarioError("ROI height and width must be positive")
        mask = np.zeros((rows, cols), dtype=bool)
        mask[max(0, top):top + height, max(0, left):left + width] = True
    if not mask.any():
        raise ScenarioError("ROI selects no pixels")
    return mask


def phase_scan(s: Scenario, steps: int, cycles: float = 1.0, roi=None, *,
               shots_per_step: int = 1, stream_base: int = 0, threads: int = 1,
               noiseless: bool = False, oracle_check: bool = True) -> FringeData:
    """Record ROI counts at output g while stepping the pump phase.

    The scan grid is ``steps`` uniform phases covering [0, 2*pi*cycles);
    at least 8 steps per cycle are required.  Each step re-runs the full
    per-pixel simulation at that pump phase.
    """
    if cycles <= 0:
        raise ScenarioError("cycles must be positive")
    if steps / cycles < 8:
        raise ScenarioError("need at least 8 phase steps per cycle")
    if shots_per_step < 1:
        raise ScenarioError("shots_per_step must be at least 1")
    mask = roi_mask(s, roi)
    phases = 2.0 * np.pi * cycles * np.arange(steps) / steps

    def step_total(k: int):
        scenario_k = replace(s, pump_phase_rad=float(phases[k]))
        total = 0.0
        for j in range(shots_per_step):
            base = stream_base + k * shots_per_step + j
            frame_g, _ = simulate_outputs(scenario_k, stream_base=base,
                                          threads=threads, noiseless=noiseless,
                                          oracle_check=oracle_check)
            total += frame_g.counts[mask].sum()
        return total

    totals = [step_total(k) for k in range(steps)]
    counts = np.asarray(totals)
    if not noiseless:
        counts = counts.astype(np.int64)
    roi_desc = "disk(r=waist/2)" if roi is None else f"rect{tuple(roi)}"
    return FringeData(phases=phases, counts=counts,
                      shots_per_step=shots_per_step, roi=roi_desc)


@dataclass(frozen=True)
class VisibilityFit:
    """Sinusoid fit counts = offset * (1 + visibility * cos(phase - phase0))."""

    offset: float
    amplitude: float
    phase: float
    visibility: float
    se_offset: float
    se_amplitude: float
    se_phase: float
    se_visibility: float

    @property
    def unphysical(self) -> bool:
        return self.offset <= 0 or self.visibility > 1.0


def fit_fringe(data: FringeData) -> VisibilityFit:
    """Least-squares sinusoid fit on the basis {1, cos phi, sin phi}.

    The normal equations are solved in closed form (no iterative
    optimizer); standard errors come from the residual covariance.
    """
    phi = np.asarray(data.phases, dtype=np.float64)
    y = np.asarray(data.counts, dtype=np.float64)
    if phi.size < 4:
        raise ValueError("need at least 4 points")
    span = phi.max() - phi.min()
    if span < 2.0 * np.pi * (1.0 - 1.0 / phi.size) - 1e-9:
        raise ValueError("scan must span at least one full cycle")
    design = np.column_stack([np.ones_like(phi), np.cos(phi), np.sin(phi)])
    gram = design.T @ design
    if np.linalg.matrix_rank(gram) < 3:
        raise ValueError("rank-deficient fringe fit (degenerate phase grid)")
    coef = np.linalg.solve(gram, design.T @ y)
    c0, c1, c2 = coef

    resid = y - design @ coef
    dof = phi.size - 3
    sigma_sq = float(resid @ resid / dof) if dof > 0 else 0.0
    cov = sigma_sq * np.linalg.inv(gram)

    amp = math.hypot(c1, c2)
    offset = float(c0)
    se_offset = math.sqrt(max(cov[0, 0], 0.0))
    if amp <= 1e-12 * max(abs(offset), 1.0):
        # flat fringe: report zero amplitude and a conventional zero phase
        amp, c1, c2 = 0.0, 0.0, 0.0
    if amp > 0.0:
        phase0 = math.atan2(c2, c1)
        g_amp = np.array([0.0, c1 / amp, c2 / amp])
        g_phase = np.array([0.0, -c2 / amp ** 2, c1 / amp ** 2])
        se_amp = math.sqrt(max(g_amp @ cov @ g_amp, 0.0))
        se_phase = math.sqrt(max(g_phase @ cov @ g_phase, 0.0))
    else:
        phase0 = 0.0
        se_amp = math.sqrt(max((cov[1, 1] + cov[2, 2]) / 2.0, 0.0))
        se_phase = float("nan")

    if offset > 0.0:
        vis = amp / offset
        if amp > 0.0:
            g_vis = np.array([-amp / offset ** 2, c1 / (offset * amp), c2 / (offset * amp)])
            se_vis = math.sqrt(max(g_vis @ cov @ g_vis, 0.0))
        else:
            se_vis = se_amp / offset
    else:
        vis = 0.0
        se_vis = float("nan")
    return VisibilityFit(offset=offset, amplitude=float(amp), phase=float(phase0),
                         visibility=float(vis), se_offset=se_offset,
                         se_amplitude=se_amp, se_phase=se_phase, se_visibility=se_vis)


def interaction_free_map(s: Scenario) -> np.ndarray:
    """Per-pixel probability of (output h AND idler click).

    A click pair at output h flags an opaque object pixel even though the
    detected photon never went near the object.  Runs in the idealized
    mode: unit setup visibility, zero pump phase, object in the idler
    path, idler detector efficiency > 0.
    """
    validate_scenario(s)
    eta = s.idler_detector_efficiency
    if eta <= 0.0:
        raise ScenarioError("interaction-free map needs idler detector efficiency > 0")
    if s.object_spec is None or s.object_spec.placement is not Placement.IDLER_PATH:
        raise ScenarioError("interaction-free map needs an object in the idler path")
    if s.pump_phase_rad != 0.0:
        raise ScenarioError("interaction-free map is defined at zero pump phase")
    if s.setup_visibility != 1.0:
        raise ScenarioError("interaction-free map runs at unit setup visibility")
    if s.idler_blocked:
        raise ScenarioError("interaction-free map needs the idler path open")
    maps = effective_maps(s)
    branch = maps.transmittance * np.exp(1j * maps.gamma_idler) - 1.0
    return eta * np.abs(branch) ** 2 / 4.0


@dataclass(frozen=True)
class EmissionSample:
    """One blocked/unblocked rate comparison at a given pump power."""

    power_mw: float
    blocked: float
    unblocked: float

    @property
    def ratio(self) -> float:
        if self.unblocked == 0:
            return float("nan")
        return self.blocked / self.unblocked


def induced_emission_check(s: Scenario, powers, *, repeats: int = 1,
                           noiseless: bool = False,
                           stream_base: int = 0) -> list[EmissionSample]:
    """Compare crystal-2 count totals with the inter-crystal path blocked.

    In the spontaneous pair-generation regime the crystal-2 rate cannot
    depend on whether idler light from crystal 1 reaches it, so the
    expected blocked/unblocked ratio is exactly 1 at every pump power and
    the slope of ratio versus power is 0.  Sampled mode adds Poisson
    noise; ``repeats`` controls how many samples per power are drawn.
    """
    validate_scenario(s)
    powers = [float(p) for p in powers]
    if not powers:
        raise ScenarioError("need at least one pump power")
    if any(p <= 0 for p in powers):
        raise ScenarioError("pump powers must be positive")
    if repeats < 1:
        raise ScenarioError("repeats must be at least 1")

    base_flux_total = float(gaussian_envelope(s.geometry, s.beam_waist_mm,
                                              PEAK_RATE_REFERENCE).sum())
    qe, gain = s.camera.quantum_efficiency, s.camera.em_gain
    # one crystal contributes half the total signal flux
    lam = np.array([0.5 * qe * base_flux_total * p / REFERENCE_PUMP_MW
                    for p in powers for _ in range(2 * repeats)])
    if noiseless:
        electrons = lam
    else:
        stream = CounterStream(s.camera.rng_seed, stream_base)
        cells = np.arange(lam.size, dtype=np.uint64)
        electrons = stream.poisson(lam, cells).astype(np.float64)
    counts = gain * electrons

    out = []
    pos = 0
    for p in powers:
        for _ in range(repeats):
            blocked, unblocked = counts[pos], counts[pos + 1]
            pos += 2
            out.append(EmissionSample(power_mw=p, blocked=float(blocked),
                                      unblocked=float(unblocked)))
    return out
