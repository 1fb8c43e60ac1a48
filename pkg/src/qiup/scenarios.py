"""Canned experiment presets and the JSON scenario format.

Each preset expands into a fully populated
:class:`~qiup.pipeline.Scenario`, so every headline configuration of the
instrument is reproducible from one name: the bare interferometer, the
cardboard cut-out, the etched silicon cat, the etched fused-silica psi
in either beam, the blocked-path control, the interaction-free imaging
mode, and the stimulated-emission null check.

The object artwork is procedurally generated stand-in geometry; the
physics only cares that the rasters have the right depth levels, feature
scale (3 mm tall) and sampling pitch.
"""

from __future__ import annotations

import json
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .camera import CameraConfig
from .optics import (BUILTIN_INDEX_TABLES, ImagingGeometry, IndexTable,
                     PhaseObjectSpec, Placement, WavelengthTriple,
                     etch_depth_for_phase, phase_object_from_dict)
from .pipeline import Scenario, ScenarioError, validate_scenario

OBJECT_PITCH_UM = 8.0          # half the camera pitch: no undersampling
OBJECT_GRID = 520              # 4.16 mm square object plane

SILICON_ETCH_DEPTH_NM = 310.0
# Full-turn step at the shorter wavelength: the glyph is exactly invisible
# in the detected beam while showing close to a half-turn step to the probe.
SILICA_ETCH_DEPTH_NM = etch_depth_for_phase(2.0 * np.pi,
                                            BUILTIN_INDEX_TABLES["silica"](820.0),
                                            820.0)

CARD_INDEX = IndexTable([(400.0, 1.5), (2000.0, 1.5)])

PRESET_NAMES = (
    "no_object",
    "cardboard_cutout",
    "silicon_cat",
    "silica_psi_idler",
    "silica_psi_signal",
    "blocked_control",
    "interaction_free",
    "induced_emission_check",
)

BUILTIN_OBJECT_NAMES = ("cardboard_cutout", "silicon_cat", "silica_psi")


def _object_grid_mm():
    half = OBJECT_GRID * OBJECT_PITCH_UM * 1e-3 / 2.0
    c = (np.arange(OBJECT_GRID) + 0.5) * OBJECT_PITCH_UM * 1e-3 - half
    return c[:, None], c[None, :]


def _triangle_mask(y, x, v0, v1, v2):
    def side(p, q):
        return (q[0] - p[0]) * (x - p[1]) - (q[1] - p[1]) * (y - p[0])

    d0, d1, d2 = side(v0, v1), side(v1, v2), side(v2, v0)
    return ((d0 >= 0) & (d1 >= 0) & (d2 >= 0)) | ((d0 <= 0) & (d1 <= 0) & (d2 <= 0))


def _cat_silhouette():
    """Filled cat-ish blob, exactly 3 mm from ear tips to belly."""
    y, x = _object_grid_mm()
    body = (x / 0.85) ** 2 + ((y - 0.55) / 0.95) ** 2 <= 1.0
    head = x ** 2 + (y + 0.62) ** 2 <= 0.48 ** 2
    ear_l = _triangle_mask(y, x, (-0.95, -0.42), (-1.02, -0.05), (-1.50, -0.33))
    ear_r = _triangle_mask(y, x, (-0.95, 0.42), (-1.02, 0.05), (-1.50, 0.33))
    tail = (np.abs(np.hypot(x - 1.15, y - 0.35) - 0.5) <= 0.11) & (x >= 1.05)
    return body | head | ear_l | ear_r | tail


def _psi_glyph():
    """Stroked psi: a full-height stem and an open bowl, 3 mm tall."""
    y, x = _object_grid_mm()
    stem = (np.abs(x) <= 0.15) & (np.abs(y) <= 1.5)
    theta = np.linspace(0.0, np.pi, 600)
    bowl_pts = np.column_stack([-1.2 + 1.55 * np.sin(theta), 0.75 * np.cos(theta)])
    yy, xx = np.broadcast_arrays(y, x)
    dist, _ = cKDTree(bowl_pts).query(np.column_stack([yy.ravel(), xx.ravel()]))
    bowl = dist.reshape(OBJECT_GRID, OBJECT_GRID) <= 0.15
    return stem | bowl


def _letter_cutout():
    """Block letters "UP" cut out of an opaque card, 3 mm tall."""
    y, x = _object_grid_mm()

    def rect(x0, x1, y0, y1):
        return (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)

    u = (rect(-1.7, -1.35, -1.5, 1.15) | rect(-0.55, -0.2, -1.5, 1.15)
         | rect(-1.7, -0.2, 1.15, 1.5))
    p = (rect(0.2, 0.55, -1.5, 1.5) | rect(0.2, 1.7, -1.5, -1.15)
         | rect(1.35, 1.7, -1.5, 0.0) | rect(0.2, 1.7, -0.35, 0.0))
    return u | p


@lru_cache(maxsize=None)
def builtin_rasters(name: str):
    """Deterministic (depth_nm, amplitude_mask) grids for a builtin object."""
    if name == "silicon_cat":
        depth = np.where(_cat_silhouette(), SILICON_ETCH_DEPTH_NM, 0.0)
        return depth, None
    if name == "silica_psi":
        depth = np.where(_psi_glyph(), SILICA_ETCH_DEPTH_NM, 0.0)
        return depth, None
    if name == "cardboard_cutout":
        mask = _letter_cutout().astype(np.float64)
        return np.zeros_like(mask), mask
    raise ScenarioError(f"unknown builtin object {name!r}")


def builtin_object(name: str, placement: Placement) -> PhaseObjectSpec:
    depth, mask = builtin_rasters(name)
    table = {"silicon_cat": BUILTIN_INDEX_TABLES["silicon"],
             "silica_psi": BUILTIN_INDEX_TABLES["silica"],
             "cardboard_cutout": CARD_INDEX}[name]
    return PhaseObjectSpec(depth_nm=depth, pitch_um=OBJECT_PITCH_UM,
                           index_table=table, amplitude_mask=mask,
                           placement=placement)


def _preset_dict(name: str) -> dict:
    base = {
        "name": name,
        "wavelengths_nm": {"pump": 532.0, "signal": 810.0, "idler": 1550.0},
        "geometry": {"f1_mm": 75.0, "f2_mm": 150.0, "pixel_pitch_um": 16.0,
                     "rows": 256, "cols": 256},
        "object": None,
        "idler_blocked": False,
        "pump_phase_rad": 0.0,
        "setup_visibility": 0.77,
        "path_mismatch_mm": 0.0,
        "filter_bandwidth_nm": 3.0,
        "beam_waist_mm": 1.5,
        "pump_power_mw": 150.0,
        "idler_detector_efficiency": 0.0,
        "camera": {"pixel_pitch_um": 16.0, "exposure_s": 0.5, "em_gain": 20.0,
                   "quantum_efficiency": 0.7, "read_noise_sigma": None,
                   "dark_rate": 0.0, "rng_seed": 0},
    }
    if name == "no_object" or name == "induced_emission_check":
        pass
    elif name == "cardboard_cutout":
        base["object"] = {"builtin": "cardboard_cutout", "placement": "idler"}
    elif name == "silicon_cat":
        base["object"] = {"builtin": "silicon_cat", "placement": "idler"}
    elif name in ("silica_psi_idler", "silica_psi_signal"):
        base["wavelengths_nm"] = {"pump": 532.0, "signal": 820.0, "idler": 1515.0}
        where = "idler" if name.endswith("idler") else "signal"
        base["object"] = {"builtin": "silica_psi", "placement": where}
    elif name == "blocked_control":
        base["idler_blocked"] = True
    elif name == "interaction_free":
        base["object"] = {"builtin": "cardboard_cutout", "placement": "idler"}
        base["idler_detector_efficiency"] = 1.0
        base["setup_visibility"] = 1.0
    else:
        raise ScenarioError(f"unknown preset {name!r}")
    return base


def _deep_update(base: dict, overrides: dict) -> dict:
    out = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_update(out[key], value)
        else:
            out[key] = value
    return out


def build_scenario(name: str, overrides: dict | None = None) -> Scenario:
    """Expand a preset name (plus optional overrides) into a Scenario."""
    doc = _preset_dict(name)
    if overrides:
        doc = _deep_update(doc, overrides)
    return scenario_from_dict(doc)


_SCENARIO_KEYS = {"name", "wavelengths_nm", "geometry", "object", "idler_blocked",
                  "pump_phase_rad", "setup_visibility", "path_mismatch_mm",
                  "filter_bandwidth_nm", "beam_waist_mm", "pump_power_mw",
                  "idler_detector_efficiency", "camera"}


def scenario_from_dict(doc: dict, base_dir=".") -> Scenario:
    """Parse the JSON scenario format (see README) into a Scenario."""
    unknown = doc.keys() - _SCENARIO_KEYS
    if unknown:
        raise ScenarioError(f"unknown scenario keys {sorted(unknown)}")
    try:
        w = doc.get("wavelengths_nm", {})
        wavelengths = WavelengthTriple(pump_nm=float(w.get("pump", 532.0)),
                                       signal_nm=float(w.get("signal", 810.0)),
                                       idler_nm=float(w.get("idler", 1550.0)))
        g = doc.get("geometry", {})
        geometry = ImagingGeometry(f1_mm=float(g.get("f1_mm", 75.0)),
                                   f2_mm=float(g.get("f2_mm", 150.0)),
                                   pixel_pitch_um=float(g.get("pixel_pitch_um", 16.0)),
                                   rows=int(g.get("rows", 256)),
                                   cols=int(g.get("cols", 256)))
        c = doc.get("camera", {})
        rn = c.get("read_noise_sigma", None)
        camera = CameraConfig(pixel_pitch_um=float(c.get("pixel_pitch_um", 16.0)),
                              exposure_s=float(c.get("exposure_s", 0.5)),
                              em_gain=float(c.get("em_gain", 20.0)),
                              quantum_efficiency=float(c.get("quantum_efficiency", 0.7)),
                              read_noise_sigma=None if rn is None else float(rn),
                              dark_rate=float(c.get("dark_rate", 0.0)),
                              rng_seed=int(c.get("rng_seed", 0)))

        obj_doc = doc.get("object")
        spec = None
        builtin = None
        if obj_doc is not None:
            if "builtin" in obj_doc:
                builtin = obj_doc["builtin"]
                placement = Placement(obj_doc.get("placement", "idler"))
                spec = builtin_object(builtin, placement)
            else:
                spec = phase_object_from_dict(obj_doc, base_dir)

        scenario = Scenario(
            wavelengths=wavelengths,
            geometry=geometry,
            object_spec=spec,
            builtin_object=builtin,
            idler_blocked=bool(doc.get("idler_blocked", False)),
            pump_phase_rad=float(doc.get("pump_phase_rad", 0.0)),
            setup_visibility=float(doc.get("setup_visibility", 0.77)),
            path_mismatch_mm=float(doc.get("path_mismatch_mm", 0.0)),
            filter_bandwidth_nm=float(doc.get("filter_bandwidth_nm", 3.0)),
            beam_waist_mm=float(doc.get("beam_waist_mm", 1.5)),
            pump_power_mw=float(doc.get("pump_power_mw", 150.0)),
            idler_detector_efficiency=float(doc.get("idler_detector_efficiency", 0.0)),
            camera=camera,
            name=str(doc.get("name", "custom")),
        )
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"bad scenario document: {exc}") from exc
    validate_scenario(scenario)
    return scenario


def scenario_to_dict(s: Scenario) -> dict:
    """Serialize a Scenario to the JSON scenario format.

    Builtin objects round-trip by name; externally loaded objects cannot
    be re-embedded (their rasters live in PGM files) and are rejected.
    """
    if s.object_spec is not None and s.builtin_object is None:
        raise ScenarioError("only builtin objects can be serialized by name; "
                            "keep external objects in their own JSON document")
    obj_doc = None
    if s.builtin_object is not None:
        obj_doc = {"builtin": s.builtin_object,
                   "placement": s.object_spec.placement.value}
    return {
        "name": s.name,
        "wavelengths_nm": {"pump": s.wavelengths.pump_nm,
                           "signal": s.wavelengths.signal_nm,
                           "idler": s.wavelengths.idler_nm},
        "geometry": {"f1_mm": s.geometry.f1_mm, "f2_mm": s.geometry.f2_mm,
                     "pixel_pitch_um": s.geometry.pixel_pitch_um,
                     "rows": s.geometry.rows, "cols": s.geometry.cols},
        "object": obj_doc,
        "idler_blocked": s.idler_blocked,
        "pump_phase_rad": s.pump_phase_rad,
        "setup_visibility": s.setup_visibility,
        "path_mismatch_mm": s.path_mismatch_mm,
        "filter_bandwidth_nm": s.filter_bandwidth_nm,
        "beam_waist_mm": s.beam_waist_mm,
        "pump_power_mw": s.pump_power_mw,
        "idler_detector_efficiency": s.idler_detector_efficiency,
        "camera": {"pixel_pitch_um": s.camera.pixel_pitch_um,
                   "exposure_s": s.camera.exposure_s,
                   "em_gain": s.camera.em_gain,
                   "quantum_efficiency": s.camera.quantum_efficiency,
                   "read_noise_sigma": s.camera.read_noise_sigma,
                   "dark_rate": s.camera.dark_rate,
                   "rng_seed": s.camera.rng_seed},
    }


def load_scenario(path) -> Scenario:
    """Load a scenario JSON file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})") from exc
    return scenario_from_dict(doc, base_dir=path.parent)


def save_scenario(s: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(s), indent=2) + "\n")
