import json
import math

import numpy as np
import pytest

from qiup import pgm, pipeline
from qiup.camera import combine_frames
from qiup.optics import Placement
from qiup.pipeline import ScenarioError, effective_maps, simulate_outputs, validate_scenario
from qiup.scenarios import (PRESET_NAMES, SILICA_ETCH_DEPTH_NM, build_scenario,
                            builtin_object, builtin_rasters, load_scenario,
                            save_scenario, scenario_from_dict, scenario_to_dict)

SMALL = {"geometry": {"rows": 32, "cols": 32}}
# same 4.1 mm field of view as the stock 256-pixel sensor, on a coarse grid
WIDE_FOV = {"geometry": {"rows": 32, "cols": 32, "pixel_pitch_um": 128.0},
            "camera": {"pixel_pitch_um": 128.0}}


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_every_preset_is_valid(name):
    s = build_scenario(name)
    validate_scenario(s)
    assert s.name == name


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_every_preset_roundtrips_through_json(name):
    s = build_scenario(name)
    doc = scenario_to_dict(s)
    again = scenario_from_dict(doc)
    assert scenario_to_dict(again) == doc
    # rebuilt scenario behaves identically where it matters
    assert again.wavelengths == s.wavelengths
    assert again.idler_blocked == s.idler_blocked
    assert again.builtin_object == s.builtin_object
    if s.object_spec is not None:
        assert np.array_equal(again.object_spec.depth_nm, s.object_spec.depth_nm)
        assert again.object_spec.placement == s.object_spec.placement


def test_save_and_load_file(tmp_path):
    s = build_scenario("silicon_cat", {"camera": {"rng_seed": 11}})
    path = tmp_path / "cat.json"
    save_scenario(s, path)
    again = load_scenario(path)
    assert scenario_to_dict(again) == scenario_to_dict(s)
    assert again.camera.rng_seed == 11


def test_presets_use_expected_wavelengths():
    assert build_scenario("no_object").wavelengths.idler_nm == 1550.0
    silica = build_scenario("silica_psi_idler")
    assert (silica.wavelengths.signal_nm, silica.wavelengths.idler_nm) == (820.0, 1515.0)


def test_interaction_free_preset_is_idealized():
    s = build_scenario("interaction_free")
    assert s.setup_visibility == 1.0
    assert s.idler_detector_efficiency == 1.0
    assert s.object_spec.placement is Placement.IDLER_PATH


class TestBuiltinRasters:
    def test_deterministic(self):
        a_depth, a_mask = builtin_rasters("silicon_cat")
        b_depth, b_mask = builtin_rasters("silicon_cat")
        assert np.array_equal(a_depth, b_depth)
        assert a_mask is None and b_mask is None

    def test_cat_has_exactly_two_depth_levels(self):
        depth, _ = builtin_rasters("silicon_cat")
        assert set(np.unique(depth)) == {0.0, 310.0}

    def test_cat_is_three_mm_tall(self):
        depth, _ = builtin_rasters("silicon_cat")
        rows = np.flatnonzero(depth.any(axis=1))
        extent_mm = (rows[-1] - rows[0] + 1) * 8e-3
        assert extent_mm == pytest.approx(3.0, abs=0.02)

    def test_cardboard_is_binary(self):
        depth, mask = builtin_rasters("cardboard_cutout")
        assert not depth.any()
        assert set(np.unique(mask)) == {0.0, 1.0}

    def test_psi_etched_fraction_band(self):
        depth, _ = builtin_rasters("silica_psi")
        fraction = np.mean(depth > 0)
        assert 0.05 <= fraction <= 0.50
        assert set(np.unique(depth)) == {0.0, SILICA_ETCH_DEPTH_NM}

    def test_unknown_raster_rejected(self):
        with pytest.raises(ScenarioError):
            builtin_rasters("teapot")


def test_silicon_cat_phase_step_on_camera():
    s = build_scenario("silicon_cat", WIDE_FOV)
    maps = effective_maps(s)
    step = 0.992 * math.pi
    etched = np.isclose(maps.gamma_idler, step, atol=1e-6)
    flat = np.isclose(maps.gamma_idler, 0.0, atol=1e-6)
    assert etched.any() and flat.any()
    # away from interpolated boundaries everything sits on the two levels
    assert (etched | flat).mean() > 0.9


def test_silicon_cat_regions_land_on_opposite_fringe_extremes():
    s = build_scenario("silicon_cat", WIDE_FOV)
    maps = effective_maps(s)
    frame_g, frame_h = simulate_outputs(s, noiseless=True)
    diff = combine_frames(frame_g, frame_h, "diff")
    etched = np.isclose(maps.gamma_idler, 0.992 * math.pi, atol=1e-6)
    flat = np.isclose(maps.gamma_idler, 0.0, atol=1e-6)
    assert diff[flat].mean() > 0
    assert diff[etched].mean() < 0


def test_no_object_ideal_h_port_is_dark():
    s = build_scenario("no_object", {**SMALL, "setup_visibility": 1.0})
    _, frame_h = simulate_outputs(s, noiseless=True)
    assert np.allclose(frame_h.counts, 0.0, atol=1e-9)


def test_signal_path_glyph_is_invisible():
    psi = build_scenario("silica_psi_signal", SMALL)
    bare = build_scenario("no_object", {**SMALL, "wavelengths_nm":
                                        {"pump": 532.0, "signal": 820.0, "idler": 1515.0}})
    frames_psi = simulate_outputs(psi, noiseless=True)
    frames_bare = simulate_outputs(bare, noiseless=True)
    for a, b in zip(frames_psi, frames_bare):
        assert np.max(np.abs(a.counts - b.counts)) < 1e-9


def test_idler_path_glyph_is_visible():
    s = build_scenario("silica_psi_idler", SMALL)
    frame_g, frame_h = simulate_outputs(s, noiseless=True)
    diff = combine_frames(frame_g, frame_h, "diff")
    assert diff.min() < 0 < diff.max()


def test_overrides_reach_the_scenario():
    s = build_scenario("no_object", {"pump_power_mw": 75.0,
                                     "camera": {"rng_seed": 42}})
    assert s.pump_power_mw == 75.0
    assert s.camera.rng_seed == 42
    assert s.camera.em_gain == 20.0  # untouched sibling key survives


def test_unknown_preset_and_bad_override():
    with pytest.raises(ScenarioError, match="teapot"):
        build_scenario("teapot")
    with pytest.raises(ScenarioError):
        build_scenario("no_object", {"setup_visibility": 2.0})
    with pytest.raises(ScenarioError):
        build_scenario("no_object", {"geometry": {"rows": 0}})
    with pytest.raises(ScenarioError, match="unknown scenario keys"):
        scenario_from_dict({"volume": 11})


def test_external_objects_cannot_be_serialized_by_name(tmp_path):
    depth = np.zeros((8, 8))
    pgm.write_pgm16(tmp_path / "depth.pgm", depth)
    doc = {"pitch_um": 8.0, "depth_map_pgm": "depth.pgm",
           "depth_scale_nm_per_level": 1.0,
           "index_table": [[400.0, 1.5], [2000.0, 1.5]], "placement": "idler"}
    scenario_doc = {"name": "ext", "object": doc}
    s = scenario_from_dict(scenario_doc, base_dir=tmp_path)
    assert s.object_spec is not None and s.builtin_object is None
    with pytest.raises(ScenarioError, match="external"):
        scenario_to_dict(s)


def test_inline_object_scenario_runs(tmp_path):
    mask = np.full((64, 64), 65535.0)
    mask[:32] = 0.0
    pgm.write_pgm16(tmp_path / "mask.pgm", mask)
    pgm.write_pgm16(tmp_path / "depth.pgm", np.zeros((64, 64)))
    doc = {
        "name": "half-mask",
        "geometry": {"rows": 16, "cols": 16},
        "object": {"pitch_um": 32.0, "depth_map_pgm": "depth.pgm",
                   "depth_scale_nm_per_level": 1.0,
                   "index_table": [[400.0, 1.5], [2000.0, 1.5]],
                   "amplitude_mask_pgm": "mask.pgm", "placement": "idler"},
    }
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(doc))
    s = load_scenario(path)
    maps = pipeline.effective_maps(s)
    assert maps.transmittance.min() == 0.0
    assert maps.transmittance.max() == 1.0


def test_builtin_object_placements():
    idler = builtin_object("silica_psi", Placement.IDLER_PATH)
    signal = builtin_object("silica_psi", Placement.SIGNAL_PATH)
    assert idler.placement is Placement.IDLER_PATH
    assert signal.placement is Placement.SIGNAL_PATH
    assert np.array_equal(idler.depth_nm, signal.depth_nm)
