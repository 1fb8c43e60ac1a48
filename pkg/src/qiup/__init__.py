"""Simulator of an imaging interferometer whose probe beam is never detected.

Two coherently pumped down-conversion crystals share one idler mode; an
object placed in that shared, undetected beam shows up in the
interference of the detected signal beams.  The package models the exact
few-mode quantum state, the physical optics layer (phase objects,
magnification, coherence budget), an EMCCD camera with reproducible
counter-based noise, and the canned experiments on top.
"""

from .camera import CameraConfig, ImageFrame, combine_frames, expected_counts, sample_frame
from .optics import (ImagingGeometry, IndexTable, ObjectMap, PhaseObjectSpec,
                     Placement, WavelengthTriple, coherence_length,
                     energy_conservation_residual, etch_depth_for_phase, etch_phase,
                     gaussian_envelope, load_phase_object, magnification,
                     mismatch_visibility_factor, rasterize_phase_object,
                     remap_object_to_camera)
from .pipeline import (FringeData, Scenario, ScenarioError, VisibilityFit,
                       effective_maps, effective_visibility, fit_fringe,
                       induced_emission_check, interaction_free_map, phase_scan,
                       simulate_outputs, validate_scenario)
from .qcore import (CoincidenceTable, JointState, Mode, ObjectResponse, ProbPair,
                    build_blocked_state, build_joint_state, closed_form_probabilities,
                    coincidence_table, detection_probabilities, signal_coherence)
from .scenarios import (PRESET_NAMES, build_scenario, builtin_object, builtin_rasters,
                        load_scenario, save_scenario, scenario_from_dict,
                        scenario_to_dict)

__version__ = "0.1.0"
