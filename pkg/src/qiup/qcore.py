"""Exact few-mode model of the two-crystal induced-coherence interferometer.

One signal/idler pair lives in a seven-mode space: the signal is created
in mode c (crystal 1) or e (crystal 2) and detected in g or h behind the
output beam splitter; the idler is either transmitted through the object
into the shared mode f or scattered into a single sink mode w.  An object
of amplitude transmittance T and phase gamma in the crystal-1 idler path
produces the joint state

    (1/sqrt(2)) [ T e^{i gamma} |c,f> + e^{-i phi} |e,f>
                  + sqrt(1 - T^2) |c,w> ]

where phi is the relative pump phase between the two crystals.  Tracing
out the idler after a 50:50 recombination of c and e gives single-photon
detection probabilities

    P_{g/h} = (1/2) [1 +/- T cos(gamma + phi)]

so the fringe visibility seen in the *detected* beam equals the
transmittance experienced by the *undetected* beam, and the idler phase
appears in the signal fringes.  Everything in this module is a pure
function of its inputs.

Conventions fixed project wide:

* beam splitter: |c> -> (|g> + |h>)/sqrt(2), |e> -> (|g> - |h>)/sqrt(2);
* interference argument: gamma_idler - gamma_signal + pump_phase;
* all phases are canonicalized to [0, 2*pi).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

TWO_PI = 2.0 * math.pi

NORM_TOL = 1e-9


class Mode(Enum):
    """Photon mode labels; the _S/_I suffix separates signal from idler."""

    C_S = "c_s"
    E_S = "e_s"
    G_S = "g_s"
    H_S = "h_s"
    D_I = "d_i"
    F_I = "f_i"
    W_I = "w_i"


SIGNAL_MODES = frozenset({Mode.C_S, Mode.E_S, Mode.G_S, Mode.H_S})
IDLER_MODES = frozenset({Mode.D_I, Mode.F_I, Mode.W_I})


def canonical_phase(phase: float) -> float:
    """Map a phase in radians onto [0, 2*pi)."""
    out = math.fmod(phase, TWO_PI)
    if out < 0.0:
        out += TWO_PI
    return out if out < TWO_PI else 0.0


@dataclass(frozen=True)
class ObjectResponse:
    """Amplitude transmittance T in [0, 1] and imparted phase in radians."""

    transmittance: float
    phase: float = 0.0

    def __post_init__(self):
        t = self.transmittance
        if not (math.isfinite(t) and 0.0 <= t <= 1.0):
            raise ValueError(f"transmittance must be in [0, 1], got {t}")
        if not math.isfinite(self.phase):
            raise ValueError("phase must be finite")
        object.__setattr__(self, "phase", canonical_phase(self.phase))


@dataclass(frozen=True)
class ProbPair:
    """Detection probabilities at the two beam splitter outputs."""

    p_g: float
    p_h: float

    def as_tuple(self):
        return (self.p_g, self.p_h)


@dataclass(frozen=True)
class CoincidenceTable:
    """Joint probabilities of signal output x idler-detector click.

    The idler detector watches the shared mode f only; photons in the
    sink mode w never trigger it.
    """

    p_g_click: float
    p_g_noclick: float
    p_h_click: float
    p_h_noclick: float

    def total(self) -> float:
        return self.p_g_click + self.p_g_noclick + self.p_h_click + self.p_h_noclick

    def signal_marginals(self) -> ProbPair:
        return ProbPair(self.p_g_click + self.p_g_noclick,
                        self.p_h_click + self.p_h_noclick)


@dataclass(frozen=True)
class JointState:
    """Normalized amplitude table over (signal mode, idler mode) pairs."""

    amplitudes: dict = field(repr=False)
    pump_phase: float = 0.0
    blocked: bool = False

    def __post_init__(self):
        for (s, i), amp in self.amplitudes.items():
            if s not in SIGNAL_MODES or i not in IDLER_MODES:
                raise ValueError(f"bad mode pair {(s, i)}")
            if not (math.isfinite(amp.real) and math.isfinite(amp.imag)):
                raise ValueError("amplitudes must be finite")

    def norm_sq(self) -> float:
        return sum(abs(a) ** 2 for a in self.amplitudes.values())

    def amplitude(self, signal: Mode, idler: Mode) -> complex:
        return self.amplitudes.get((signal, idler), 0j)


def build_joint_state(obj: ObjectResponse, pump_phase: float = 0.0) -> JointState:
    """Joint signal/idler state behind the second crystal.

    The transmitted branch carries the object response T e^{i gamma}, the
    crystal-2 branch carries e^{-i phi} (attaching the relative pump phase
    to that branch keeps the interference argument at gamma + phi), and
    the non-transmitted idler amplitude sits in the sink mode w.
    """
    t = obj.transmittance
    gamma = obj.phase
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    amps = {
        (Mode.C_S, Mode.F_I): t * cmath.exp(1j * gamma) * inv_sqrt2,
        (Mode.E_S, Mode.F_I): cmath.exp(-1j * pump_phase) * inv_sqrt2,
        (Mode.C_S, Mode.W_I): math.sqrt(max(0.0, 1.0 - t * t)) * inv_sqrt2,
        (Mode.E_S, Mode.W_I): 0j,
    }
    return JointState(amplitudes=amps, pump_phase=pump_phase, blocked=False)


def build_blocked_state(obj: ObjectResponse, pump_phase: float = 0.0) -> JointState:
    """State with the idler path between the crystals fully blocked.

    All crystal-1 idler amplitude is routed into the sink mode w, so no
    coherence between the c and e branches survives the idler trace-out,
    whatever the object looks like.
    """
    del obj  # validated by the caller; blocking erases its influence
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    amps = {
        (Mode.C_S, Mode.F_I): 0j,
        (Mode.E_S, Mode.F_I): cmath.exp(-1j * pump_phase) * inv_sqrt2,
        (Mode.C_S, Mode.W_I): complex(inv_sqrt2),
        (Mode.E_S, Mode.W_I): 0j,
    }
    return JointState(amplitudes=amps, pump_phase=pump_phase, blocked=True)


def _require_normalized(state: JointState):
    dev = abs(state.norm_sq() - 1.0)
    if dev > NORM_TOL:
        raise ValueError(f"state is not normalized (|norm^2 - 1| = {dev:.3e})")


def _output_amplitudes(state: JointState):
    """Apply the 50:50 recombination to the c/e branches.

    Returns {(output, idler): amplitude} with output in {G_S, H_S}.
    """
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    out = {}
    for idler in (Mode.D_I, Mode.F_I, Mode.W_I):
        c = state.amplitude(Mode.C_S, idler)
        e = state.amplitude(Mode.E_S, idler)
        if c == 0j and e == 0j:
            continue
        out[(Mode.G_S, idler)] = (c + e) * inv_sqrt2
        out[(Mode.H_S, idler)] = (c - e) * inv_sqrt2
    return out


def detection_probabilities(state: JointState) -> ProbPair:
    """Single-photon probabilities at the two outputs, idler traced out."""
    _require_normalized(state)
    out = _output_amplitudes(state)
    p_g = sum(abs(a) ** 2 for (o, _), a in out.items() if o is Mode.G_S)
    p_h = sum(abs(a) ** 2 for (o, _), a in out.items() if o is Mode.H_S)
    return ProbPair(p_g, p_h)


def closed_form_probabilities(transmittance, gamma_idler, gamma_signal=0.0,
                              pump_phase=0.0, setup_visibility=1.0) -> ProbPair:
    """Closed-form output probabilities, broadcasting over array inputs.

        P_{g/h} = 1/2 [1 +/- v0 T cos(gamma_idler - gamma_signal + phi)]

    ``setup_visibility`` multiplies the interference term and models
    losses and imperfect idler alignment; 1 is the ideal instrument.
    This must agree with :func:`detection_probabilities` exactly at
    setup_visibility=1 and gamma_signal=0.
    """
    t = np.asarray(transmittance, dtype=np.float64)
    v0 = np.asarray(setup_visibility, dtype=np.float64)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError("transmittance must be in [0, 1]")
    if np.any(v0 < 0.0) or np.any(v0 > 1.0):
        raise ValueError("setup_visibility must be in [0, 1]")
    arg = np.asarray(gamma_idler, dtype=np.float64) - gamma_signal + pump_phase
    fringe = 0.5 * v0 * t * np.cos(arg)
    p_g = 0.5 + fringe
    p_h = 0.5 - fringe
    if p_g.ndim == 0:
        return ProbPair(float(p_g), float(p_h))
    return ProbPair(p_g, p_h)


def coincidence_table(state: JointState, idler_efficiency: float) -> CoincidenceTable:
    """Joint statistics of signal output and idler-detector click.

    A photon in the shared idler mode f fires the detector with
    probability ``idler_efficiency``; the sink mode never does.
    """
    eta = idler_efficiency
    if not (0.0 <= eta <= 1.0):
        raise ValueError(f"idler efficiency must be in [0, 1], got {eta}")
    _require_normalized(state)
    out = _output_amplitudes(state)
    probs = {}
    for output in (Mode.G_S, Mode.H_S):
        clickable = abs(out.get((output, Mode.F_I), 0j)) ** 2
        silent = sum(abs(out.get((output, idler), 0j)) ** 2
                     for idler in (Mode.D_I, Mode.W_I))
        probs[(output, True)] = eta * clickable
        probs[(output, False)] = (1.0 - eta) * clickable + silent
    return CoincidenceTable(
        p_g_click=probs[(Mode.G_S, True)],
        p_g_noclick=probs[(Mode.G_S, False)],
        p_h_click=probs[(Mode.H_S, True)],
        p_h_noclick=probs[(Mode.H_S, False)],
    )


def signal_coherence(state: JointState) -> complex:
    """Off-diagonal element of the reduced signal state, times two.

    The magnitude equals the ideal fringe visibility: T for an unblocked
    state built from an object of transmittance T, and 0 for a blocked
    state.  The argument is the phase of the fringe pattern.
    """
    _require_normalized(state)
    rho_ce = sum(state.amplitude(Mode.C_S, idler)
                 * state.amplitude(Mode.E_S, idler).conjugate()
                 for idler in (Mode.D_I, Mode.F_I, Mode.W_I))
    return 2.0 * rho_ce
