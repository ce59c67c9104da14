"""Quasi-static pull-out model.

Extraction force follows a binding-amplified friction law

    F_pull = mu_fit * F_n * (1 + k_bind * tan(theta_eff))

where ``theta_eff`` is the misalignment left after the fixture absorbs up to
its compliance cap.  Discrete failure mechanisms (locking tab, deformable
lead, missing membrane contact) are gates evaluated before the force checks.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .geometry import Polygon, Pose2
from .jig import FULL_PRESSURE, FixtureKind, FixtureModel, ShellJig, contact_area_fraction

PROTOCOL_DEVIATIONS_DEG = (0, 5, 10, 15, 20, 25)
TRACE_SAMPLES = 100
RAMP_FRACTION = 0.3
DROP_SAMPLES = 5
CONTACT_THRESHOLD = 0.5


class FailureMode(str, enum.Enum):
    NONE = "None"
    GRIP_SLIP = "GripSlip"
    FIXTURE_ESCAPE = "FixtureEscape"
    LOCK_NOT_RELEASED = "LockNotReleased"
    LEAD_BENT = "LeadBent"
    NO_CONTACT = "NoContact"


@dataclass(frozen=True)
class PulloutScenario:
    """Extraction task parameters (forces in N, lengths in mm, angles in rad)."""

    name: str
    fit_preload: float
    fit_friction: float
    engagement_length: float
    binding_gain: float
    grip_force: float
    grip_friction: float
    required_hold: float = 0.0
    lock_tab: bool = False
    lead_deformable: bool = False
    lock_tolerance: float = math.radians(2.0)

    def __post_init__(self) -> None:
        for attr in ("fit_preload", "grip_force", "required_hold", "binding_gain", "lock_tolerance"):
            if getattr(self, attr) < 0:
                raise ValueError(f"{attr} must be non-negative")
        for attr in ("fit_friction", "grip_friction"):
            if not 0.0 < getattr(self, attr) <= 2.0:
                raise ValueError(f"{attr} must lie in (0, 2]")
        if self.engagement_length <= 0:
            raise ValueError("engagement_length must be positive")

    @property
    def grip_capacity(self) -> float:
        return self.grip_friction * self.grip_force


@dataclass
class PulloutResult:
    success: bool
    failure_mode: FailureMode
    peak_force: float
    trace: np.ndarray  # (TRACE_SAMPLES, 2): displacement mm, axial force N
    pull_force: float = 0.0

    @property
    def final_force(self) -> float:
        return float(self.trace[-1, 1])


def effective_misalignment(theta_dev: float, fixture: FixtureModel) -> float:
    """Misalignment left over once the fixture has absorbed what it can."""
    if theta_dev < 0:
        raise ValueError("angular deviation must be non-negative")
    return max(0.0, theta_dev - fixture.compliance_angle_cap)


def required_pull_force(scenario: PulloutScenario, theta_eff: float) -> float:
    if not 0.0 <= theta_eff < math.pi / 2:
        raise ValueError("effective misalignment must lie in [0, pi/2)")
    return scenario.fit_friction * scenario.fit_preload * (1.0 + scenario.binding_gain * math.tan(theta_eff))


def classify(
    scenario: PulloutScenario,
    fixture: FixtureModel,
    theta_dev: float,
    contact_fraction: float = 1.0,
) -> tuple[FailureMode, float, float]:
    """Run the gate/force pipeline without building a trace.

    Returns ``(mode, F_pull, failure_peak)``; ``failure_peak`` is the force at
    which the attempt gives way (equal to ``F_pull`` on success).
    """
    theta_eff = effective_misalignment(theta_dev, fixture)
    f_pull = required_pull_force(scenario, theta_eff)
    grip = scenario.grip_capacity
    if scenario.lock_tab and theta_eff > scenario.lock_tolerance:
        return FailureMode.LOCK_NOT_RELEASED, f_pull, grip
    if scenario.lead_deformable and theta_eff > 0.0:
        return FailureMode.LEAD_BENT, f_pull, min(f_pull, grip)
    if fixture.kind is FixtureKind.SHELL and contact_fraction < CONTACT_THRESHOLD:
        return FailureMode.NO_CONTACT, f_pull, min(f_pull, grip) * contact_fraction
    if f_pull > grip:
        return FailureMode.GRIP_SLIP, f_pull, grip
    lateral_room = fixture.holding_force_limit - scenario.required_hold
    sin_dev = math.sin(theta_dev)
    if f_pull * sin_dev > lateral_room:
        give = 0.0 if sin_dev == 0.0 or lateral_room <= 0.0 else lateral_room / sin_dev
        return FailureMode.FIXTURE_ESCAPE, f_pull, min(give, f_pull)
    return FailureMode.NONE, f_pull, f_pull


def synthesize_trace(engagement_length: float, plateau: float, peak: float, success: bool) -> np.ndarray:
    """Force-displacement samples: ramp over the first 30 % of travel.

    Success holds the plateau to the end; failure stops the ramp at ``peak``
    and falls to zero within five samples.
    """
    d = np.linspace(0.0, engagement_length, TRACE_SAMPLES)
    ramp_len = RAMP_FRACTION * engagement_length
    ramp = plateau * np.minimum(d / ramp_len, 1.0)
    if success:
        return np.column_stack((d, ramp))
    f = np.minimum(ramp, peak)
    reached = np.nonzero(ramp >= peak)[0]
    top = int(reached[0]) if reached.size else TRACE_SAMPLES - 1
    top = min(top, TRACE_SAMPLES - 1 - DROP_SAMPLES)
    f[top] = peak
    f[top + 1 : top + 1 + DROP_SAMPLES] = peak * np.linspace(1.0, 0.0, DROP_SAMPLES + 1)[1:]
    f[top + 1 + DROP_SAMPLES :] = 0.0
    return np.column_stack((d, f))


def simulate_pullout(
    scenario: PulloutScenario,
    fixture: FixtureModel,
    jig: ShellJig | None,
    obj: Polygon | None,
    q_obj: Pose2 | None,
    theta_dev: float,
    contact_fraction: float | None = None,
) -> PulloutResult:
    """Predict the outcome and wrist-force trace of one pull-out attempt.

    The jig, object and pose only matter for the shell fixture, where the
    fraction of membranes touching the object at full pressure gates holding.
    A precomputed ``contact_fraction`` skips that geometry query.
    """
    if contact_fraction is None:
        if fixture.kind is FixtureKind.SHELL:
            if jig is None or obj is None or q_obj is None:
                raise ValueError("shell fixture needs jig, object and pose")
            contact_fraction = contact_area_fraction(jig, obj, q_obj, FULL_PRESSURE)
        else:
            contact_fraction = 1.0
    mode, f_pull, peak = classify(scenario, fixture, theta_dev, contact_fraction)
    success = mode is FailureMode.NONE
    trace = synthesize_trace(scenario.engagement_length, f_pull, peak, success)
    return PulloutResult(
        success=success,
        failure_mode=mode,
        peak_force=float(trace[:, 1].max()),
        trace=trace,
        pull_force=f_pull,
    )


@dataclass
class SweepResult:
    scenario: str
    fixture: FixtureKind
    rows: list[tuple[float, PulloutResult]]

    @property
    def max_success_deg(self) -> float | None:
        ok = [d for d, r in self.rows if r.success]
        return max(ok) if ok else None


def deviation_sweep(
    scenario: PulloutScenario,
    fixture: FixtureModel,
    jig: ShellJig | None,
    obj: Polygon | None,
    q_obj: Pose2 | None,
    deviations_deg=PROTOCOL_DEVIATIONS_DEG,
    contact_fraction: float | None = None,
) -> SweepResult:
    """Pull-out attempts at 0, 5, ..., 25 degrees of trajectory deviation.

    ``contact_fraction`` overrides the value measured from the jig geometry.
    """
    frac = contact_fraction
    if frac is None and fixture.kind is FixtureKind.SHELL and jig is not None and obj is not None and q_obj is not None:
        frac = contact_area_fraction(jig, obj, q_obj, FULL_PRESSURE)
    rows = [
        (float(d), simulate_pullout(scenario, fixture, jig, obj, q_obj, math.radians(d), contact_fraction=frac))
        for d in deviations_deg
    ]
    return SweepResult(scenario.name, fixture.kind, rows)


def noisy_trials(result: PulloutResult, trials: int, noise: float, rng: np.random.Generator) -> np.ndarray:
    """``trials`` replicates of the force trace with additive Gaussian noise.

    Forces are reported as magnitudes, like a wrist sensor's absolute reading.
    Returns shape ``(trials, TRACE_SAMPLES)``.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    if noise < 0:
        raise ValueError("noise must be non-negative")
    base = result.trace[:, 1]
    return np.abs(base[None, :] + rng.normal(0.0, noise, size=(trials, base.size)))


def predict_success(
    fit_force: np.ndarray,
    binding_gain: np.ndarray,
    grip_capacity: np.ndarray,
    required_hold: float,
    lock_tab: bool,
    lead_deformable: bool,
    lock_tolerance: float,
    fixture: FixtureModel,
    contact_fraction: float,
    deviations_rad: np.ndarray,
) -> np.ndarray:
    """Vectorised success flags of :func:`classify` for many parameter sets.

    ``fit_force`` (mu_fit * F_n), ``binding_gain`` and ``grip_capacity`` are
    arrays of shape ``(n,)``; the result has shape ``(n, len(deviations))``.
    """
    dev = np.asarray(deviations_rad, dtype=float)[None, :]
    theta_eff = np.maximum(0.0, dev - fixture.compliance_angle_cap)
    f_pull = fit_force[:, None] * (1.0 + binding_gain[:, None] * np.tan(theta_eff))
    ok = np.ones(f_pull.shape, dtype=bool)
    if lock_tab:
        ok &= ~(theta_eff > lock_tolerance)
    if lead_deformable:
        ok &= ~(theta_eff > 0.0)
    if fixture.kind is FixtureKind.SHELL and contact_fraction < CONTACT_THRESHOLD:
        ok &= False
    ok &= ~(f_pull > grip_capacity[:, None])
    ok &= ~(f_pull * np.sin(dev) > fixture.holding_force_limit - required_hold)
    return ok


def trial_statistics(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample mean and standard deviation over replicates (axis 0).

    Deviations are taken from the first replicate so identical replicates
    give a standard deviation of exactly zero.
    """
    ref = samples[0]
    d = samples - ref[None, :]
    return ref + d.mean(axis=0), d.std(axis=0)
