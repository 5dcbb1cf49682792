"""Symmetric, contact-based gait scheduling.

Each leg is assigned stance or swing from the gait clock and the foot
contact sensors: a confirmed touchdown past mid-swing ends the step early,
a missing touchdown at the nominal end extends it (phase clamped just
below one) until the foot actually lands.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

PHASE_END = 1.0 - 1e-9
DOUBLE = "double-support"
LEFT_SWING = "left-swing"
RIGHT_SWING = "right-swing"


@dataclass
class GaitConfig:
    swing_period: float = 0.4        # must stay within the 0.3-0.5 s band
    double_support_time: float = 0.0
    early_contact_guard: float = 0.5   # ignore touchdowns before this phase
    touchdown_contact: str = "either"  # "either" or "both" of heel/toe
    debounce_ticks: int = 2            # consecutive ticks to confirm early contact

    def __post_init__(self):
        if not 0.3 <= self.swing_period <= 0.5:
            raise ValueError("swing period must lie in [0.3, 0.5] s")
        if self.touchdown_contact not in ("either", "both"):
            raise ValueError("touchdown_contact must be 'either' or 'both'")


@dataclass
class GaitPhase:
    mode: str = DOUBLE
    phi: float = 0.0
    swing_period: float = 0.4
    time_in_phase: float = 0.0
    step_count: int = 0
    next_swing: str = "left"
    contact_streak: int = 0

    @property
    def swing_side(self) -> str | None:
        if self.mode == LEFT_SWING:
            return "left"
        if self.mode == RIGHT_SWING:
            return "right"
        return None

    @property
    def stance_side(self) -> str:
        # in double support callers treat the previous stance as primary
        return "right" if self.mode == LEFT_SWING else "left"


def _swing_contact(contacts, side: str, which: str) -> bool:
    # contacts layout: [l_heel, l_toe, r_heel, r_toe]
    heel, toe = (contacts[0], contacts[1]) if side == "left" else (contacts[2], contacts[3])
    return (heel and toe) if which == "both" else (heel or toe)


def update_gait(phase: GaitPhase, contacts, dt: float, walking: bool,
                cfg: GaitConfig | None = None) -> GaitPhase:
    """Advance the gait clock one control tick; at most one mode change."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    cfg = cfg or GaitConfig(swing_period=phase.swing_period)

    if phase.mode == DOUBLE:
        t = phase.time_in_phase + dt
        if walking and t + 1e-12 >= cfg.double_support_time:
            return replace(phase, mode=LEFT_SWING if phase.next_swing == "left" else RIGHT_SWING,
                           phi=0.0, time_in_phase=0.0, contact_streak=0)
        return replace(phase, time_in_phase=t)

    phi = phase.phi + dt / phase.swing_period
    t = phase.time_in_phase + dt
    side = phase.swing_side
    touching = _swing_contact(contacts, side, cfg.touchdown_contact)
    streak = phase.contact_streak + 1 if touching else 0

    ended = False
    if phi >= PHASE_END:
        if touching:
            ended = True          # nominal end: a single contact tick suffices
        else:
            phi = PHASE_END       # extend swing until the foot lands
    elif phi > cfg.early_contact_guard and streak >= cfg.debounce_ticks:
        ended = True

    if not ended:
        return replace(phase, phi=phi, time_in_phase=t, contact_streak=streak)

    other = "right" if side == "left" else "left"
    counted = phase.step_count + 1
    if walking and cfg.double_support_time <= 0.0:
        return replace(phase, mode=RIGHT_SWING if other == "right" else LEFT_SWING,
                       phi=0.0, time_in_phase=0.0, step_count=counted,
                       next_swing=side, contact_streak=0)
    return replace(phase, mode=DOUBLE, phi=0.0, time_in_phase=0.0,
                   step_count=counted, next_swing=other, contact_streak=0)
