"""Dual foot-pedal deadman interlock.

Motion is permitted only while both pedals are held.  Enabling is debounced
(both pedals must stay pressed for a full debounce window before motion is
allowed) while disabling is immediate: the first update that sees a released
pedal kills the enable flag, and the gate then forces the commanded twist to
exact zero.  The asymmetry is deliberate - the fail-safe direction never
waits.
"""

from __future__ import annotations

from dataclasses import dataclass

from .spatial import Twist

DEFAULT_DEBOUNCE_WINDOW = 0.05


@dataclass(frozen=True)
class PedalState:
    """Momentary state of the two pedals plus the time it last changed."""

    left: bool = False
    right: bool = False
    last_change: float = 0.0

    @property
    def both_pressed(self):
        return self.left and self.right


@dataclass(frozen=True)
class InterlockState:
    """Enable flag plus the bookkeeping needed for the debounce.

    pressed_since is the time both pedals were first seen held during the
    current hold, or None while any pedal is up.  last_update enforces
    monotonic time.
    """

    enabled: bool = False
    debounce_window: float = DEFAULT_DEBOUNCE_WINDOW
    pressed_since: float | None = None
    last_update: float | None = None

    def __post_init__(self):
        if self.debounce_window < 0.0:
            raise ValueError("debounce_window must be nonnegative")


def update(pedals: PedalState, now: float, state: InterlockState) -> InterlockState:
    """Advance the interlock one observation.

    Raises on time regression.  Enable turns on only once both pedals have
    been continuously held for at least the debounce window; it turns off on
    the very update that sees a pedal released.
    """
    if state.last_update is not None and now < state.last_update:
        raise ValueError(f"time went backwards: {now} < {state.last_update}")
    if not pedals.both_pressed:
        return InterlockState(
            enabled=False,
            debounce_window=state.debounce_window,
            pressed_since=None,
            last_update=now,
        )
    since = state.pressed_since if state.pressed_since is not None else now
    return InterlockState(
        enabled=(now - since) >= state.debounce_window,
        debounce_window=state.debounce_window,
        pressed_since=since,
        last_update=now,
    )


def gate(tw: Twist, state: InterlockState) -> Twist:
    """Pass the twist through when enabled, exact zero twist otherwise."""
    if state.enabled:
        return tw
    return Twist.zero()
