import itertools

import numpy as np
import pytest

from rcmteleop.safety import InterlockState, PedalState, gate, update
from rcmteleop.spatial import Twist


def run_sequence(states, dt=0.01, debounce=0.025):
    """Feed a sequence of (left, right) pairs at tick cadence; returns the
    enabled flag observed at each tick."""
    interlock = InterlockState(debounce_window=debounce)
    out = []
    for i, (left, right) in enumerate(states):
        interlock = update(PedalState(left, right, i * dt), i * dt, interlock)
        out.append(interlock.enabled)
    return out


def oracle_sequence(states, dt=0.01, debounce=0.025):
    """Independent recomputation: enabled iff both pedals have been held on
    every tick of a trailing window spanning at least the debounce time."""
    out = []
    run_start = None
    for i, (left, right) in enumerate(states):
        if left and right:
            if run_start is None:
                run_start = i
            out.append((i - run_start) * dt >= debounce)
        else:
            run_start = None
            out.append(False)
    return out


class TestUpdate:
    def test_both_held_enables_after_debounce(self):
        enabled = run_sequence([(True, True)] * 10)
        assert enabled[:2] == [False, False]  # 0 ms and 10 ms of hold
        assert all(enabled[3:])

    def test_single_pedal_release_disables_immediately(self):
        enabled = run_sequence([(True, True)] * 6 + [(True, False)] + [(True, True)] * 2)
        assert enabled[5] is True
        assert enabled[6] is False
        assert enabled[7] is False  # debounce restarts

    def test_short_hold_never_enables(self):
        enabled = run_sequence([(True, True)] * 2 + [(False, True)] * 2)
        assert enabled == [False] * 4

    def test_zero_debounce_enables_instantly(self):
        enabled = run_sequence([(True, True)], debounce=0.0)
        assert enabled == [True]

    def test_time_regression_rejected(self):
        interlock = InterlockState()
        interlock = update(PedalState(True, True, 1.0), 1.0, interlock)
        with pytest.raises(ValueError, match="backwards"):
            update(PedalState(True, True, 1.0), 0.5, interlock)

    def test_negative_debounce_rejected(self):
        with pytest.raises(ValueError):
            InterlockState(debounce_window=-0.01)


class TestGate:
    def test_enabled_passes_through(self):
        tw = Twist(np.array([0.1, 0.2, 0.3]), np.array([1.0, 2.0, 3.0]))
        assert gate(tw, InterlockState(enabled=True)) is tw

    def test_disabled_outputs_bitwise_zero(self):
        tw = Twist(np.array([0.1, 0.2, 0.3]), np.array([1.0, 2.0, 3.0]))
        out = gate(tw, InterlockState(enabled=False))
        assert np.array_equal(out.linear, np.zeros(3))
        assert np.array_equal(out.angular, np.zeros(3))

    def test_disabled_zero_stays_zero(self):
        out = gate(Twist.zero(), InterlockState(enabled=False))
        assert np.array_equal(out.as_array(), np.zeros(6))


class TestSequences:
    def test_exhaustive_short_sequences(self):
        pairs = [(False, False), (False, True), (True, False), (True, True)]
        for combo in itertools.product(range(4), repeat=6):
            states = [pairs[i] for i in combo]
            assert run_sequence(states) == oracle_sequence(states), states

    def test_release_to_stop_within_one_tick(self):
        rng = np.random.default_rng(30)
        dt = 0.001
        interlock = InterlockState(debounce_window=0.05)
        prev_both = False
        for i in range(20_000):
            left, right = rng.random() < 0.9, rng.random() < 0.9
            interlock = update(PedalState(left, right, i * dt), i * dt, interlock)
            if not (left and right):
                assert interlock.enabled is False  # same tick, not the next
            prev_both = left and right

    def test_fuzz_debounce_invariant(self):
        # random pedal chatter; enabled must imply an unbroken both-pressed
        # run of at least the debounce window
        rng = np.random.default_rng(31)
        dt = 0.001
        debounce = 0.05
        interlock = InterlockState(debounce_window=debounce)
        run_start = None
        for i in range(200_000):
            left, right = rng.random() < 0.7, rng.random() < 0.7
            now = i * dt
            interlock = update(PedalState(left, right, now), now, interlock)
            if left and right:
                if run_start is None:
                    run_start = now
            else:
                run_start = None
            if interlock.enabled:
                assert run_start is not None and now - run_start >= debounce
            elif run_start is not None:
                assert now - run_start < debounce
