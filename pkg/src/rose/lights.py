"""Deterministic fixed-time traffic light controller.

Each intersection runs a two-axis cycle: horizontal green/yellow, an all-red
gap, vertical green/yellow, another all-red gap. The two axes are never
simultaneously green (or yellow), and every red interval is finite and long
enough for blocked agents to complete a lane change.
"""

from typing import NamedTuple

from .geometry import axis_of

GREEN, YELLOW, RED = "green", "yellow", "red"
HORIZONTAL, VERTICAL = "horizontal", "vertical"

AXIS_OF_HEADING = {0: VERTICAL, 1: HORIZONTAL, 2: VERTICAL, 3: HORIZONTAL}


class LightCycle(NamedTuple):
    green_steps: int = 8
    yellow_steps: int = 2
    all_red_steps: int = 3

    @property
    def period(self):
        return 2 * (self.green_steps + self.yellow_steps + self.all_red_steps)

    def validate(self):
        if self.green_steps < 1 or self.yellow_steps < 0 or self.all_red_steps < 0:
            raise ValueError(f"invalid light cycle {self}")
        return self


class LightController:
    """Pure function of (intersection, axis, time) given per-intersection cycles."""

    def __init__(self, network, default=LightCycle(), overrides=None):
        self.network = network
        self.cycles = {}
        overrides = overrides or {}
        for cid in network.intersections:
            self.cycles[cid] = overrides.get(cid, default).validate()

    def cycle(self, intersection_id):
        try:
            return self.cycles[intersection_id]
        except KeyError:
            raise KeyError(f"unknown intersection {intersection_id}") from None

    def state(self, intersection_id, axis, t):
        cyc = self.cycle(intersection_id)
        g, y, r = cyc.green_steps, cyc.yellow_steps, cyc.all_red_steps
        phase = t % cyc.period
        if phase < g:
            h = GREEN
        elif phase < g + y:
            h = YELLOW
        elif phase < g + y + r:
            h = RED
        else:
            h = RED
        v = RED
        vphase = phase - (g + y + r)
        if 0 <= vphase < g:
            v = GREEN
        elif g <= vphase < g + y:
            v = YELLOW
        return h if axis == HORIZONTAL else v

    def state_for_heading(self, intersection_id, heading, t):
        return self.state(intersection_id, AXIS_OF_HEADING[heading], t)

    def entry_allowed(self, intersection_id, heading, t):
        return self.state_for_heading(intersection_id, heading, t) in (GREEN, YELLOW)

    def all_red(self, intersection_id, t):
        return (
            self.state(intersection_id, HORIZONTAL, t) == RED
            and self.state(intersection_id, VERTICAL, t) == RED
        )

    def steps_until_cross_green(self, intersection_id, heading, t):
        """Steps from t until the crossing axis next shows green."""
        cross = VERTICAL if AXIS_OF_HEADING[heading] == HORIZONTAL else HORIZONTAL
        cyc = self.cycle(intersection_id)
        for k in range(cyc.period + 1):
            if self.state(intersection_id, cross, t + k) == GREEN:
                return k
        return cyc.period + 1  # pragma: no cover - cycle always has green

    def red_run_length(self, intersection_id, axis):
        """Length of the longest contiguous red interval for an axis."""
        cyc = self.cycle(intersection_id)
        period = cyc.period
        states = [self.state(intersection_id, axis, t) for t in range(2 * period)]
        best = run = 0
        for s in states:
            run = run + 1 if s == RED else 0
            best = max(best, run)
        return min(best, period)


def min_red_time(params):
    """Smallest red duration letting a waiting agent complete a lane change.

    Worst-case blocker stopping steps plus one step for the lane change and
    one slack step.
    """
    from .dynamics import stopping_steps

    return stopping_steps(params.v_max, params) + 2
