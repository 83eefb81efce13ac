"""Agent state, discrete transition function, maneuver footprints and gates.

All motion is integer-valued. An action is an (acceleration, steer) pair; the
acceleration updates velocity first (clamped to the velocity bounds), then the
steer maneuver is executed if its velocity gate is satisfied. During the step
the agent conservatively occupies a swept set of grid cells; at step
boundaries it occupies exactly one cell.

Steer gates: turns require the post-update velocity to be exactly 1, lane
changes require it to be at least 1, straight admits any velocity.
"""

from typing import NamedTuple

from .geometry import DIR_VEC, left_of, opposite, right_of, step_cell

STRAIGHT = "straight"
LEFT_TURN = "left-turn"
RIGHT_TURN = "right-turn"
LEFT_LANE_CHANGE = "left-lane-change"
RIGHT_LANE_CHANGE = "right-lane-change"

LANE_CHANGES = (RIGHT_LANE_CHANGE, LEFT_LANE_CHANGE)
TURNS = (RIGHT_TURN, LEFT_TURN)
ALL_STEERS = (STRAIGHT, RIGHT_LANE_CHANGE, LEFT_LANE_CHANGE, RIGHT_TURN, LEFT_TURN)

# Deterministic tie-break order among steers (smaller ranks are preferred).
STEER_RANK = {s: i for i, s in enumerate(ALL_STEERS)}

MAX_TURN_DEPTH = 4  # intersection cells a turn may traverse per leg


class AgentParams(NamedTuple):
    a_min: int = -1
    a_max: int = 1
    v_min: int = 0
    v_max: int = 3

    def validate(self):
        if not (self.a_min < 0 <= self.a_max):
            raise ValueError(f"need a_min < 0 <= a_max, got {self}")
        if not (0 == self.v_min <= self.v_max):
            raise ValueError(f"need 0 == v_min <= v_max, got {self}")
        return self


class Pose(NamedTuple):
    cell: tuple
    heading: int
    v: int


class Action(NamedTuple):
    acc: int
    steer: str


class IllegalAction(ValueError):
    pass


def clamp(v, lo, hi):
    return lo if v < lo else hi if v > hi else v


def _heading_ok(world, cell, heading):
    return world.is_drivable(cell) and heading in world.orientations(cell)


def turn_path(world, cell, heading, steer):
    """Resolve the L-shaped path of a turn maneuver.

    The agent advances through consecutive intersection cells along its
    heading, pivots at the first cell from which the rotated heading leads
    (possibly through further intersection cells) to a lane cell with the
    matching orientation. Returns (swept cells beyond the start, end cell,
    new heading) or None if no legal turn exists here.

    Lane discipline: a turn is only legal from the outermost lane on the
    turning side (no left turn across a parallel same-direction lane).
    """
    new_h = right_of(heading) if steer == RIGHT_TURN else left_of(heading)
    probe = cell
    for _ in range(MAX_TURN_DEPTH):
        if not world.is_intersection(probe):
            break
        probe = step_cell(probe, opposite(heading))
    side = step_cell(probe, new_h)
    if (
        world.is_drivable(side)
        and not world.is_intersection(side)
        and world.orientations(side) == (heading,)
    ):
        return None
    cluster = None
    path = []
    for a in range(1, MAX_TURN_DEPTH + 1):
        pivot = step_cell(cell, heading, a)
        if not world.is_intersection(pivot) or heading not in world.orientations(pivot):
            break
        if cluster is None:
            cluster = world.intersection_id(pivot)
        elif world.intersection_id(pivot) != cluster:
            break
        path.append(pivot)
        if new_h not in world.orientations(pivot):
            continue
        leg = []
        for b in range(1, MAX_TURN_DEPTH + 1):
            nxt = step_cell(pivot, new_h, b)
            if world.is_intersection(nxt):
                if world.intersection_id(nxt) != cluster or new_h not in world.orientations(nxt):
                    break
                leg.append(nxt)
                continue
            if _heading_ok(world, nxt, new_h):
                return (tuple(path + leg + [nxt]), nxt, new_h)
            break
    return None


def resolve_action(pose, action, params, world):
    """Compute (footprint cells, end pose) for an action, or raise IllegalAction.

    The footprint is the conservative swept cell set including the start and
    end cells. Legality covers velocity gates, drivability and legal
    orientation of every swept cell.
    """
    cell, heading, v = pose
    v1 = clamp(v + action.acc, params.v_min, params.v_max)
    steer = action.steer

    if steer == STRAIGHT:
        cells = [cell]
        cur = cell
        for _ in range(v1):
            cur = step_cell(cur, heading)
            if not _heading_ok(world, cur, heading):
                raise IllegalAction(f"straight through illegal cell {cur}")
            cells.append(cur)
        return cells, Pose(cur, heading, v1)

    if steer in LANE_CHANGES:
        if v1 < 1:
            raise IllegalAction("lane change requires velocity >= 1")
        lat = right_of(heading) if steer == RIGHT_LANE_CHANGE else left_of(heading)
        base = step_cell(cell, lat)
        cells = [cell, base]
        if not _heading_ok(world, base, heading):
            raise IllegalAction(f"no adjacent lane at {base}")
        src, dst = cell, base
        for _ in range(v1):
            src = step_cell(src, heading)
            dst = step_cell(dst, heading)
            if not _heading_ok(world, src, heading) or not _heading_ok(world, dst, heading):
                raise IllegalAction("lane change sweep leaves drivable area")
            cells.append(src)
            cells.append(dst)
        return cells, Pose(dst, heading, v1)

    if steer in TURNS:
        if v1 != 1:
            raise IllegalAction("turns require velocity exactly 1")
        resolved = turn_path(world, cell, heading, steer)
        if resolved is None:
            raise IllegalAction("no intersection corner ahead for turn")
        swept, end, new_h = resolved
        return [cell, *swept], Pose(end, new_h, 1)

    raise IllegalAction(f"unknown steer {steer!r}")


def transition(pose, action, params, world):
    """Apply an action. The action must be allowable from the pose."""
    return resolve_action(pose, action, params, world)[1]


def occupancy(pose, action, params, world):
    """Swept footprint of the maneuver, start and end cells included."""
    return frozenset(resolve_action(pose, action, params, world)[0])


def allowable_actions(pose, params, world):
    """All (acc, steer) pairs legal from this pose, in deterministic order."""
    out = []
    for acc in range(params.a_max, params.a_min - 1, -1):
        for steer in ALL_STEERS:
            action = Action(acc, steer)
            try:
                resolve_action(pose, action, params, world)
            except IllegalAction:
                continue
            out.append(action)
    return out


def backup_plan_action(pose, params):
    """Maximal deceleration, straight; never drives velocity below zero."""
    return Action(max(params.a_min, -pose.v), STRAIGHT)


def braking_trajectory(pose, params, world=None):
    """Poses and swept footprints while applying the backup plan to a stop.

    Returns a list of (footprint cells tuple, pose after the braking step).
    The list is empty when the agent is already stopped. When ``world`` is
    None the sweep is computed on an unbounded grid (geometry only).
    """
    steps = []
    cur = pose
    while cur.v > 0:
        acc = max(params.a_min, -cur.v)
        v1 = cur.v + acc
        cells = [cur.cell]
        c = cur.cell
        for _ in range(v1):
            c = step_cell(c, cur.heading)
            cells.append(c)
        cur = Pose(c, cur.heading, v1)
        steps.append((tuple(cells), cur))
    return steps


def braking_footprints(pose, params):
    """Per-step swept cell tuples of the full braking maneuver."""
    return [cells for cells, _ in braking_trajectory(pose, params)]


def stopping_displacement(v, params):
    """Cells covered from velocity v until a full stop under maximal braking."""
    total = 0
    while v > 0:
        v = max(0, v + max(params.a_min, -v))
        total += v
    return total


def stopping_steps(v, params):
    """Steps needed to reach velocity 0 under maximal braking."""
    steps = 0
    while v > 0:
        v = max(0, v + max(params.a_min, -v))
        steps += 1
    return steps


def braking_conflict(pose_a, pose_b, params):
    """True when simultaneous max-braking of both agents ever overlaps.

    The check is step-synchronized: at each braking step the swept cells of
    the two maneuvers must stay disjoint; a stopped agent keeps occupying its
    cell. Shared start cells also count as a conflict.
    """
    if pose_a.cell == pose_b.cell:
        return True
    fa = braking_footprints(pose_a, params)
    fb = braking_footprints(pose_b, params)
    end_a = fa[-1][-1] if fa else pose_a.cell
    end_b = fb[-1][-1] if fb else pose_b.cell
    for k in range(max(len(fa), len(fb))):
        cells_a = fa[k] if k < len(fa) else (end_a,)
        cells_b = fb[k] if k < len(fb) else (end_b,)
        if set(cells_a) & set(cells_b):
            return True
    return False
