"""Backup-plan node sets, one-step reachability and perception bubbles.

The bubble of an agent is the minimal cell region it must have full
state/intent knowledge over to act safely: the cells it may sweep next step
(including the braking sweep it would then be committed to), plus every cell
another same-type agent could occupy while being able to reach that region in
one step, or while having a braking sweep that crosses it, or one step before
entering such a state.

Bubbles only depend on heading and velocity up to translation, so they are
precomputed on an unbounded uniform road and translated at query time.
"""

from .dynamics import (
    Pose,
    allowable_actions,
    backup_plan_action,
    braking_trajectory,
    occupancy,
    stopping_displacement,
    transition,
)
from .geometry import EAST, opposite, rotate_offset, step_cell
from .network import UniformWorld


def backup_plan_nodes(pose, params, world=None):
    """Cells occupied while applying maximum deceleration to a stop.

    Defined recursively: the braking step's footprint unioned with the node
    set of the resulting state, bottoming out at the stopped cell.
    """
    cells = {pose.cell}
    for footprint, _ in braking_trajectory(pose, params):
        cells.update(footprint)
    return frozenset(cells)


def forward_reachable_states(pose, params, world):
    """All states reachable in one allowable action."""
    return {transition(pose, a, params, world) for a in allowable_actions(pose, params, world)}


def forward_reachable_cells(pose, params, world):
    """All cells occupied while taking any one allowable action."""
    cells = set()
    for a in allowable_actions(pose, params, world):
        cells.update(occupancy(pose, a, params, world))
    return frozenset(cells)


def _candidate_states(world, cells, headings, params):
    for cell in cells:
        for h in headings:
            if h not in world.orientations(cell):
                continue
            for v in range(params.v_min, params.v_max + 1):
                yield Pose(cell, h, v)


def backward_reachable_states(pose, params, world, window=None):
    """States from which `pose` is reachable in one allowable action.

    `window` bounds the searched cells; by default a box sized by the maximum
    single-action displacement around the pose.
    """
    if window is None:
        reach = params.v_max + 1
        r0, c0 = pose.cell
        window = [
            (r0 + dr, c0 + dc)
            for dr in range(-reach, reach + 1)
            for dc in range(-reach, reach + 1)
        ]
    out = set()
    for cand in _candidate_states(world, window, range(4), params):
        for a in allowable_actions(cand, params, world):
            if transition(cand, a, params, world) == pose:
                out.add(cand)
                break
    return out


def occupancy_preimage(cell, params, world, window=None):
    """States with some allowable action whose footprint covers the cell."""
    if not world.is_drivable(cell):
        return set()
    if window is None:
        reach = params.v_max + 1
        r0, c0 = cell
        window = [
            (r0 + dr, c0 + dc)
            for dr in range(-reach, reach + 1)
            for dc in range(-reach, reach + 1)
        ]
    out = set()
    for cand in _candidate_states(world, window, range(4), params):
        for a in allowable_actions(cand, params, world):
            if cell in occupancy(cand, a, params, world):
                out.add(cand)
                break
    return out


def compute_bubble(pose, params, world=None):
    """Bubble cell set for an agent among same-type agents.

    When `world` is omitted the bubble is computed on the unbounded uniform
    road for the pose's heading (the engine's translation-template case).
    """
    if world is None:
        world = UniformWorld(pose.heading)
    heading = pose.heading

    fwd_states = forward_reachable_states(pose, params, world)
    zone = set(forward_reachable_cells(pose, params, world))
    for s in fwd_states:
        zone.update(backup_plan_nodes(s, params, world))

    # Window of candidate positions for the other agent: anything whose next
    # action or subsequent braking could touch the zone, plus one backward
    # step of slack.
    span = params.v_max + stopping_displacement(params.v_max, params)
    lo_r = min(r for r, _ in zone) - 2
    hi_r = max(r for r, _ in zone) + 2
    lo_c = min(c for _, c in zone) - (span + params.v_max + 1)
    hi_c = max(c for _, c in zone) + (span + 1)
    window = [
        (r, c) for r in range(lo_r, hi_r + 1) for c in range(lo_c, hi_c + 1)
    ]
    # Uniform-world templates are heading-aligned; real-world queries search
    # every heading so cross-street cells near the pose are covered too.
    headings = range(4) if not isinstance(world, UniformWorld) else (heading,)

    candidates = [
        s for s in _candidate_states(world, window, headings, params)
    ]

    bubble = set(zone)
    reach_states = []
    for s in candidates:
        for a in allowable_actions(s, params, world):
            if occupancy(s, a, params, world) & zone:
                reach_states.append(s)
                break
    bubble.update(s.cell for s in reach_states)

    bp_states = [s for s in candidates if backup_plan_nodes(s, params, world) & zone]
    bubble.update(s.cell for s in bp_states)
    bp_set = set(bp_states)
    for s in candidates:
        if s in bp_set:
            continue
        for a in allowable_actions(s, params, world):
            if transition(s, a, params, world) in bp_set:
                bubble.add(s.cell)
                break
    return frozenset(bubble)


class BubbleTable:
    """Translation templates of bubbles, keyed by (heading, velocity)."""

    def __init__(self, params):
        self.params = params
        self._templates = {}

    def offsets(self, heading, v):
        key = (heading, v)
        cached = self._templates.get(key)
        if cached is not None:
            return cached
        east = self._templates.get((EAST, v))
        if east is None:
            cells = compute_bubble(Pose((0, 0), EAST, v), self.params)
            east = frozenset(cells)
            self._templates[(EAST, v)] = east
        offsets = frozenset(rotate_offset(o, heading) for o in east)
        self._templates[key] = offsets
        return offsets

    def cells(self, pose, network=None):
        r0, c0 = pose.cell
        cells = {(r0 + dr, c0 + dc) for dr, dc in self.offsets(pose.heading, pose.v)}
        if network is not None:
            cells = {c for c in cells if network.in_bounds(c)}
        return cells

    def contains(self, pose, cell):
        dr, dc = cell[0] - pose.cell[0], cell[1] - pose.cell[1]
        # Template offsets are in the east frame rotated to `heading`; going
        # back through the east template avoids materializing per-pose sets.
        return (dr, dc) in self.offsets(pose.heading, pose.v)


def oncoming_regions(network, params):
    """Per (intersection, heading): oncoming-lane cells visible across it.

    For an agent approaching an intersection with a given heading, the region
    holds the intersection's own cells plus the cells of opposite-direction
    lanes within stopping-distance(v_max) + intersection width upstream of
    the intersection.
    """
    regions = {}
    for cid, cells in network.intersections.items():
        width = max(
            max(r for r, _ in cells) - min(r for r, _ in cells),
            max(c for _, c in cells) - min(c for _, c in cells),
        ) + 1
        depth = stopping_displacement(params.v_max, params) + width
        for heading in range(4):
            onc = opposite(heading)
            region = set()
            frontier = list(cells)
            seen = set(cells)
            for _ in range(depth):
                nxt = []
                for cell in frontier:
                    back = step_cell(cell, opposite(onc))
                    if back in seen:
                        continue
                    seen.add(back)
                    if (
                        network.is_drivable(back)
                        and not network.is_intersection(back)
                        and onc in network.orientations(back)
                    ):
                        region.add(back)
                        nxt.append(back)
                frontier = nxt
            regions[(cid, heading)] = frozenset(region)
    return regions
