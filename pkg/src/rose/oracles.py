"""Specification oracles, the tiered profile and the consistent evaluator.

Ten boolean oracles judge a (state, action, game snapshot) triple. They are
arranged in four tiers; actions are ranked lexicographically by the count of
satisfied oracles per tier, highest tier first, with a deterministic
tie-break so simulations replay exactly.

Tier 1  dynamic safety, static safety, unprotected left-turn safety
Tier 2  traffic light, legal orientation, intersection clearance,
        no lane change in intersections
Tier 3  destination reachability
Tier 4  forward progress, maintains progress

The intended action is chosen without the dynamic-safety oracle (it is
enforced downstream in the selection strategy); the best straight action and
backup-plan safety include it.
"""

from .dynamics import (
    Action,
    IllegalAction,
    LANE_CHANGES,
    LEFT_TURN,
    STEER_RANK,
    STRAIGHT,
    TURNS,
    allowable_actions,
    backup_plan_action,
    braking_conflict,
    braking_trajectory,
    resolve_action,
    turn_path,
)
from .geometry import step_cell
from .lights import GREEN, RED, YELLOW
from .routing import INF

DYNAMIC_SAFETY = "dynamic_safety"
STATIC_SAFETY = "static_safety"
UNPROTECTED_LEFT_TURN = "unprotected_left_turn_safety"
TRAFFIC_LIGHT = "traffic_light_law"
ORIENTATION = "traffic_orientation_law"
CLEARANCE = "intersection_clearance_law"
INTERSECTION_LANE_CHANGE = "intersection_lane_change_law"
FORWARD_PROGRESS = "forward_progress"
DESTINATION_REACHABILITY = "destination_reachability"
MAINTAINS_PROGRESS = "maintains_progress"

TIERS = (
    (DYNAMIC_SAFETY, STATIC_SAFETY, UNPROTECTED_LEFT_TURN),
    (TRAFFIC_LIGHT, ORIENTATION, CLEARANCE, INTERSECTION_LANE_CHANGE),
    (DESTINATION_REACHABILITY,),
    (FORWARD_PROGRESS, MAINTAINS_PROGRESS),
)
ALL_KINDS = tuple(kind for tier in TIERS for kind in tier)
TOP_THREE_TIER_KINDS = tuple(kind for tier in TIERS[:3] for kind in tier)


def _entered_clusters(view, start_cell, cells):
    """Clusters the footprint crosses into from outside."""
    net = view.network
    start = net.intersection_id(start_cell)
    out = set()
    for cell in cells:
        cid = net.intersection_id(cell)
        if cid is not None and cid != start:
            out.add(cid)
    return out


def _braking_entries(view, post):
    """(cluster, entry time offset, stop-inside cluster) of post-state braking."""
    net = view.network
    entries = []
    inside = net.intersection_id(post.cell)
    cur = post
    stop_cluster = inside
    for k, (cells, nxt) in enumerate(braking_trajectory(post, view.params)):
        for cell in cells[1:]:
            cid = net.intersection_id(cell)
            if cid is not None and cid != inside:
                entries.append((cid, k + 1))
            inside = cid
        cur = nxt
        stop_cluster = net.intersection_id(cur.cell)
    return entries, stop_cluster


def dynamic_safety(view, me, action):
    """No footprint overlap with presumed peer actions, and the joint
    post-state survives simultaneous maximal braking."""
    pose = view.poses[me]
    fp, post = view.resolve(pose, action)
    for other in view.neighbors(me):
        other_pose = view.poses[other]
        act = view.presumed_action(other, me)
        try:
            ofp, opost = view.resolve(other_pose, act)
        except IllegalAction:  # pragma: no cover - presumed actions are legal
            continue
        if fp & ofp:
            return False
        if braking_conflict(post, opost, view.params):
            return False
    return True


def static_safety(view, me, action):
    """No collision with non-drivable space, and the goal (a static obstacle
    for its own agent) is never overshot: braking after the action must stop
    at or before it."""
    pose = view.poses[me]
    try:
        cells, post = view.resolve(pose, action)
    except IllegalAction:
        return False
    goal = view.goals.get(me)
    goal_cells = view.router.goal_cells(goal) if goal is not None else frozenset()
    if post.cell in goal_cells:
        return True
    if goal_cells & cells:
        return False  # sweeps through the goal without stopping there
    net = view.network
    sweep = []
    for step_cells, _ in braking_trajectory(post, view.params):
        sweep.extend(step_cells[1:])
    for cell in sweep:
        if not net.is_drivable(cell):
            return False
    if sweep and sweep[-1] not in goal_cells and goal_cells & set(sweep):
        return False
    return True


def traffic_light_law(view, me, action):
    """No crossing into an intersection on red, now or during the forced
    braking the action commits the agent to. A waiting left turn may enter
    during the all-red window."""
    pose = view.poses[me]
    try:
        cells, post = view.resolve(pose, action)
    except IllegalAction:
        return False
    lights = view.lights
    for cid in _entered_clusters(view, pose.cell, cells):
        if lights.entry_allowed(cid, pose.heading, view.t):
            continue
        if action.steer == LEFT_TURN and lights.all_red(cid, view.t):
            continue
        return False
    entries, _ = _braking_entries(view, post)
    for cid, k in entries:
        if not lights.entry_allowed(cid, post.heading, view.t + k):
            return False
    return True


def _straight_exit(view, post):
    """(cells to exit, corridor cells) straight ahead out of the cluster."""
    net = view.network
    cid = net.intersection_id(post.cell)
    corridor = []
    cur = post.cell
    for k in range(1, 9):
        cur = step_cell(cur, post.heading)
        corridor.append(cur)
        if not net.is_drivable(cur) or post.heading not in net.orientations(cur):
            return None, corridor
        if net.intersection_id(cur) != cid:
            return k, corridor
    return None, corridor  # pragma: no cover - clusters are small


def _optimistic_steps(view, v, dist):
    params = view.params
    steps, covered = 0, 0
    while covered < dist:
        v = min(v + params.a_max, params.v_max)
        if v <= 0:
            return INF
        covered += v
        steps += 1
    return steps


def intersection_clearance_law(view, me, action):
    """The agent never ends up stranded inside an intersection: an action
    ending inside must leave an exit it can take before cross traffic gets
    green, and an action whose forced braking would stop inside is rejected."""
    pose = view.poses[me]
    try:
        cells, post = view.resolve(pose, action)
    except IllegalAction:
        return False
    net = view.network
    cid = net.intersection_id(post.cell)
    if cid is not None:
        deadline = view.lights.steps_until_cross_green(cid, post.heading, view.t + 1)
        exit_dist, corridor = _straight_exit(view, post)
        options = []
        if exit_dist is not None:
            blocked = any(view.occupancy.get(c, me) != me for c in corridor)
            if not blocked:
                options.append(_optimistic_steps(view, post.v, exit_dist))
        for steer in TURNS:
            resolved = turn_path(net, post.cell, post.heading, steer)
            if resolved is None:
                continue
            swept, end, _ = resolved
            blocked = any(view.occupancy.get(c, me) != me for c in (*swept, end))
            reachable_gate = (
                view.params.v_min <= 1 - view.params.a_max <= post.v - view.params.a_min
            )
            if not blocked:
                options.append(1 if abs(post.v - 1) <= max(view.params.a_max, -view.params.a_min) else 2)
        if not options or min(options) > deadline:
            return False
        return True
    _, stop_cluster = _braking_entries(view, post)
    if stop_cluster is not None:
        return False
    if post.cell != pose.cell and post.cell in view.protected_exit_cells(me):
        return False  # would pin an agent inside the box (block-the-box rule)
    return True


def traffic_orientation_law(view, me, action):
    """Footprint stays on drivable cells whose legal orientation admits the
    maneuver (total function: illegal geometry evaluates to False)."""
    pose = view.poses[me]
    try:
        view.resolve(pose, action)
    except IllegalAction:
        return False
    return True


def intersection_lane_change_law(view, me, action):
    if action.steer not in LANE_CHANGES:
        return True
    pose = view.poses[me]
    try:
        cells, _ = view.resolve(pose, action)
    except IllegalAction:
        return False
    net = view.network
    return not any(net.is_intersection(c) for c in cells)


def unprotected_left_turn_safety(view, me, action):
    """For left turns: the oncoming region across the intersection must be
    empty of agents, and the light must be green/yellow (gap turn) or in the
    all-red window (the waiting turn completes while cross traffic is still
    held)."""
    if action.steer != LEFT_TURN:
        return True
    pose = view.poses[me]
    try:
        cells, _ = view.resolve(pose, action)
    except IllegalAction:
        return False
    net = view.network
    cid = next(
        (net.intersection_id(c) for c in cells if net.intersection_id(c) is not None),
        None,
    )
    if cid is None:
        return True
    lights = view.lights
    state = lights.state_for_heading(cid, pose.heading, view.t)
    if state not in (GREEN, YELLOW) and not lights.all_red(cid, view.t):
        return False
    region = view.regions.get((cid, pose.heading), frozenset())
    for cell in region:
        occupant = view.occupancy.get(cell)
        if occupant is not None and occupant != me:
            return False
    return True


def _distance(view, me, pose):
    goal = view.goals.get(me)
    if goal is None:
        return 0
    return view.router.distance(pose.cell, pose.heading, goal)


def forward_progress(view, me, action):
    pose = view.poses[me]
    try:
        _, post = view.resolve(pose, action)
    except IllegalAction:
        return False
    before = _distance(view, me, pose)
    after = _distance(view, me, post)
    return after < before


def destination_reachability(view, me, action):
    """The goal stays reachable from the post state, including from the stop
    state of the forced braking the action commits the agent to (otherwise a
    braking agent could coast past its last turn-off and strand itself)."""
    pose = view.poses[me]
    try:
        _, post = view.resolve(pose, action)
    except IllegalAction:
        return False
    goal = view.goals.get(me)
    goal_cells = view.router.goal_cells(goal) if goal is not None else frozenset()
    if post.cell in goal_cells:
        return True
    stop = post
    for _, stop in braking_trajectory(post, view.params):
        if stop.cell in goal_cells:
            return True
    return _distance(view, me, stop) < INF


def maintains_progress(view, me, action):
    pose = view.poses[me]
    try:
        _, post = view.resolve(pose, action)
    except IllegalAction:
        return False
    return _distance(view, me, post) <= _distance(view, me, pose)


_ORACLES = {
    DYNAMIC_SAFETY: dynamic_safety,
    STATIC_SAFETY: static_safety,
    UNPROTECTED_LEFT_TURN: unprotected_left_turn_safety,
    TRAFFIC_LIGHT: traffic_light_law,
    ORIENTATION: traffic_orientation_law,
    CLEARANCE: intersection_clearance_law,
    INTERSECTION_LANE_CHANGE: intersection_lane_change_law,
    FORWARD_PROGRESS: forward_progress,
    DESTINATION_REACHABILITY: destination_reachability,
    MAINTAINS_PROGRESS: maintains_progress,
}


def eval_oracle(kind, view, me, action):
    return _ORACLES[kind](view, me, action)


def action_score(view, me, action, include_dynamic=True):
    """(per-tier satisfied counts, per-oracle bits)."""
    counts = []
    bits = {}
    for tier in TIERS:
        n = 0
        for kind in tier:
            if kind == DYNAMIC_SAFETY and not include_dynamic:
                continue
            ok = _ORACLES[kind](view, me, action)
            bits[kind] = ok
            n += ok
        counts.append(n)
    return tuple(counts), bits


def rank_actions(view, me, candidates, include_dynamic=True):
    """Actions ordered best-first by tiered score with deterministic ties.

    Ties break on higher acceleration, then steer preference (straight,
    right lane change, left lane change, right turn, left turn).
    """
    if not candidates:
        raise ValueError("empty candidate set")
    scored = []
    for action in candidates:
        score, bits = action_score(view, me, action, include_dynamic)
        scored.append((score, action.acc, -STEER_RANK[action.steer], action, bits))
    scored.sort(reverse=True)
    return [(item[3], item[0], item[4]) for item in scored]


def intended_action(view, me):
    """Top-ranked allowable action, dynamic safety excluded from scoring."""
    pose = view.poses[me]
    ranked = rank_actions(
        view, me, allowable_actions(pose, view.params, view.network), include_dynamic=False
    )
    return ranked[0][0]


def best_straight_action(view, me):
    """Top-ranked straight action, dynamic safety included."""
    pose = view.poses[me]
    candidates = [
        a
        for a in allowable_actions(pose, view.params, view.network)
        if a.steer == STRAIGHT
    ]
    ranked = rank_actions(view, me, candidates, include_dynamic=True)
    return ranked[0][0]


def backup_plan_safe(view, me):
    """Conjunction of the top-three-tier oracles on the backup plan action."""
    pose = view.poses[me]
    a_bp = backup_plan_action(pose, view.params)
    return all(_ORACLES[kind](view, me, a_bp) for kind in TOP_THREE_TIER_KINDS)


def explain_actions(view, me):
    """Per-action oracle bit-vectors for the debugging dump."""
    pose = view.poses[me]
    out = []
    for action in allowable_actions(pose, view.params, view.network):
        _, bits = action_score(view, me, action, include_dynamic=True)
        out.append((action, bits))
    return out
