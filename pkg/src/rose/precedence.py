"""Local precedence relation and the global turn-order polyforest.

Within a bundle the agent longitudinally ahead has higher precedence; agents
at equal projection are equivalent (they act simultaneously); agents in
different bundles are incomparable. Agents inside an intersection keep the
bundle of the lane they entered from, recovered by walking back along their
heading.
"""

from .geometry import opposite, projection, step_cell

HIGHER = "higher"
LOWER = "lower"
EQUIVALENT = "equivalent"
INCOMPARABLE = "incomparable"

_BACKTRACE_LIMIT = 8


def agent_placement(network, pose):
    """(bundle id or None, longitudinal projection) for precedence purposes."""
    cell = pose.cell
    if not network.is_intersection(cell):
        lane_id = network.lane_of_cell.get(cell)
        if lane_id is None:
            return None, projection(cell, pose.heading)
        bundle_id = network.bundle_of_lane[lane_id]
        return bundle_id, projection(cell, network.bundles[bundle_id].heading)
    back = cell
    for _ in range(_BACKTRACE_LIMIT):
        back = step_cell(back, opposite(pose.heading))
        if not network.is_intersection(back):
            lane_id = network.lane_of_cell.get(back)
            if lane_id is None:
                break
            bundle_id = network.bundle_of_lane[lane_id]
            if network.bundles[bundle_id].heading != pose.heading:
                break
            return bundle_id, projection(cell, pose.heading)
        if not network.is_drivable(back):
            break
    return None, projection(cell, pose.heading)


def compare(network, pose_a, pose_b):
    """Relation of pose_a to pose_b: higher/lower/equivalent/incomparable."""
    bundle_a, proj_a = agent_placement(network, pose_a)
    bundle_b, proj_b = agent_placement(network, pose_b)
    if bundle_a is None or bundle_b is None or bundle_a != bundle_b:
        return INCOMPARABLE
    if proj_a > proj_b:
        return HIGHER
    if proj_a < proj_b:
        return LOWER
    return EQUIVALENT


def build_turn_order(network, poses):
    """Execution order over equivalence classes of agents.

    Returns (ordered class list, edge list, placements). Classes are grouped
    by (bundle, projection); edges run from lower to higher precedence inside
    a bundle, forming a polyforest (each bundle contributes a chain). The
    order is deterministic: trees sorted by their smallest member id, classes
    within a tree front to back.
    """
    placements = {aid: agent_placement(network, pose) for aid, pose in poses.items()}
    classes = {}
    for aid in sorted(poses):
        bundle, proj = placements[aid]
        key = (bundle, proj) if bundle is not None else (None, aid)
        classes.setdefault(key, []).append(aid)

    trees = {}
    for key, members in classes.items():
        bundle = key[0]
        tree_key = ("b", bundle) if bundle is not None else ("solo", members[0])
        trees.setdefault(tree_key, []).append(key)

    ordered = []
    edges = []
    tree_rank = sorted(
        trees,
        key=lambda tk: min(min(classes[k]) for k in trees[tk]),
    )
    for tk in tree_rank:
        keys = trees[tk]
        if tk[0] == "b":
            keys.sort(key=lambda k: -k[1])  # front (largest projection) first
            for earlier, later in zip(keys, keys[1:]):
                edges.append((tuple(classes[later]), tuple(classes[earlier])))
        for key in keys:
            ordered.append(tuple(classes[key]))
    return ordered, edges, placements


def forest_is_acyclic(ordered_classes, edges):
    """Explicit acyclicity check of the quotient graph (protocol assertion)."""
    index = {cls: i for i, cls in enumerate(ordered_classes)}
    succ = {}
    for lo, hi in edges:
        succ.setdefault(index[lo], set()).add(index[hi])
    seen_state = {}
    for start in succ:
        if seen_state.get(start):
            continue
        stack = [(start, iter(succ.get(start, ())))]
        onpath = {start}
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if nxt in onpath:
                    return False
                if not seen_state.get(nxt):
                    onpath.add(nxt)
                    stack.append((nxt, iter(succ.get(nxt, ()))))
                    advanced = True
                    break
            if not advanced:
                seen_state[node] = True
                onpath.discard(node)
                stack.pop()
    return True
