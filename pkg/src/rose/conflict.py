"""Conflict detection, requests, clusters and token-based resolution.

A lane-changing agent whose intention conflicts with an equal-or-lower
precedence agent of the same heading inside its bubble sends that agent a
conflict request, unless its maximum-yielding-not-enough flag is raised.
Requests induce per-agent clusters; resolution runs over the connected
components of the request graph and at most one agent wins per component:
the one with the most tokens, smaller id on ties.
"""

from .dynamics import (
    IllegalAction,
    LANE_CHANGES,
    backup_plan_action,
    braking_conflict,
)
from .geometry import projection
from .precedence import EQUIVALENT, HIGHER, compare


def in_conflict(view, id_a, action_a, id_b, action_b):
    """Agent-action conflict: swept footprints overlap, or the post-move
    configuration no longer survives simultaneous maximal braking (the agent
    behind has lost its safe backup plan)."""
    pose_a, pose_b = view.poses[id_a], view.poses[id_b]
    try:
        fp_a, post_a = view.resolve(pose_a, action_a)
        fp_b, post_b = view.resolve(pose_b, action_b)
    except IllegalAction:
        return True
    if fp_a & fp_b:
        return True
    return braking_conflict(post_a, post_b, view.params)


def max_yielding_flag(view, me, intent):
    """True when the intended lane change would break some rear agent's
    backup plan even if that agent braked maximally."""
    if intent.steer not in LANE_CHANGES:
        return False
    pose = view.poses[me]
    try:
        fp, post = view.resolve(pose, intent)
    except IllegalAction:
        return True
    params = view.params
    my_proj = projection(post.cell, post.heading)
    for other in view.neighbors(me):
        other_pose = view.poses[other]
        if other_pose.heading != pose.heading:
            continue
        a_bp = backup_plan_action(other_pose, params)
        ofp, opost = view.resolve(other_pose, a_bp)
        if projection(opost.cell, post.heading) > my_proj:
            continue  # agents ending up strictly ahead are the agent's own risk
        if fp & ofp or braking_conflict(post, opost, params):
            return True
    return False


def may_send(view, sender, receiver):
    """The six send criteria for a conflict request."""
    intent = view.intentions.get(sender)
    if intent is None or intent.steer not in LANE_CHANGES:
        return False
    sender_pose = view.poses[sender]
    receiver_pose = view.poses[receiver]
    if not view.bubbles.contains(sender_pose, receiver_pose.cell):
        return False
    rel = compare(view.network, sender_pose, receiver_pose)
    if rel not in (EQUIVALENT, HIGHER):
        return False
    if sender_pose.heading != receiver_pose.heading:
        return False
    receiver_intent = view.intentions.get(receiver)
    if receiver_intent is None:
        return False
    if not in_conflict(view, sender, intent, receiver, receiver_intent):
        return False
    if view.flags.get(sender):
        return False
    return True


def collect_requests(view):
    """All (sender, receiver) request edges for this step, in id order."""
    edges = []
    for sender in view.agent_ids:
        intent = view.intentions.get(sender)
        if intent is None or intent.steer not in LANE_CHANGES:
            continue
        if view.flags.get(sender):
            continue
        for receiver in view.neighbors(sender):
            if may_send(view, sender, receiver):
                edges.append((sender, receiver))
    return edges


def build_clusters(view, requests):
    """Per-agent clusters (request-graph neighborhoods) and the connected
    components acting as resolution scopes."""
    neighborhood = {aid: set() for aid in view.agent_ids}
    parent = {aid: aid for aid in view.agent_ids}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for sender, receiver in requests:
        neighborhood[sender].add(receiver)
        neighborhood[receiver].add(sender)
        ra, rb = find(sender), find(receiver)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    components = {}
    for aid in view.agent_ids:
        if neighborhood[aid]:
            components.setdefault(find(aid), set()).add(aid)
    return neighborhood, [frozenset(v) for _, v in sorted(components.items())]


def resolve(components, tokens):
    """Winner per component: strictly max (tokens, smaller id).

    Agents outside every component win vacuously (they face no contest);
    they are not listed in the returned winner set.
    """
    winners = set()
    for comp in components:
        best = max(comp, key=lambda aid: (tokens.get(aid, 0), -aid))
        winners.add(best)
    return winners


def roles_from_requests(view, requests):
    roles = {}
    for sender, receiver in requests:
        s = roles.get(sender)
        roles[sender] = "both" if s == "receiver" or s == "both" else "sender"
        r = roles.get(receiver)
        roles[receiver] = "both" if r == "sender" or r == "both" else "receiver"
    return roles


def update_tokens(token_count, made_forward_progress):
    """Tokens count consecutive steps without a forward-progress action."""
    return 0 if made_forward_progress else token_count + 1
