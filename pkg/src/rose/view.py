"""Immutable per-step view of the game used by oracle evaluation.

The view carries the pre-step snapshot (poses, goals, tokens, occupancy) plus
the protocol context accumulated during the step: intentions, best straight
actions, conflict-resolution mandates and committed actions. Oracles are pure
functions of this view.

Presumed action of another agent, from the perspective of an evaluating
agent:

1. its committed action, once it has acted this step;
2. its mandated action, when conflict resolution forces one (losing
   receivers brake, losing pure senders take their best straight action);
3. during the intention phase, its backup plan action (worst case);
4. otherwise its intention, except that same-bundle agents of strictly
   lower precedence (which act later and will react) are presumed to brake.
"""

from .dynamics import backup_plan_action, resolve_action, stopping_displacement


class GameView:
    def __init__(
        self,
        network,
        params,
        lights,
        t,
        poses,
        goals,
        tokens,
        router,
        bubbles,
        regions,
        phase="intent",
    ):
        self.network = network
        self.params = params
        self.lights = lights
        self.t = t
        self.poses = poses
        self.goals = goals
        self.tokens = tokens
        self.router = router
        self.bubbles = bubbles
        self.regions = regions
        self.phase = phase
        self.occupancy = {pose.cell: aid for aid, pose in poses.items()}
        self.intentions = {}
        self.straights = {}
        self.flags = {}
        self.mandated = {}
        self.committed = {}
        self.placement = {}  # id -> (bundle or None, projection)
        self.agent_ids = sorted(poses)
        self.interaction_radius = 2 * (
            params.v_max + stopping_displacement(params.v_max, params)
        ) + 2
        self._resolve_cache = {}
        self._brake_cache = {}
        self._protected_cache = {}

    def resolve(self, pose, action):
        key = (pose, action)
        hit = self._resolve_cache.get(key)
        if hit is None:
            cells, post = resolve_action(pose, action, self.params, self.network)
            hit = (frozenset(cells), post)
            self._resolve_cache[key] = hit
        return hit

    def neighbors(self, me, pose=None):
        """Agents within interaction range of `me` (Chebyshev on cells)."""
        pose = pose or self.poses[me]
        r0, c0 = pose.cell
        rad = self.interaction_radius
        out = []
        for aid in self.agent_ids:
            if aid == me:
                continue
            r, c = self.poses[aid].cell
            if abs(r - r0) <= rad and abs(c - c0) <= rad:
                out.append(aid)
        return out

    def protected_exit_cells(self, me):
        """Escape cells of intersection boxes that currently hold agents.

        Ending an action on one of these would pin the box resident inside
        across a light change, so the clearance law rejects it. The resident
        protects its straight exit plus, once intentions are known, the
        landing cell of an intended turn.
        """
        key = (self.phase, me)
        cached = self._protected_cache.get(key)
        if cached is not None:
            return cached
        from .dynamics import TURNS
        from .geometry import step_cell

        net = self.network
        cells = set()
        for aid, pose in self.poses.items():
            if aid == me:
                continue
            cid = net.intersection_id(pose.cell)
            if cid is None:
                continue
            cur = pose.cell
            for _ in range(6):
                cur = step_cell(cur, pose.heading)
                if net.intersection_id(cur) != cid:
                    if net.is_drivable(cur):
                        cells.add(cur)
                    break
            intent = self.intentions.get(aid)
            if intent is not None and intent.steer in TURNS:
                try:
                    _, post = self.resolve(pose, intent)
                    cells.add(post.cell)
                except Exception:
                    pass
        cached = frozenset(cells)
        self._protected_cache[key] = cached
        return cached

    def presumed_action(self, other, me):
        act = self.committed.get(other)
        if act is not None:
            return act
        act = self.mandated.get(other)
        if act is not None:
            return act
        pose = self.poses[other]
        if self.phase == "intent":
            return backup_plan_action(pose, self.params)
        mine = self.placement.get(me)
        theirs = self.placement.get(other)
        if (
            mine is not None
            and theirs is not None
            and mine[0] is not None
            and mine[0] == theirs[0]
            and theirs[1] < mine[1]
        ):
            return backup_plan_action(pose, self.params)
        act = self.intentions.get(other)
        if act is not None:
            return act
        return backup_plan_action(pose, self.params)
