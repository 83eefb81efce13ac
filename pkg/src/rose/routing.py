"""Route planning on the lane-level maneuver graph.

Nodes are (cell, heading) pairs; edges are the unit maneuvers an agent can
string together at velocity 1: one cell forward, a lane change (one cell
forward plus one lateral), or a turn through an intersection corner. Edge
weights are forward cells traversed, so distances are comparable with
velocities and stopping distances.
"""

from collections import deque
from heapq import heappop, heappush

from .dynamics import (
    LEFT_LANE_CHANGE,
    LEFT_TURN,
    RIGHT_LANE_CHANGE,
    RIGHT_TURN,
    STRAIGHT,
    turn_path,
)
from .geometry import left_of, right_of, step_cell

INF = 1 << 30


def maneuver_edges(network, cell, heading):
    """Outgoing maneuver edges from (cell, heading) as (node, weight, kind)."""
    edges = []
    ok = lambda c, h: network.is_drivable(c) and h in network.orientations(c)
    fwd = step_cell(cell, heading)
    if ok(fwd, heading):
        edges.append(((fwd, heading), 1, STRAIGHT))
    for steer, lat in ((RIGHT_LANE_CHANGE, right_of(heading)), (LEFT_LANE_CHANGE, left_of(heading))):
        side = step_cell(cell, lat)
        dst = step_cell(side, heading)
        if (
            ok(side, heading)
            and ok(dst, heading)
            and not network.is_intersection(side)
            and not network.is_intersection(dst)
            and not network.is_intersection(cell)
        ):
            edges.append(((dst, heading), 1, steer))
    for steer in (RIGHT_TURN, LEFT_TURN):
        resolved = turn_path(network, cell, heading, steer)
        if resolved is not None:
            swept, end, new_h = resolved
            edges.append(((end, new_h), len(swept), steer))
    return edges


class Router:
    """Distance-to-goal maps over the maneuver graph, computed lazily.

    Laterally adjacent sinks of one bundle form a single physical exit
    boundary: a goal on such a sink is treated as reachable at any of the
    boundary's cells (otherwise two agents with crossed exit lanes can wall
    each other in at the end of a dead-end road).
    """

    def __init__(self, network):
        self.network = network
        self._nodes = [
            (cell, h)
            for cell in sorted(network.points)
            if network.is_drivable(cell)
            for h in network.orientations(cell)
        ]
        self._fwd = {node: maneuver_edges(network, *node) for node in self._nodes}
        self._rev = {node: [] for node in self._nodes}
        for node, edges in self._fwd.items():
            for target, w, kind in edges:
                if target in self._rev:
                    self._rev[target].append((node, w, kind))
        self._dist_cache = {}

    def goal_cells(self, goal):
        """The goal plus equivalent exit cells (same-bundle adjacent sinks)."""
        net = self.network
        if goal not in net.sinks or goal not in net.lane_of_cell:
            return frozenset((goal,))
        bundle = net.bundle_of_lane[net.lane_of_cell[goal]]
        cells = {goal}
        for s in net.sinks:
            if s == goal or s not in net.lane_of_cell:
                continue
            if net.bundle_of_lane[net.lane_of_cell[s]] != bundle:
                continue
            if abs(s[0] - goal[0]) + abs(s[1] - goal[1]) == 1:
                cells.add(s)
        return frozenset(cells)

    def distance_map(self, goal):
        """Shortest forward-cell distance from every node to the goal cell."""
        cached = self._dist_cache.get(goal)
        if cached is not None:
            return cached
        dist = {}
        heap = []
        for cell in self.goal_cells(goal):
            for h in self.network.orientations(cell):
                node = (cell, h)
                if node in self._rev:
                    dist[node] = 0
                    heappush(heap, (0, node))
        while heap:
            d, node = heappop(heap)
            if d > dist.get(node, INF):
                continue
            for prev, w, _ in self._rev[node]:
                nd = d + w
                if nd < dist.get(prev, INF):
                    dist[prev] = nd
                    heappush(heap, (nd, prev))
        self._dist_cache[goal] = dist
        return dist

    def distance(self, cell, heading, goal):
        return self.distance_map(goal).get((cell, heading), INF)

    def reachable(self, cell, heading, goal):
        return self.distance(cell, heading, goal) < INF

    def plan_route(self, cell, heading, goal):
        """Ordered critical cells to the goal: maneuver cells plus the goal.

        Critical cells are where a non-straight maneuver starts. Raises
        ValueError when the goal is unreachable.
        """
        dmap = self.distance_map(goal)
        node = (cell, heading)
        if dmap.get(node, INF) >= INF:
            raise ValueError(f"goal {goal} unreachable from {node}")
        goal_cells = self.goal_cells(goal)
        critical = []
        while node[0] not in goal_cells:
            d = dmap[node]
            step = None
            for target, w, kind in self._fwd[node]:
                if dmap.get(target, INF) + w == d:
                    step = (target, kind)
                    break
            if step is None:  # pragma: no cover - dmap consistency guard
                raise RuntimeError("inconsistent distance map")
            target, kind = step
            if kind != STRAIGHT:
                critical.append(node[0])
            node = target
        critical.append(node[0])
        return tuple(critical)
