"""Road network parsing and decomposition.

A map is a rectangular grid of single-character cell codes:

  ``>`` ``<`` ``^`` ``v``  drivable cell with a single legal orientation
  ``+``                    intersection cell; orientations inferred from the
                           cells feeding and leaving its cluster
  ``.``                    non-drivable background
  ``T``                    traffic-light marker; must sit in the
                           8-neighborhood of an intersection cluster

The parsed network is immutable and decomposed into lanes (maximal collinear
same-orientation runs, continuing across intersections), bundles (groups of
adjacent same-direction lanes), road segments (bundle pieces between
intersections) and the road-segment dependency graph.
"""

from dataclasses import dataclass, field

from .geometry import (
    CHAR_BY_HEADING,
    DIR_VEC,
    HEADING_CHARS,
    axis_of,
    opposite,
    projection,
    step_cell,
)

CELL_CODES = set(">^v<+.T")


class MapFormatError(ValueError):
    pass


@dataclass(frozen=True)
class GridPoint:
    coord: tuple
    drivable: bool
    legal_orientations: tuple  # sorted tuple of heading ints


@dataclass(frozen=True)
class Lane:
    lane_id: int
    heading: int
    cells: tuple  # ordered along travel direction


@dataclass(frozen=True)
class Bundle:
    bundle_id: int
    heading: int
    lane_ids: tuple


@dataclass(frozen=True)
class RoadSegment:
    segment_id: int
    bundle_id: int
    cells: frozenset


@dataclass
class RoadNetwork:
    rows: int
    cols: int
    points: dict  # cell -> GridPoint
    light_markers: frozenset
    intersections: dict  # cluster id -> frozenset of cells
    intersection_of: dict  # cell -> cluster id
    lanes: list
    bundles: list
    lane_of_cell: dict
    bundle_of_lane: dict
    segments: list
    segment_of_cell: dict
    sources: tuple
    sinks: tuple
    dependency_edges: frozenset = field(default_factory=frozenset)

    # -- world interface used by the dynamics ---------------------------
    def in_bounds(self, cell):
        r, c = cell
        return 0 <= r < self.rows and 0 <= c < self.cols

    def is_drivable(self, cell):
        p = self.points.get(cell)
        return p is not None and p.drivable

    def orientations(self, cell):
        p = self.points.get(cell)
        return p.legal_orientations if p is not None else ()

    def is_intersection(self, cell):
        return cell in self.intersection_of

    def intersection_id(self, cell):
        return self.intersection_of.get(cell)

    # -- queries ---------------------------------------------------------
    def lane_of(self, cell):
        lane_id = self.lane_of_cell.get(cell)
        if lane_id is None:
            raise KeyError(f"{cell} is not a lane cell")
        return lane_id

    def bundle_of(self, cell):
        return self.bundle_of_lane[self.lane_of(cell)]

    def bundle_heading(self, bundle_id):
        return self.bundles[bundle_id].heading

    def longitudinal_projection(self, cell, bundle_id):
        bundle = self.bundles[bundle_id]
        lane_cells = {c for lid in bundle.lane_ids for c in self.lanes[lid].cells}
        if cell not in lane_cells:
            raise KeyError(f"{cell} outside bundle {bundle_id}")
        return projection(cell, bundle.heading)

    def drivable_cells(self):
        return [c for c, p in self.points.items() if p.drivable]


class UniformWorld:
    """Unbounded grid where every cell is a lane cell of one heading.

    Used to compute translation-invariant perception templates: the geometry
    around an agent on a straight multi-lane road does not depend on its
    absolute position.
    """

    def __init__(self, heading):
        self._orient = (heading,)

    def in_bounds(self, cell):
        return True

    def is_drivable(self, cell):
        return True

    def orientations(self, cell):
        return self._orient

    def is_intersection(self, cell):
        return False

    def intersection_id(self, cell):
        return None


def _neighbors4(cell):
    r, c = cell
    return ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1))


def _neighbors8(cell):
    r, c = cell
    return [
        (r + dr, c + dc)
        for dr in (-1, 0, 1)
        for dc in (-1, 0, 1)
        if (dr, dc) != (0, 0)
    ]


def parse_map(text, max_bundle_lanes=2):
    """Parse CSV map text into a fully decomposed RoadNetwork.

    ``max_bundle_lanes`` enforces the two-lane bundle limit the protocol
    assumes; pass None to decompose wider roads (analysis only).
    """
    lines = [line for line in text.rstrip("\n").split("\n")]
    if not lines or not lines[0]:
        raise MapFormatError("empty map")
    cols = len(lines[0])
    grid = {}
    for r, line in enumerate(lines):
        if len(line) != cols:
            raise MapFormatError(f"non-rectangular input at row {r}")
        for c, ch in enumerate(line):
            if ch not in CELL_CODES:
                raise MapFormatError(f"unknown cell code {ch!r} at {(r, c)}")
            grid[(r, c)] = ch
    rows = len(lines)

    plus_cells = {cell for cell, ch in grid.items() if ch == "+"}
    light_markers = frozenset(cell for cell, ch in grid.items() if ch == "T")

    # Intersection clusters: 4-connected components of '+' cells.
    intersections = {}
    intersection_of = {}
    seen = set()
    for cell in sorted(plus_cells):
        if cell in seen:
            continue
        comp = []
        stack = [cell]
        seen.add(cell)
        while stack:
            cur = stack.pop()
            comp.append(cur)
            for nb in _neighbors4(cur):
                if nb in plus_cells and nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        cluster_id = len(intersections)
        intersections[cluster_id] = frozenset(comp)
        for c in comp:
            intersection_of[c] = cluster_id

    # Every intersection must have a light marker in its 8-neighborhood.
    for cluster_id, cells in intersections.items():
        ring = {nb for cell in cells for nb in _neighbors8(cell)}
        if not ring & light_markers:
            raise MapFormatError(
                f"intersection {cluster_id} at {sorted(cells)[0]} has no adjacent light cell"
            )

    # Cluster orientations: union of orientations feeding into or leaving the
    # cluster through adjacent lane cells.
    cluster_orient = {cid: set() for cid in intersections}
    for cid, cells in intersections.items():
        for cell in cells:
            for h, ch in CHAR_BY_HEADING.items():
                feeder = step_cell(cell, opposite(h))
                if grid.get(feeder) == ch:
                    cluster_orient[cid].add(h)
                leaver = step_cell(cell, h)
                if grid.get(leaver) == ch:
                    cluster_orient[cid].add(h)
    for cid, orient in cluster_orient.items():
        if not orient:
            raise MapFormatError(f"intersection {cid} has no feeding or leaving lanes")

    points = {}
    for cell, ch in grid.items():
        if ch in HEADING_CHARS:
            points[cell] = GridPoint(cell, True, (HEADING_CHARS[ch],))
        elif ch == "+":
            lo = tuple(sorted(cluster_orient[intersection_of[cell]]))
            points[cell] = GridPoint(cell, True, lo)
        else:
            points[cell] = GridPoint(cell, False, ())

    # Lanes: maximal collinear same-orientation runs of lane cells; a run
    # continues across intersection cells lying on the same line.
    lane_cells = {cell for cell, ch in grid.items() if ch in HEADING_CHARS}
    lanes = []
    lane_of_cell = {}
    for cell in sorted(lane_cells):
        if cell in lane_of_cell:
            continue
        h = HEADING_CHARS[grid[cell]]
        back, fwd = opposite(h), h
        run = [cell]
        for direction in (back, fwd):
            cur = cell
            while True:
                nxt = step_cell(cur, direction)
                if nxt in lane_cells and HEADING_CHARS[grid[nxt]] == h:
                    run.append(nxt)
                    cur = nxt
                elif nxt in intersection_of:
                    cur = nxt  # skip over the intersection, stay on the line
                else:
                    break
        run.sort(key=lambda c: projection(c, h))
        lane_id = len(lanes)
        lanes.append(Lane(lane_id, h, tuple(run)))
        for c in run:
            lane_of_cell[c] = lane_id

    # Bundles: transitive closure of lateral adjacency between same-direction
    # lanes.
    adjacency = {lane.lane_id: set() for lane in lanes}
    for lane in lanes:
        for c in lane.cells:
            for nb in _neighbors4(c):
                other = lane_of_cell.get(nb)
                if other is None or other == lane.lane_id:
                    continue
                if lanes[other].heading == lane.heading:
                    adjacency[lane.lane_id].add(other)
                    adjacency[other].add(lane.lane_id)
    bundles = []
    bundle_of_lane = {}
    for lane in lanes:
        if lane.lane_id in bundle_of_lane:
            continue
        group = []
        stack = [lane.lane_id]
        bundle_of_lane[lane.lane_id] = len(bundles)
        while stack:
            cur = stack.pop()
            group.append(cur)
            for nb in adjacency[cur]:
                if nb not in bundle_of_lane:
                    bundle_of_lane[nb] = len(bundles)
                    stack.append(nb)
        bundles.append(Bundle(len(bundles), lane.heading, tuple(sorted(group))))

    if max_bundle_lanes is not None:
        for bundle in bundles:
            if len(bundle.lane_ids) > max_bundle_lanes:
                raise MapFormatError(
                    f"bundle {bundle.bundle_id} has {len(bundle.lane_ids)} lanes "
                    f"(limit {max_bundle_lanes})"
                )

    # Road segments: connected components of a bundle's cells (intersection
    # cells are not lane cells, so bundles split naturally at intersections).
    segments = []
    segment_of_cell = {}
    for bundle in bundles:
        cells = sorted(
            c for lid in bundle.lane_ids for c in lanes[lid].cells
        )
        cellset = set(cells)
        for cell in cells:
            if cell in segment_of_cell:
                continue
            comp = []
            stack = [cell]
            segment_of_cell[cell] = len(segments)
            while stack:
                cur = stack.pop()
                comp.append(cur)
                for nb in _neighbors4(cur):
                    if nb in cellset and nb not in segment_of_cell:
                        segment_of_cell[nb] = len(segments)
                        stack.append(nb)
            segments.append(
                RoadSegment(len(segments), bundle.bundle_id, frozenset(comp))
            )

    # Sources and sinks: boundary lane cells whose orientation points into or
    # out of the grid.
    sources = []
    sinks = []
    for cell in sorted(lane_cells):
        h = HEADING_CHARS[grid[cell]]
        behind = step_cell(cell, opposite(h))
        ahead = step_cell(cell, h)
        if not (0 <= behind[0] < rows and 0 <= behind[1] < cols):
            sources.append(cell)
        if not (0 <= ahead[0] < rows and 0 <= ahead[1] < cols):
            sinks.append(cell)

    net = RoadNetwork(
        rows=rows,
        cols=cols,
        points=points,
        light_markers=light_markers,
        intersections=intersections,
        intersection_of=intersection_of,
        lanes=lanes,
        bundles=bundles,
        lane_of_cell=lane_of_cell,
        bundle_of_lane=bundle_of_lane,
        segments=segments,
        segment_of_cell=segment_of_cell,
        sources=tuple(sources),
        sinks=tuple(sinks),
    )
    net.dependency_edges = build_dependency_graph(net)
    return net


def serialize_map(network):
    """Canonical text form; parse_map(serialize_map(n)) reproduces n."""
    out = []
    for r in range(network.rows):
        row = []
        for c in range(network.cols):
            cell = (r, c)
            if cell in network.intersection_of:
                row.append("+")
            elif cell in network.light_markers:
                row.append("T")
            else:
                p = network.points[cell]
                if not p.drivable:
                    row.append(".")
                else:
                    row.append(CHAR_BY_HEADING[p.legal_orientations[0]])
        out.append("".join(row))
    return "\n".join(out) + "\n"


def legal_moves(network, cell):
    """Directed single-cell moves respecting legal orientations."""
    moves = []
    for h in network.orientations(cell):
        nxt = step_cell(cell, h)
        if network.is_drivable(nxt) and h in network.orientations(nxt):
            moves.append((h, nxt))
    return moves


def build_dependency_graph(network):
    """Edges (rs1, rs2) where progress on rs1 needs clearance on rs2.

    rs2 is any segment reachable from the downstream end of rs1 through one
    intersection crossing.
    """
    edges = set()
    for seg in network.segments:
        heading = network.bundles[seg.bundle_id].heading
        # Downstream boundary cells: segment cells whose forward neighbor is
        # an intersection cell.
        for cell in seg.cells:
            nxt = step_cell(cell, heading)
            if not network.is_intersection(nxt):
                continue
            cluster = network.intersection_id(nxt)
            # Walk every orientation-respecting path through this cluster.
            stack = [(nxt, h) for h in (heading,)]
            visited = set()
            while stack:
                cur, h = stack.pop()
                if (cur, h) in visited:
                    continue
                visited.add((cur, h))
                for nh in network.orientations(cur):
                    # Continue straight or change direction inside the box.
                    if nh == opposite(h):
                        continue
                    nxt2 = step_cell(cur, nh)
                    if not network.is_drivable(nxt2):
                        continue
                    if network.intersection_id(nxt2) == cluster:
                        stack.append((nxt2, nh))
                    elif nh in network.orientations(nxt2) and not network.is_intersection(nxt2):
                        target = network.segment_of_cell.get(nxt2)
                        if target is not None and target != seg.segment_id:
                            edges.add((seg.segment_id, target))
    return frozenset(edges)


def dependency_is_cyclic(network):
    edges = network.dependency_edges
    succ = {}
    for a, b in edges:
        succ.setdefault(a, []).append(b)
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {}
    for start in succ:
        if color.get(start, WHITE) != WHITE:
            continue
        stack = [(start, iter(succ.get(start, ())))]
        color[start] = GRAY
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                state = color.get(nxt, WHITE)
                if state == GRAY:
                    return True
                if state == WHITE:
                    color[nxt] = GRAY
                    stack.append((nxt, iter(succ.get(nxt, ()))))
                    advanced = True
                    break
            if not advanced:
                color[node] = BLACK
                stack.pop()
    return False


def smallest_loop_size(network):
    """Cell count of the minimal legal-orientation cycle, intersections excluded.

    Returns None when the network has no directed cycle. Intersection cells
    participate in cycles but do not count toward the size.
    """
    import heapq

    nodes = [c for c in network.drivable_cells()]
    succ = {c: [nxt for _, nxt in legal_moves(network, c)] for c in nodes}
    weight = {c: (0 if network.is_intersection(c) else 1) for c in nodes}

    best = None
    for start in nodes:
        # Shortest weighted distance from each successor of `start` back to
        # `start`; cycle weight adds the start cell itself.
        dist = {}
        heap = []
        for nxt in succ[start]:
            w = weight[nxt] if nxt != start else 0
            if nxt == start:
                candidate = weight[start]
                best = candidate if best is None else min(best, candidate)
                continue
            if w < dist.get(nxt, 1 << 30):
                dist[nxt] = w
                heapq.heappush(heap, (w, nxt))
        while heap:
            d, cur = heapq.heappop(heap)
            if d > dist.get(cur, 1 << 30):
                continue
            if cur == start:
                continue
            for nxt in succ[cur]:
                if nxt == start:
                    candidate = d + weight[start]
                    best = candidate if best is None else min(best, candidate)
                    continue
                nd = d + weight[nxt]
                if nd < dist.get(nxt, 1 << 30):
                    dist[nxt] = nd
                    heapq.heappush(heap, (nd, nxt))
    return best
