"""The quasi-simultaneous step loop.

Each step runs fixed phases against one immutable snapshot: every agent
computes its intended and best straight action; lane-changers raise flags and
exchange conflict requests; clusters resolve by token count; agents then
select actions in turn-order (front of a bundle first, equivalence classes
simultaneously); transitions apply jointly; agents that reached their goal
leave; new agents spawn at free sources; lights advance.

The engine is deterministic: (map, config, seed) fully determine the run.
"""

import random
from dataclasses import dataclass

from .bubble import BubbleTable, oncoming_regions
from .conflict import (
    build_clusters,
    collect_requests,
    max_yielding_flag,
    resolve,
    roles_from_requests,
    update_tokens,
)
from .dynamics import (
    Action,
    IllegalAction,
    Pose,
    backup_plan_action,
    braking_conflict,
    resolve_action,
)
from .geometry import HEADING_NAMES
from .lights import HORIZONTAL, VERTICAL, LightController
from .oracles import backup_plan_safe, best_straight_action, explain_actions, intended_action
from .precedence import build_turn_order, forest_is_acyclic
from .routing import INF, Router
from .selection import ROLE_BOTH, ROLE_NEITHER, ROLE_RECEIVER, ROLE_SENDER, SelectionInput, select_action
from .view import GameView

EXIT_OK = 0
EXIT_COLLISION = 2
EXIT_BACKUP_SAFETY = 3
EXIT_PRECEDENCE_CYCLE = 4
EXIT_CONFIG = 5

SCHEMA_VERSION = 1
ENGINE_VERSION = "rose-0.1.0"


class SimulationFault(RuntimeError):
    def __init__(self, kind, exit_code, message):
        super().__init__(message)
        self.kind = kind
        self.exit_code = exit_code


@dataclass
class AgentRecord:
    agent_id: int
    pose: Pose
    goal: tuple
    tokens: int = 0
    plan: tuple = ()
    spawned_at: int = 0


class Game:
    """One deterministic simulation over a parsed network."""

    def __init__(self, network, config, explain=None):
        self.network = network
        self.config = config
        self.params = config.params
        self.lights = LightController(network, default=config.lights)
        self.router = Router(network)
        self.bubbles = BubbleTable(self.params)
        self.regions = oncoming_regions(network, self.params)
        self.t = 0
        self.agents = {}
        self.next_id = 0
        self.spawned = 0
        self.completed = 0
        self.max_token_seen = 0
        self.explain = explain or (lambda *a: None)
        self._spawn_rng = {
            cell: random.Random(f"{config.seed}:spawn:{cell[0]}:{cell[1]}")
            for cell in network.sources
        }
        self._source_heading = {
            cell: network.points[cell].legal_orientations[0] for cell in network.sources
        }
        self._source_sinks = {}
        for cell in network.sources:
            h = self._source_heading[cell]
            sinks = [
                s
                for s in network.sinks
                if s != cell and self.router.reachable(cell, h, s)
            ]
            self._source_sinks[cell] = sorted(sinks)
        self._place_initial_agents()

    # -- setup ---------------------------------------------------------
    def _place_initial_agents(self):
        from .config import ConfigError

        taken = set()
        for placement in self.config.placements:
            cell = placement.cell
            if not self.network.is_drivable(cell):
                raise ConfigError(f"placement on non-drivable cell {cell}")
            if cell in taken:
                raise ConfigError(f"overlapping placements at {cell}")
            if placement.heading not in self.network.orientations(cell):
                raise ConfigError(f"heading illegal at {cell}")
            if not (self.params.v_min <= placement.velocity <= self.params.v_max):
                raise ConfigError(f"velocity {placement.velocity} out of bounds")
            if not self.network.is_drivable(placement.goal):
                raise ConfigError(f"goal {placement.goal} not drivable")
            taken.add(cell)
            pose = Pose(cell, placement.heading, placement.velocity)
            self._add_agent(pose, placement.goal, tokens=placement.tokens)
        if self.agents:
            view = self._base_view()
            for aid in sorted(self.agents):
                if not backup_plan_safe(view, aid):
                    raise ConfigError(
                        f"agent {aid} at {self.agents[aid].pose.cell} has no safe backup plan"
                    )

    def _add_agent(self, pose, goal, tokens=0):
        aid = self.next_id
        self.next_id += 1
        try:
            plan = self.router.plan_route(pose.cell, pose.heading, goal)
        except ValueError:
            from .config import ConfigError

            raise ConfigError(f"goal {goal} unreachable from {pose.cell}") from None
        self.agents[aid] = AgentRecord(aid, pose, goal, tokens, plan, self.t)
        self.spawned += 1
        return aid

    # -- views ----------------------------------------------------------
    def _base_view(self, phase="intent"):
        poses = {aid: rec.pose for aid, rec in self.agents.items()}
        goals = {aid: rec.goal for aid, rec in self.agents.items()}
        tokens = {aid: rec.tokens for aid, rec in self.agents.items()}
        return GameView(
            self.network,
            self.params,
            self.lights,
            self.t,
            poses,
            goals,
            tokens,
            self.router,
            self.bubbles,
            self.regions,
            phase=phase,
        )

    # -- step -----------------------------------------------------------
    def check_backup_safety(self):
        """Assertion P on the current state: every agent's backup plan safe."""
        view = self._base_view()
        return [aid for aid in view.agent_ids if not backup_plan_safe(view, aid)]

    def step(self):
        """Run one full protocol step; returns the step record."""
        p_violations = self.check_backup_safety() if self.config.checks else []
        view = self._base_view()
        ordered_classes, forest_edges, placements = build_turn_order(
            self.network, view.poses
        )
        view.placement = placements
        if not forest_is_acyclic(ordered_classes, forest_edges):
            raise SimulationFault(
                "precedence-cycle", EXIT_PRECEDENCE_CYCLE, f"t={self.t}"
            )

        for aid in view.agent_ids:
            view.intentions[aid] = intended_action(view, aid)
        for aid in view.agent_ids:
            view.straights[aid] = best_straight_action(view, aid)
        for aid in view.agent_ids:
            view.flags[aid] = max_yielding_flag(view, aid, view.intentions[aid])

        requests = collect_requests(view)
        neighborhoods, components = build_clusters(view, requests)
        winners = resolve(components, view.tokens)
        roles = roles_from_requests(view, requests)
        contested = set().union(*components) if components else set()
        win_flags = {
            aid: (aid in winners) if aid in contested else True
            for aid in view.agent_ids
        }
        for aid in contested:
            if win_flags[aid]:
                continue
            role = roles.get(aid, ROLE_NEITHER)
            if role in (ROLE_RECEIVER, ROLE_BOTH):
                view.mandated[aid] = backup_plan_action(view.poses[aid], self.params)
            elif role == ROLE_SENDER:
                view.mandated[aid] = view.straights[aid]

        view.phase = "select"
        chosen = {}
        branches = {}
        forced = self.config.force_actions
        for cls in ordered_classes:
            batch = {}
            for aid in cls:
                override = forced.get(aid, {}).get(self.t)
                if override is not None:
                    action = Action(*override) if not isinstance(override, Action) else override
                    resolve_action(view.poses[aid], action, self.params, self.network)
                    batch[aid] = (action, "forced")
                    continue
                sel = SelectionInput(
                    intent=view.intentions[aid],
                    straight=view.straights[aid],
                    role=roles.get(aid, ROLE_NEITHER),
                    winner=win_flags[aid],
                    flag=view.flags[aid],
                )
                batch[aid] = select_action(view, aid, sel)
            for aid, (action, branch) in batch.items():
                view.committed[aid] = action
                chosen[aid] = action
                branches[aid] = branch
            for aid in cls:
                self.explain(self.t, aid, view, chosen[aid], branches[aid])

        # Apply transitions jointly.
        footprints = {}
        new_poses = {}
        for aid in view.agent_ids:
            cells, post = view.resolve(view.poses[aid], chosen[aid])
            footprints[aid] = cells
            new_poses[aid] = post

        record = {
            "t": self.t,
            "agents": [
                [
                    aid,
                    *view.poses[aid].cell,
                    HEADING_NAMES[view.poses[aid].heading],
                    view.poses[aid].v,
                    *self.agents[aid].goal,
                    self.agents[aid].tokens,
                ]
                for aid in view.agent_ids
            ],
            "intentions": [
                [aid, view.intentions[aid].acc, view.intentions[aid].steer]
                for aid in view.agent_ids
            ],
            "straight": [
                [aid, view.straights[aid].acc, view.straights[aid].steer]
                for aid in view.agent_ids
            ],
            "flags": sorted(aid for aid in view.agent_ids if view.flags[aid]),
            "requests": sorted(requests),
            "clusters": sorted(sorted(c) for c in components),
            "winners": sorted(winners),
            "chosen": [
                [aid, chosen[aid].acc, chosen[aid].steer, branches[aid]]
                for aid in view.agent_ids
            ],
            "forest": sorted(
                [sorted(lo), sorted(hi)] for lo, hi in forest_edges
            ),
            "lights": [
                [
                    cid,
                    self.lights.state(cid, HORIZONTAL, self.t),
                    self.lights.state(cid, VERTICAL, self.t),
                ]
                for cid in sorted(self.network.intersections)
            ],
        }

        if self.config.checks:
            record["checks"] = self._run_checks(
                view, requests, neighborhoods, winners, footprints, p_violations
            )

        # Token updates against the pre-step distances.
        for aid in view.agent_ids:
            rec = self.agents[aid]
            before = self._distance(view.poses[aid], rec.goal)
            after = self._distance(new_poses[aid], rec.goal)
            rec.tokens = update_tokens(rec.tokens, after < before)
            self.max_token_seen = max(self.max_token_seen, rec.tokens)
            rec.pose = new_poses[aid]

        despawns = sorted(
            aid
            for aid, rec in self.agents.items()
            if rec.pose.cell in self.router.goal_cells(rec.goal)
        )
        for aid in despawns:
            del self.agents[aid]
            self.completed += 1
        record["despawns"] = despawns

        self.t += 1
        record["spawns"] = self._spawn_agents()
        return record

    def _distance(self, pose, goal):
        return self.router.distance(pose.cell, pose.heading, goal)

    # -- checks ----------------------------------------------------------
    def _run_checks(self, view, requests, neighborhoods, winners, footprints, p_violations):
        ids = view.agent_ids
        # Q: no two agents ever share a swept cell within the step.
        q_ok = True
        items = [(aid, footprints[aid]) for aid in ids]
        for i, (_, fp) in enumerate(items):
            for _, ofp in items[i + 1 :]:
                if fp & ofp:
                    q_ok = False
        p_ok = not p_violations
        bubble_ok = all(
            view.bubbles.contains(view.poses[s], view.poses[r].cell)
            for s, r in requests
        )
        one_winner_ok = all(
            len((set(neigh) | {aid}) & winners) <= 1
            for aid, neigh in neighborhoods.items()
        )
        checks = {
            "P": p_ok,
            "Q": q_ok,
            "polyforest": True,  # guarded by the fault path above
            "bubble_requests": bubble_ok,
            "one_winner": one_winner_ok,
        }
        if not p_ok:
            raise SimulationFault(
                "backup-safety", EXIT_BACKUP_SAFETY, f"t={self.t} agents {p_violations}"
            )
        if not q_ok:
            raise SimulationFault("collision", EXIT_COLLISION, f"t={self.t}")
        if not bubble_ok or not one_winner_ok:
            raise SimulationFault(
                "protocol", EXIT_BACKUP_SAFETY, f"lemma check failed at t={self.t}"
            )
        return checks

    # -- spawning ---------------------------------------------------------
    def _spawn_agents(self):
        spawns = []
        if self.config.spawn_prob <= 0:
            return spawns
        occupied = {rec.pose.cell for rec in self.agents.values()}
        cap = self.config.max_agents
        for cell in self.network.sources:
            if cap is not None and len(self.agents) >= cap:
                break
            rng = self._spawn_rng[cell]
            if rng.random() >= self.config.spawn_prob:
                continue
            sinks = self._source_sinks[cell]
            if not sinks:
                continue
            goal = sinks[rng.randrange(len(sinks))]
            if cell in occupied:
                continue  # deferred: cell busy (draws stay consumed)
            pose = Pose(cell, self._source_heading[cell], 0)
            if not self._spawn_safe(pose):
                continue  # deferred: would break someone's backup plan
            aid = self._add_agent(pose, goal)
            occupied.add(cell)
            spawns.append(
                [
                    aid,
                    *cell,
                    HEADING_NAMES[pose.heading],
                    *goal,
                ]
            )
        return spawns

    def _spawn_safe(self, pose):
        for rec in self.agents.values():
            if braking_conflict(pose, rec.pose, self.params):
                return False
        return True

    # -- run ---------------------------------------------------------------
    def header(self):
        return {
            "schema": SCHEMA_VERSION,
            "engine": ENGINE_VERSION,
            "config": self.config.canonical(),
        }

    def summary(self, fault=None):
        completion = (100.0 * self.completed / self.spawned) if self.spawned else 0.0
        return {
            "summary": {
                "steps": self.t,
                "spawned": self.spawned,
                "completed": self.completed,
                "completion_pct": round(completion, 2),
                "max_token": self.max_token_seen,
                "active": len(self.agents),
                "fault": fault,
            }
        }


def run(config, network=None, explain=None, on_record=None):
    """Execute a full scenario; returns (records, summary, exit_code).

    records[0] is the header, followed by one record per executed step and a
    trailing summary record.
    """
    from .config import network_for

    net = network or network_for(config)
    game = Game(net, config, explain=explain)
    records = [game.header()]
    if on_record:
        on_record(records[0])
    fault = None
    exit_code = EXIT_OK
    try:
        for _ in range(config.steps):
            rec = game.step()
            records.append(rec)
            if on_record:
                on_record(rec)
    except SimulationFault as exc:
        fault = {"kind": exc.kind, "detail": str(exc)}
        exit_code = exc.exit_code
    tail = game.summary(fault)
    records.append(tail)
    if on_record:
        on_record(tail)
    return records, tail["summary"], exit_code
