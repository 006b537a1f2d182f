"""Scripted planners sharing the learned policy's action interface.

Every policy maps an env Observation to a candidate index. The navigation
rule shared by the scripted planners: given a target vertex, run Dijkstra
from the target and take the candidate minimizing (hop length + remaining
distance), which is the best first move restricted to the offered
candidates. Visited vertices (guidepost = 1) are deprioritized as targets so
myopic utility chasing cannot ping-pong between two viewpoints staring at
the same unreachable frontier.
"""

from __future__ import annotations

import math

import numpy as np

from . import roadmap
from .env import Observation
from .policy import PolicyNet, PolicyOutput, select_action
from .roadmap import Layer

__all__ = ["RandomPolicy", "GreedyUtility", "NearestFrontier", "Pursuit",
           "Preplanned", "LearnedPolicy", "make_policy"]


def _toward(obs: Observation, target_vid: int) -> int:
    """Candidate index of the best first hop toward ``target_vid``."""
    cands = obs.candidate_vids()
    if target_vid == obs.current_vid or not cands:
        return 0
    dist, _ = roadmap.dijkstra(obs.graph, target_vid)
    best = None
    for slot, vid in enumerate(cands):
        if vid not in dist:
            continue
        hop = obs.graph.adj[obs.current_vid][vid]
        score = (hop + dist[vid], slot)
        if best is None or score < best:
            best = score
    return best[1] if best is not None else 0


def _positive_vertices(obs: Observation) -> list[int]:
    return [vid for vid in sorted(obs.graph.vertices)
            if obs.graph.vertices[vid].utility > 0]


def _visited_rows(obs: Observation) -> np.ndarray:
    return obs.features[:, 3] >= 0.5


class GreedyUtility:
    """Myopic utility maximizer with a navigation fallback.

    Rule, in order: (1) among unvisited candidates with positive utility,
    the highest utility (ties: shorter hop, then lower slot); (2) otherwise
    head toward the nearest unvisited positive-utility vertex anywhere in
    the graph; (3) otherwise toward the nearest positive-utility vertex at
    all; (4) otherwise the first candidate.
    """

    def reset(self) -> None:
        pass

    def act(self, obs: Observation, rng: np.random.Generator) -> int:
        visited = _visited_rows(obs)
        cands = obs.candidate_vids()
        best = None
        for slot, vid in enumerate(cands):
            u = obs.graph.vertices[vid].utility
            if u <= 0 or visited[obs.rows[vid]]:
                continue
            hop = obs.graph.adj[obs.current_vid][vid]
            key = (-u, hop, slot)
            if best is None or key < best:
                best = key
        if best is not None:
            return best[-1]

        dist, _ = roadmap.dijkstra(obs.graph, obs.current_vid)
        for require_unvisited in (True, False):
            target = None
            for vid in _positive_vertices(obs):
                if vid == obs.current_vid or vid not in dist:
                    continue
                if require_unvisited and visited[obs.rows[vid]]:
                    continue
                key = (dist[vid], vid)
                if target is None or key < target:
                    target = key
            if target is not None:
                return _toward(obs, target[1])
        return 0


class NearestFrontier:
    """Head for the nearest positive-utility viewpoint (unvisited first)."""

    def reset(self) -> None:
        pass

    def act(self, obs: Observation, rng: np.random.Generator) -> int:
        visited = _visited_rows(obs)
        dist, _ = roadmap.dijkstra(obs.graph, obs.current_vid)
        for require_unvisited in (True, False):
            target = None
            for vid in _positive_vertices(obs):
                if vid == obs.current_vid or vid not in dist:
                    continue
                if require_unvisited and visited[obs.rows[vid]]:
                    continue
                key = (dist[vid], vid)
                if target is None or key < target:
                    target = key
            if target is not None:
                return _toward(obs, target[1])
        return 0


class Pursuit(GreedyUtility):
    """Chase a teammate when the unshared map per meter of detour is worth
    it: pursue the teammate maximizing delta_m / distance when that ratio
    exceeds the threshold, else fall back to the greedy rule (a threshold of
    infinity reproduces GreedyUtility action for action)."""

    def __init__(self, threshold: float = 50.0):
        self.threshold = threshold

    def act(self, obs: Observation, rng: np.random.Generator) -> int:
        best = None
        for tm in obs.teammates:
            if not math.isfinite(tm.dist) or tm.dist <= 0:
                continue
            ratio = tm.delta_m / tm.dist
            key = (-ratio, tm.rid)
            if best is None or key < best:
                best = (key[0], key[1], tm.vid)
        if best is not None and -best[0] > self.threshold:
            return _toward(obs, best[2])
        return super().act(obs, rng)


class Preplanned(GreedyUtility):
    """Greedy exploration with scheduled rendezvous.

    In the second half of every period the robot heads for the meeting
    vertex: the global-layer vertex minimizing the maximum shortest-path
    distance from all robots' last-known positions (self included). Robots
    that share one radio component hold identical graphs and identical
    last-known poses after a sync, so they pick the same vertex.
    """

    def __init__(self, period: int = 20):
        self.period = period
        self.last_goal: int | None = None

    def reset(self) -> None:
        self.last_goal = None

    def act(self, obs: Observation, rng: np.random.Generator) -> int:
        if self.period > 0 and (obs.step % self.period) >= (self.period + 1) // 2:
            goal = self._rendezvous_vertex(obs)
            if goal is not None:
                self.last_goal = goal
                return _toward(obs, goal)
        self.last_goal = None
        return super().act(obs, rng)

    def _rendezvous_vertex(self, obs: Observation) -> int | None:
        globals_ = [vid for vid in sorted(obs.graph.vertices)
                    if obs.graph.vertices[vid].layer == Layer.GLOBAL]
        if not globals_:
            return None
        sources = [obs.current_vid] + [tm.vid for tm in
                                       sorted(obs.teammates, key=lambda t: t.rid)]
        dists = [roadmap.dijkstra(obs.graph, s)[0] for s in sources]
        best = None
        for vid in globals_:
            if any(vid not in d for d in dists):
                continue
            worst = max(d[vid] for d in dists)
            key = (worst, vid)
            if best is None or key < best:
                best = key
        return None if best is None else best[1]


class RandomPolicy:
    """Uniform over the unmasked candidate slots."""

    def reset(self) -> None:
        pass

    def act(self, obs: Observation, rng: np.random.Generator) -> int:
        n = int(obs.candidate_mask.sum())
        return int(rng.integers(n)) if n > 0 else 0


class LearnedPolicy:
    """Wraps a PolicyNet behind the scripted-planner interface."""

    def __init__(self, net: PolicyNet, mode: str = "greedy"):
        self.net = net
        self.mode = mode

    def reset(self) -> None:
        pass

    def act(self, obs: Observation, rng: np.random.Generator) -> int:
        if not obs.candidate_mask.any():
            return 0
        out: PolicyOutput = self.net.evaluate(obs)
        return select_action(out, self.mode, rng)


def make_policy(kind: str, net: PolicyNet | None = None,
                pursuit_threshold: float = 50.0,
                rendezvous_period: int = 20,
                mode: str = "greedy"):
    """Policy factory keyed by config string."""
    kinds = {
        "random": RandomPolicy,
        "greedy": GreedyUtility,
        "nearest": NearestFrontier,
        "pursuit": lambda: Pursuit(pursuit_threshold),
        "preplanned": lambda: Preplanned(rendezvous_period),
    }
    if kind == "learned":
        if net is None:
            raise ValueError("learned policy needs a weights file")
        return LearnedPolicy(net, mode=mode)
    if kind not in kinds:
        raise ValueError(f"unknown policy kind {kind!r}")
    return kinds[kind]()
