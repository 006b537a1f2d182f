"""Experiment harness: seeded episode runs, metrics, rollout collection,
policy-gradient training, and the finite-difference gradient check.

File outputs are deterministic: every float is printed through a fixed
format, timing columns default to 0.0, and all iteration orders are sorted,
so rerunning a config byte-reproduces its CSVs.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import torch

from . import baselines
from .comms import CommEvent
from .config import ExperimentConfig, TrainConfig, default_budget
from .env import EpisodeConfig, ExplorationEnv, Observation
from .errors import ContractViolationError
from .gridworld import MapKind
from .policy import PolicyNet, load_weights

__all__ = [
    "StepRecord", "EpisodeResult", "MetricsReport", "Transition",
    "EpisodeRollout", "run_episode", "compute_metrics", "run_experiment",
    "evaluate_policy", "collect_rollouts", "compute_returns", "compute_loss",
    "policy_gradient_update", "Trainer", "train", "run_ablation",
    "gradient_check", "write_metrics_csv", "write_summary_csv",
    "write_trajectory_csv", "write_comm_events", "write_curve_csv",
    "make_policies", "METRICS_COLUMNS", "CURVE_COLUMNS",
]

logger = logging.getLogger(__name__)

METRICS_COLUMNS = ["run_id", "seed", "n_robots", "map_kind", "success",
                   "steps", "eta_t", "eta_d", "sigma_pct", "plan_ms"]
CURVE_COLUMNS = ["window", "success_rate", "mean_steps", "mean_distance"]

#: Stage curricula: map kinds cycled evenly, robot-count range (inclusive).
STAGES = {
    "easy": ((MapKind.SIMPLE, MapKind.CORRIDOR), (3, 5)),
    "difficult": ((MapKind.CORRIDOR, MapKind.HYBRID, MapKind.COMPLEX), (4, 6)),
}


# --------------------------------------------------------------------------
# Single episode
# --------------------------------------------------------------------------

@dataclass
class StepRecord:
    """One robot's line in the trajectory log."""

    step: int
    rid: int
    x: float
    y: float
    r_o: float
    r_d: float
    r_f: float
    r_s: float
    r_c: float
    total: float
    coverage: float


@dataclass
class EpisodeResult:
    seed: int
    steps: int
    success: bool
    coverages: list[float]
    distances: list[float]
    union_area_m2: float
    sigma_pct: float
    records: list[StepRecord]
    comm_events: list[CommEvent]
    decision_ms: list[float]

    @property
    def total_distance(self) -> float:
        return float(sum(self.distances))


def make_policies(exp: ExperimentConfig, net: PolicyNet | None = None) -> list:
    """One policy instance per robot, from the config's policy string."""
    if exp.policy == "learned" and net is None:
        net = load_weights(exp.weights)
    return [baselines.make_policy(exp.policy, net=net,
                                  pursuit_threshold=exp.pursuit_threshold,
                                  rendezvous_period=exp.rendezvous_period,
                                  mode=exp.action_mode)
            for _ in range(exp.episode.n_robots)]


def run_episode(cfg: EpisodeConfig, policies: list, seed: int | None = None,
                timing: bool = False) -> EpisodeResult:
    """Run one full episode with one policy object per robot.

    ``seed`` feeds the per-robot action RNGs (episode layout randomness
    comes from ``cfg`` itself); it defaults to ``cfg.seed``.
    """
    if len(policies) != cfg.n_robots:
        raise ContractViolationError(
            f"{cfg.n_robots} robots need {cfg.n_robots} policies, "
            f"got {len(policies)}")
    if seed is None:
        seed = cfg.seed
    env = ExplorationEnv(cfg)
    obs = env.reset()
    rngs = [np.random.default_rng((seed, rid)) for rid in range(cfg.n_robots)]
    for pol in policies:
        pol.reset()

    records: list[StepRecord] = []
    decision_ms: list[float] = []
    done = False
    while not done:
        t0 = time.perf_counter() if timing else 0.0
        actions = [policies[i].act(obs[i], rngs[i])
                   if obs[i].candidate_mask.any() else 0
                   for i in range(cfg.n_robots)]
        rewards, obs, done = env.step(actions)
        if timing:
            decision_ms.append((time.perf_counter() - t0) * 1e3)
        covs = env.coverages()
        for r in env.robots:
            rw = rewards[r.rid]
            records.append(StepRecord(step=env.steps, rid=r.rid,
                                      x=r.pos[0], y=r.pos[1],
                                      r_o=rw.r_o, r_d=rw.r_d, r_f=rw.r_f,
                                      r_s=rw.r_s, r_c=rw.r_c, total=rw.total,
                                      coverage=covs[r.rid]))
    sigmas = env.sensed_free_percents()
    return EpisodeResult(seed=seed, steps=env.steps, success=env.is_done(),
                         coverages=env.coverages(),
                         distances=[r.distance for r in env.robots],
                         union_area_m2=env.union_known_area_m2(),
                         sigma_pct=float(np.std(sigmas)),
                         records=records, comm_events=list(env.comm_events),
                         decision_ms=decision_ms)


# --------------------------------------------------------------------------
# Metrics
# --------------------------------------------------------------------------

@dataclass
class MetricsReport:
    """One row of the metrics CSV."""

    run_id: str
    seed: int
    n_robots: int
    map_kind: str
    success: bool
    steps: int
    eta_t: float
    eta_d: float
    sigma_pct: float
    plan_ms: float

    def row(self) -> list[str]:
        return [self.run_id, str(self.seed), str(self.n_robots),
                self.map_kind, str(int(self.success)), str(self.steps),
                f"{self.eta_t:.6f}", f"{self.eta_d:.6f}",
                f"{self.sigma_pct:.6f}", f"{self.plan_ms:.3f}"]


def compute_metrics(cfg: EpisodeConfig, result: EpisodeResult,
                    run_id: str) -> MetricsReport:
    """Exploration-rate metrics for a finished episode.

    eta_t is jointly-known area per decision step; eta_d is the same area
    per meter of summed robot travel (so eta_d * total distance recovers
    the area). plan_ms is 0.0 unless the episode was run with timing on:
    the column is part of the byte-reproducibility contract.
    """
    steps = max(result.steps, 1)
    eta_t = result.union_area_m2 / steps
    dist = result.total_distance
    eta_d = result.union_area_m2 / dist if dist > 0 else 0.0
    plan_ms = (float(np.mean(result.decision_ms))
               if result.decision_ms else 0.0)
    return MetricsReport(run_id=run_id, seed=result.seed,
                         n_robots=cfg.n_robots,
                         map_kind=cfg.map_spec.kind.value,
                         success=result.success, steps=result.steps,
                         eta_t=eta_t, eta_d=eta_d,
                         sigma_pct=result.sigma_pct, plan_ms=plan_ms)


# --------------------------------------------------------------------------
# CSV / JSONL writers
# --------------------------------------------------------------------------

def write_metrics_csv(path: str | Path, reports: list[MetricsReport]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRICS_COLUMNS)
        for rep in reports:
            w.writerow(rep.row())


def write_summary_csv(path: str | Path, reports: list[MetricsReport]) -> None:
    """Mean and population stdev per numeric metric across runs."""
    cols = {
        "success": [float(r.success) for r in reports],
        "steps": [float(r.steps) for r in reports],
        "eta_t": [r.eta_t for r in reports],
        "eta_d": [r.eta_d for r in reports],
        "sigma_pct": [r.sigma_pct for r in reports],
        "plan_ms": [r.plan_ms for r in reports],
    }
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "mean", "stdev"])
        for name, vals in cols.items():
            w.writerow([name, f"{np.mean(vals):.6f}", f"{np.std(vals):.6f}"])


def write_trajectory_csv(path: str | Path, result: EpisodeResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "robot", "x", "y", "r_o", "r_d", "r_f", "r_s",
                    "r_c", "reward", "coverage"])
        for r in result.records:
            w.writerow([r.step, r.rid, f"{r.x:.3f}", f"{r.y:.3f}",
                        f"{r.r_o:.6f}", f"{r.r_d:.6f}", f"{r.r_f:.6f}",
                        f"{r.r_s:.6f}", f"{r.r_c:.6f}", f"{r.total:.6f}",
                        f"{r.coverage:.6f}"])


def write_comm_events(path: str | Path, result: EpisodeResult) -> None:
    with open(path, "w") as fh:
        for ev in result.comm_events:
            fh.write(json.dumps(ev.to_json_dict(), sort_keys=True) + "\n")


def write_curve_csv(path: str | Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CURVE_COLUMNS)
        for row in rows:
            w.writerow([row["window"], f"{row['success_rate']:.6f}",
                        f"{row['mean_steps']:.6f}",
                        f"{row['mean_distance']:.6f}"])


# --------------------------------------------------------------------------
# Repeated runs
# --------------------------------------------------------------------------

def run_experiment(exp: ExperimentConfig, out_dir: str | Path | None = None,
                   net: PolicyNet | None = None,
                   run_prefix: str = "run"
                   ) -> tuple[list[MetricsReport], list[EpisodeResult]]:
    """Seeded repetitions of the configured episode.

    Repetition i shifts both the episode seed and the map seed by i, so
    repetitions sample fresh worlds. Writes metrics.csv (one row per run),
    summary.csv (mean/stdev), and per-rep trajectory/comm-event logs when
    ``out_dir`` is given.
    """
    reports: list[MetricsReport] = []
    results: list[EpisodeResult] = []
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    for rep in range(exp.reps):
        cfg = replace(exp.episode,
                      map_spec=replace(exp.episode.map_spec,
                                       seed=exp.episode.map_spec.seed + rep),
                      seed=exp.episode.seed + rep)
        policies = make_policies(replace(exp, episode=cfg), net=net)
        result = run_episode(cfg, policies, timing=exp.timing)
        run_id = f"{run_prefix}{rep:03d}"
        reports.append(compute_metrics(cfg, result, run_id))
        results.append(result)
        logger.info("%s: success=%s steps=%d", run_id, result.success,
                    result.steps)
        if out is not None:
            write_trajectory_csv(out / f"trajectory_{run_id}.csv", result)
            write_comm_events(out / f"comm_events_{run_id}.jsonl", result)
    if out is not None:
        write_metrics_csv(out / "metrics.csv", reports)
        write_summary_csv(out / "summary.csv", reports)
    return reports, results


def evaluate_policy(cfg: EpisodeConfig, policy_factory, episodes: int,
                    seed: int = 0) -> dict:
    """Deterministic evaluation over ``episodes`` fresh seeded worlds:
    success rate, mean steps, mean summed travel distance."""
    succ, steps, dist = [], [], []
    for e in range(episodes):
        ecfg = replace(cfg,
                       map_spec=replace(cfg.map_spec, seed=cfg.map_spec.seed + e),
                       seed=cfg.seed + e)
        policies = [policy_factory() for _ in range(cfg.n_robots)]
        res = run_episode(ecfg, policies)
        succ.append(float(res.success))
        steps.append(float(res.steps))
        dist.append(res.total_distance)
    return {"success_rate": float(np.mean(succ)),
            "mean_steps": float(np.mean(steps)),
            "mean_distance": float(np.mean(dist)),
            "episodes": episodes}


# --------------------------------------------------------------------------
# Rollouts
# --------------------------------------------------------------------------

@dataclass
class Transition:
    """One robot decision: observation digest, action slot, outcome."""

    features: np.ndarray
    edges: np.ndarray
    current_row: int
    candidate_rows: np.ndarray
    candidate_mask: np.ndarray
    rid: int
    action: int
    reward: float
    done: bool
    ret: float = 0.0


@dataclass
class EpisodeRollout:
    seed: int
    steps: int
    success: bool
    total_distance: float
    transitions: list[Transition] = field(default_factory=list)


def compute_returns(rewards: list[float], gamma: float) -> list[float]:
    """Discounted rewards-to-go."""
    out = [0.0] * len(rewards)
    acc = 0.0
    for i in range(len(rewards) - 1, -1, -1):
        acc = rewards[i] + gamma * acc
        out[i] = acc
    return out


def _digest(obs: Observation) -> dict:
    return {"features": np.array(obs.features, dtype=np.float64),
            "edges": np.array(obs.edges, dtype=np.int64),
            "current_row": int(obs.current_row),
            "candidate_rows": np.array(obs.candidate_rows, dtype=np.int64),
            "candidate_mask": np.array(obs.candidate_mask, dtype=bool)}


def _rollout_episode(cfg: EpisodeConfig, net: PolicyNet, seed: int,
                     gamma: float, mode: str) -> EpisodeRollout:
    policy = baselines.LearnedPolicy(net, mode=mode)
    env = ExplorationEnv(cfg)
    obs = env.reset()
    rngs = [np.random.default_rng((seed, rid)) for rid in range(cfg.n_robots)]
    per_robot: list[list[Transition]] = [[] for _ in range(cfg.n_robots)]
    done = False
    while not done:
        digests, actions = [], []
        for i in range(cfg.n_robots):
            if obs[i].candidate_mask.any():
                digests.append(_digest(obs[i]))
                actions.append(policy.act(obs[i], rngs[i]))
            else:
                digests.append(None)
                actions.append(0)
        rewards, obs, done = env.step(actions)
        for i in range(cfg.n_robots):
            if digests[i] is None:
                continue
            per_robot[i].append(Transition(rid=i, action=actions[i],
                                           reward=rewards[i].total, done=done,
                                           **digests[i]))
    transitions: list[Transition] = []
    for seq in per_robot:
        rets = compute_returns([t.reward for t in seq], gamma)
        for t, g in zip(seq, rets):
            t.ret = g
        transitions.extend(seq)
    return EpisodeRollout(seed=seed, steps=env.steps, success=env.is_done(),
                          total_distance=float(sum(r.distance
                                                   for r in env.robots)),
                          transitions=transitions)


def collect_rollouts(cfg: EpisodeConfig, net: PolicyNet, episodes: int,
                     seed: int = 0, gamma: float | None = None,
                     mode: str = "sample") -> list[EpisodeRollout]:
    """Independent seeded episodes under the current net; returns-to-go are
    precomputed per robot. Episode errors are re-raised with the failing
    episode seed prepended."""
    if gamma is None:
        gamma = cfg.reward.gamma
    rollouts = []
    for e in range(episodes):
        ecfg = replace(cfg,
                       map_spec=replace(cfg.map_spec, seed=cfg.map_spec.seed + e),
                       seed=cfg.seed + e)
        try:
            rollouts.append(_rollout_episode(ecfg, net, seed + e, gamma, mode))
        except Exception as exc:
            try:
                raise type(exc)(f"episode seed {seed + e}: {exc}") from exc
            except TypeError:
                raise RuntimeError(f"episode seed {seed + e}: {exc}") from exc
    return rollouts


# --------------------------------------------------------------------------
# Policy-gradient update
# --------------------------------------------------------------------------

def _flatten(batch) -> list[Transition]:
    if isinstance(batch, EpisodeRollout):
        return list(batch.transitions)
    out: list[Transition] = []
    for item in batch:
        if isinstance(item, EpisodeRollout):
            out.extend(item.transitions)
        else:
            out.append(item)
    return out


def compute_loss(net: PolicyNet, batch, value_coef: float = 0.5,
                 entropy_coef: float = 0.01) -> tuple[torch.Tensor, dict]:
    """Actor-critic objective over a batch of transitions.

    Advantages are (return - detached value), normalized across the batch
    unless their spread is degenerate (a constant-advantage batch is used
    raw, so an exact baseline yields a zero policy gradient rather than
    0/0). Returns (total loss, stats with the component tensors).
    """
    transitions = _flatten(batch)
    if not transitions:
        raise ContractViolationError("empty transition batch")
    dtype = next(net.parameters()).dtype
    logps, values, entropies = [], [], []
    for tr in transitions:
        log_probs, value = net(
            torch.as_tensor(tr.features, dtype=dtype),
            torch.as_tensor(tr.edges, dtype=torch.long),
            tr.current_row,
            torch.as_tensor(tr.candidate_rows, dtype=torch.long),
            torch.as_tensor(tr.candidate_mask, dtype=torch.bool))
        logps.append(log_probs[tr.action])
        values.append(value)
        lp = log_probs[torch.as_tensor(tr.candidate_mask, dtype=torch.bool)]
        entropies.append(-(lp.exp() * lp).sum())
    logp = torch.stack(logps)
    value = torch.stack(values)
    entropy = torch.stack(entropies).mean()
    returns = torch.tensor([tr.ret for tr in transitions], dtype=dtype)

    adv = returns - value.detach()
    if adv.numel() > 1:
        std = adv.std(unbiased=False)
        if float(std) > 1e-8:
            adv = (adv - adv.mean()) / std
    pg_loss = -(logp * adv).mean()
    value_loss = ((value - returns) ** 2).mean()
    loss = pg_loss + value_coef * value_loss - entropy_coef * entropy
    stats = {"loss": loss, "pg_loss": pg_loss, "value_loss": value_loss,
             "entropy": entropy}
    return loss, stats


def policy_gradient_update(batch, net: PolicyNet, lr: float,
                           gamma: float = 0.99,
                           optimizer: torch.optim.Optimizer | None = None,
                           value_coef: float = 0.5,
                           entropy_coef: float = 0.01) -> dict:
    """One gradient step on the batch; plain SGD at ``lr`` when no optimizer
    is supplied (so lr=0 leaves the net bit-identical). ``gamma`` is carried
    for callers that still need returns computed; transitions arriving here
    already hold returns-to-go. Non-finite losses abort with diagnostics
    instead of stepping."""
    del gamma
    loss, stats = compute_loss(net, batch, value_coef, entropy_coef)
    if not torch.isfinite(loss):
        detail = {k: float(v) for k, v in stats.items()}
        raise ContractViolationError(f"non-finite training loss: {detail}")
    params = [p for p in net.parameters() if p.requires_grad]
    if optimizer is not None:
        optimizer.zero_grad()
    else:
        for p in params:
            p.grad = None
    loss.backward()
    grad_norm = math.sqrt(sum(float((p.grad ** 2).sum())
                              for p in params if p.grad is not None))
    if optimizer is not None:
        optimizer.step()
    else:
        with torch.no_grad():
            for p in params:
                if p.grad is not None:
                    p.add_(p.grad, alpha=-lr)
    out = {k: float(v.detach()) for k, v in stats.items()}
    out["grad_norm"] = grad_norm
    out["transitions"] = len(_flatten(batch))
    return out


class Trainer:
    """Adam-backed wrapper: one `update` per episode batch."""

    def __init__(self, net: PolicyNet, lr: float = 3e-4, gamma: float = 0.99,
                 value_coef: float = 0.5, entropy_coef: float = 0.01):
        self.net = net
        self.gamma = gamma
        self.value_coef = value_coef
        self.entropy_coef = entropy_coef
        self.optimizer = torch.optim.Adam(net.parameters(), lr=lr)

    def update(self, batch) -> dict:
        return policy_gradient_update(batch, self.net, lr=0.0,
                                      gamma=self.gamma,
                                      optimizer=self.optimizer,
                                      value_coef=self.value_coef,
                                      entropy_coef=self.entropy_coef)


# --------------------------------------------------------------------------
# Training loop
# --------------------------------------------------------------------------

def _stage_for_episode(stage: str, e: int, episodes: int) -> str:
    if stage in ("easy", "difficult", "fixed"):
        return stage
    # "full": first half easy, second half difficult.
    return "easy" if e < episodes // 2 else "difficult"


def _episode_config(base: EpisodeConfig, stage: str, e: int,
                    seed: int) -> EpisodeConfig:
    """Episode recipe for curriculum slot ``e``: map kind cycled through the
    stage's set, robot count drawn from the stage's range, per-kind budget,
    fresh map seed."""
    if stage == "fixed":
        return replace(base,
                       map_spec=replace(base.map_spec,
                                        seed=base.map_spec.seed + e),
                       seed=base.seed + e)
    kinds, (rlo, rhi) = STAGES[stage]
    kind = kinds[e % len(kinds)]
    rng = np.random.default_rng((seed, e))
    n_robots = int(rng.integers(rlo, rhi + 1))
    return replace(base,
                   map_spec=replace(base.map_spec, kind=kind,
                                    width_m=None, height_m=None,
                                    seed=base.map_spec.seed + e),
                   n_robots=n_robots,
                   budget=default_budget(kind),
                   seed=base.seed + e)


def train(exp: ExperimentConfig, out_dir: str | Path | None = None,
          net: PolicyNet | None = None, episodes: int | None = None,
          seed: int | None = None
          ) -> tuple[PolicyNet, list[dict]]:
    """Curriculum policy-gradient training: one update per episode.

    Stage "easy"/"difficult" runs that curriculum throughout; "full" runs
    easy for the first half and difficult for the second; "fixed" trains on
    the config's own map/robot-count/budget (seeds still advance per
    episode). Writes training_curve.csv and policy.weights under
    ``out_dir``. Returns the trained net and the curve rows.
    """
    tc: TrainConfig = exp.train
    if episodes is None:
        episodes = tc.episodes
    if seed is None:
        seed = exp.episode.seed
    if net is None:
        net = PolicyNet(d=tc.d_model, layers=tc.layers,
                        k=exp.episode.graph.k, seed=seed)
    trainer = Trainer(net, lr=tc.lr, gamma=exp.episode.reward.gamma,
                      value_coef=tc.value_coef, entropy_coef=tc.entropy_coef)

    curve: list[dict] = []
    window: list[EpisodeRollout] = []

    def flush_window():
        if not window:
            return
        curve.append({
            "window": len(curve) + 1,
            "success_rate": float(np.mean([r.success for r in window])),
            "mean_steps": float(np.mean([r.steps for r in window])),
            "mean_distance": float(np.mean([r.total_distance
                                            for r in window])),
        })
        window.clear()

    for e in range(episodes):
        stage = _stage_for_episode(tc.stage, e, episodes)
        ecfg = _episode_config(exp.episode, stage, e, seed)
        try:
            rollout = _rollout_episode(ecfg, net, seed + e,
                                       exp.episode.reward.gamma, "sample")
        except Exception as exc:
            try:
                raise type(exc)(f"episode seed {seed + e}: {exc}") from exc
            except TypeError:
                raise RuntimeError(f"episode seed {seed + e}: {exc}") from exc
        stats = trainer.update(rollout.transitions)
        window.append(rollout)
        if (e + 1) % tc.window == 0:
            flush_window()
            last = curve[-1]
            logger.info("episode %d/%d stage=%s success=%.2f steps=%.1f "
                        "loss=%.4f", e + 1, episodes, stage,
                        last["success_rate"], last["mean_steps"],
                        stats["loss"])
    flush_window()

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_curve_csv(out / "training_curve.csv", curve)
        from .policy import save_weights
        save_weights(net, out / "policy.weights")
    return net, curve


def run_ablation(exp: ExperimentConfig, out_dir: str | Path | None = None,
                 episodes: int | None = None, eval_episodes: int = 20,
                 seed: int | None = None) -> list[dict]:
    """Paired training with and without the teammate-surplus signal.

    Both variants see identical seeds (same curricula, same map layouts,
    same net initialization); the only difference is whether the surplus
    feature and its reward term exist. Each trained net is then evaluated
    greedily on a shared set of fresh worlds, and the comparison table
    (success %, mean steps, mean distance m) is returned and written to
    ablation.csv.
    """
    if seed is None:
        seed = exp.episode.seed
    rows: list[dict] = []
    for label, enabled in (("with_surplus", True), ("without_surplus", False)):
        variant = replace(exp, episode=replace(exp.episode,
                                               surplus_enabled=enabled))
        sub = None if out_dir is None else Path(out_dir) / label
        net, _curve = train(variant, out_dir=sub, episodes=episodes, seed=seed)
        eval_cfg = replace(variant.episode,
                           map_spec=replace(variant.episode.map_spec,
                                            seed=variant.episode.map_spec.seed
                                            + 100_000),
                           seed=seed + 100_000)
        stats = evaluate_policy(
            eval_cfg,
            lambda: baselines.LearnedPolicy(net, mode="greedy"),
            episodes=eval_episodes, seed=seed + 100_000)
        rows.append({"variant": label,
                     "success_pct": 100.0 * stats["success_rate"],
                     "mean_steps": stats["mean_steps"],
                     "mean_distance_m": stats["mean_distance"]})
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "ablation.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["variant", "success_pct", "mean_steps",
                        "mean_distance_m"])
            for row in rows:
                w.writerow([row["variant"], f"{row['success_pct']:.2f}",
                            f"{row['mean_steps']:.2f}",
                            f"{row['mean_distance_m']:.2f}"])
    return rows


# --------------------------------------------------------------------------
# Gradient check
# --------------------------------------------------------------------------

def _random_check_batch(rng: np.random.Generator, k: int = 4
                        ) -> list[Transition]:
    """A couple of transitions on one small random connected graph."""
    n = int(rng.integers(3, 13))
    edges = set()
    order = rng.permutation(n)
    for i in range(n - 1):
        a, b = int(order[i]), int(order[i + 1])
        edges.add((min(a, b), max(a, b)))
    for _ in range(n):
        a, b = int(rng.integers(n)), int(rng.integers(n))
        if a != b:
            edges.add((min(a, b), max(a, b)))
    edge_arr = np.array(sorted(edges), dtype=np.int64)
    adj = {i: set() for i in range(n)}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)

    out = []
    for _ in range(2):
        features = rng.normal(size=(n, 6))
        current = int(rng.integers(n))
        neigh = sorted(adj[current])[:k]
        rows = np.full(k, -1, dtype=np.int64)
        rows[:len(neigh)] = neigh
        mask = np.zeros(k, dtype=bool)
        mask[:len(neigh)] = True
        action = int(rng.integers(len(neigh)))
        out.append(Transition(features=features, edges=edge_arr,
                              current_row=current, candidate_rows=rows,
                              candidate_mask=mask, rid=0, action=action,
                              reward=0.0, done=False,
                              ret=float(rng.normal())))
    return out


def gradient_check(seed: int = 0, n_graphs: int = 20, d_model: int = 8,
                   layers: int = 1, step: float = 1e-5) -> dict:
    """Analytic vs central-difference gradients of the training loss, in
    double precision, over random small graphs. Returns the worst relative
    error (denominator floored at 1e-3 so near-zero gradients compare
    absolutely) and where it occurred."""
    worst = {"max_rel_err": 0.0, "graph": -1, "param": ""}
    for gi in range(n_graphs):
        rng = np.random.default_rng((seed, gi))
        batch = _random_check_batch(rng)
        net = PolicyNet(d=d_model, layers=layers, k=4, seed=seed + gi).double()

        loss, _ = compute_loss(net, batch)
        for p in net.parameters():
            p.grad = None
        loss.backward()

        for name, p in net.named_parameters():
            grad = (p.grad.detach().clone() if p.grad is not None
                    else torch.zeros_like(p))
            flat = p.data.view(-1)
            gflat = grad.view(-1)
            for j in range(flat.numel()):
                orig = float(flat[j])
                flat[j] = orig + step
                with torch.no_grad():
                    hi, _ = compute_loss(net, batch)
                flat[j] = orig - step
                with torch.no_grad():
                    lo, _ = compute_loss(net, batch)
                flat[j] = orig
                fd = (float(hi) - float(lo)) / (2 * step)
                an = float(gflat[j])
                rel = abs(an - fd) / max(abs(an), abs(fd), 1e-3)
                if rel > worst["max_rel_err"]:
                    worst = {"max_rel_err": rel, "graph": gi,
                             "param": f"{name}[{j}]"}
    return worst
