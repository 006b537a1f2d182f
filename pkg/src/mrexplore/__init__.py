"""Multi-robot exploration on hierarchical roadmaps.

A deterministic 2D exploration simulator (occupancy grids, segment-sampled
lidar, log-distance radio), a two-layer roadmap pipeline (dense local
lattice + sparse persistent global skeleton), a teammate map-surplus field,
an attention-based pointer policy with actor-critic training, scripted
baselines, and a benchmarking harness with CSV + figure reports.
"""

from .baselines import (GreedyUtility, LearnedPolicy, NearestFrontier,
                        Preplanned, Pursuit, RandomPolicy, make_policy)
from .comms import (CommEvent, CommsMode, CommsParams, connectivity_components,
                    is_connected, path_loss, received_power, sync_component)
from .config import (DEFAULT_CONFIG, ExperimentConfig, TrainConfig,
                     default_budget, load_config, parse_config)
from .env import (EpisodeConfig, ExplorationEnv, Observation, RewardBreakdown,
                  RewardWeights, SurplusParams, action_candidates,
                  map_surplus_field)
from .errors import (ConfigError, ContractViolationError, GridMismatchError,
                     InvalidPoseError, MrexploreError, WeightsFormatError)
from .gridworld import (Cell, FrontierSet, MapKind, MapSpec, OccupancyGrid,
                        SensorSpec, coverage_fraction, extract_frontiers,
                        generate_map, integrate_scan, lidar_scan,
                        line_of_sight, load_map, merge_beliefs, save_map,
                        visible_cells)
from .harness import (EpisodeResult, MetricsReport, Trainer, Transition,
                      collect_rollouts, compute_loss, compute_metrics,
                      compute_returns, evaluate_policy, gradient_check,
                      policy_gradient_update, run_ablation, run_episode,
                      run_experiment, train)
from .policy import (PolicyNet, PolicyOutput, load_weights, save_weights,
                     select_action)
from .roadmap import (FrontierCenter, GraphParams, GraphVertex, HierGraph,
                      Layer, astar_grid, build_local_graph, dijkstra,
                      dump_graph, extend_global_graph, frontier_centers,
                      load_graph, merge_global_graphs, planning_graph,
                      prune_global_graph, shortest_path)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
