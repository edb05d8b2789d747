"""replaydrive: a dataset-replay driving simulator, a search-based
pseudo-expert planner, and an iterative imitation-training harness."""

from .dagger import (DaggerConfig, DaggerReport, Discriminator, extract_original_dataset,
                     fit_discriminator, label_with_expert, run_dagger, select_adversary,
                     select_k_failure)
from .dataset import (EpisodeSpec, ScenarioParams, TrafficLog, VehicleTrack,
                      enumerate_episodes, load_log, make_synthetic_scenario, state_at,
                      write_log)
from .geometry import (OrientedBox, Point2, ReferencePath, boxes_overlap,
                       estimate_curvature, eval_path, project_to_path)
from .motion import EgoState, Trajectory
from .planner import (InfeasiblePlanError, PlanNode, PlannerConfig, PlanResult, plan,
                      plan_from_state, step_node, to_world_trajectory, transition_cost)
from .policy import (Dataset, GridConfig, KnnBcPolicy, LabeledSample, Observation,
                     WaypointPrediction, featurize, knn_bc_fit, load_dataset, loss_curb,
                     loss_pred, loss_total, loss_veh, make_observation, policy_act,
                     rasterize, save_dataset)
from .refine import BlendInfeasibleError, RefineConfig, blend_to_ego, qp_smooth
from .simulator import (EvalMetrics, Outcome, RolloutResult, SimConfig, check_collisions,
                        evaluate, run_episode, track_waypoints)

__version__ = "0.1.0"
