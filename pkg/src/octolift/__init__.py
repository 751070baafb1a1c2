"""Octocopter with rigidly attached load: dynamics, W-infinity cascade control,
joint UKF estimation and a seeded closed-loop scenario runner."""
from .config import ExperimentConfig, default_config, read_config, write_config
from .harness import TrajectoryLog, compute_metrics, run_experiment, write_log, read_log
from .jukf import GaussianBelief, JointUKF, NoiseConfig
from .multibody import LoadParams, VehicleParams
from .winf_control import (ATTITUDE_WEIGHTS, TRANSLATION_WEIGHTS, CascadeController,
                           LoopDesign, WeightSet, solve_care)

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig", "default_config", "read_config", "write_config",
    "TrajectoryLog", "compute_metrics", "run_experiment", "write_log", "read_log",
    "GaussianBelief", "JointUKF", "NoiseConfig", "LoadParams", "VehicleParams",
    "ATTITUDE_WEIGHTS", "TRANSLATION_WEIGHTS", "CascadeController", "LoopDesign",
    "WeightSet", "solve_care",
]
