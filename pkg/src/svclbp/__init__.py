"""Layered (SVC) video rate adaptation: offline and online planners, simulator, baselines."""

from .model import (
    SKIP,
    BandwidthTrace,
    LayerPlan,
    Mode,
    ModelError,
    StreamConfig,
    VideoSpec,
    default_gamma,
    make_config,
    objective_value,
    validate_weights,
)
from .noskip import base_backward_reposition, base_forward_stalls, plan_offline_noskip
from .online import OnlineConfig, degrade_for_low_buffer, run_online
from .oracle import enumerate_optimal_noskip, enumerate_optimal_skip
from .playback import SessionLog, execute_plan, step
from .scans import plan_offline_skip

__all__ = [
    "SKIP", "BandwidthTrace", "LayerPlan", "Mode", "ModelError", "StreamConfig", "VideoSpec",
    "default_gamma", "make_config", "objective_value", "validate_weights",
    "base_backward_reposition", "base_forward_stalls", "plan_offline_noskip",
    "OnlineConfig", "degrade_for_low_buffer", "run_online",
    "enumerate_optimal_noskip", "enumerate_optimal_skip",
    "SessionLog", "execute_plan", "step", "plan_offline_skip",
]
