"""Learned placer: graph features, two-head policy and PPO training."""
from .features import DesignEncoder, GraphFeatures, encode_features
from .model import (
    EmptyMask,
    ModelConfig,
    PolicyModel,
    load_checkpoint,
    policy_value_forward,
    sample_action,
    save_checkpoint,
)
from .ppo import NonFiniteLoss, PPOConfig, Transitions, ppo_update
from .train import Collector, TrainResult, evaluate_policy, new_model, random_baseline, train_loop

__all__ = [
    "Collector", "DesignEncoder", "EmptyMask", "GraphFeatures", "ModelConfig", "NonFiniteLoss",
    "PPOConfig", "PolicyModel", "TrainResult", "Transitions", "encode_features", "evaluate_policy",
    "load_checkpoint", "new_model", "policy_value_forward", "ppo_update", "random_baseline",
    "sample_action", "save_checkpoint", "train_loop",
]
