from .config import ConfigError, apply_overrides, coerce, load_config, parse_config_text
from .experiment import (
    AttackTrainConfig, DefenseConfig, MetricsRow, attack_objective,
    evaluate, harden_finetune, match_control_budget, split_dataset,
    tau_schedule, train_attack, train_defense, tune_baseline_budget,
)
from .cli import main

__all__ = [
    "ConfigError", "parse_config_text", "load_config", "apply_overrides",
    "coerce", "AttackTrainConfig", "DefenseConfig", "MetricsRow",
    "split_dataset", "tau_schedule", "train_attack", "harden_finetune",
    "attack_objective",
    "train_defense", "evaluate", "match_control_budget",
    "tune_baseline_budget", "main",
]
