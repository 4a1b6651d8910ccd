"""Experiment harness: configs, runners, delimited outputs, and figures."""

from cftp.experiments.config import ExperimentConfig, config_hash, load_config
from cftp.experiments.runner import (
    cmd_diagnose,
    cmd_figure1,
    cmd_sample,
    cmd_table1,
)

__all__ = [
    "ExperimentConfig",
    "config_hash",
    "load_config",
    "cmd_diagnose",
    "cmd_figure1",
    "cmd_sample",
    "cmd_table1",
]
