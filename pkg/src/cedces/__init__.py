"""Deadline-constrained, cost-driven workflow scheduling on priced multi-cloud systems."""

from .cloud import MultiCloudSystem, default_testbed, lease_cost, transfer_cost
from .heft import heft_makespan
from .optimizer import SwarmConfig, run
from .schedule import Decoder, Schedule, decode, verify_schedule
from .workflow import TaskGraph, layered_dag, load_workflow

__version__ = "0.1.0"

__all__ = [
    "Decoder",
    "MultiCloudSystem",
    "Schedule",
    "SwarmConfig",
    "TaskGraph",
    "decode",
    "default_testbed",
    "heft_makespan",
    "layered_dag",
    "lease_cost",
    "load_workflow",
    "run",
    "transfer_cost",
    "verify_schedule",
]
