"""Master-worker runtime: wire protocol, straggler policy, and launcher."""

from .cluster import TransportKind, launch_local_cluster, make_generator
from .master import (
    CodedEngine,
    ConfigurationError,
    IterationFailedError,
    Master,
    collect_until_decodable,
    master_run,
)
from .metrics import ExperimentMetrics, IterationStats, RoundStats, WorkerEncodeStats
from .policy import StragglerMode, StragglerPolicy, choose_stragglers
from .wire import Operand, Role
from .worker import Worker, worker_run

__all__ = [
    "TransportKind",
    "launch_local_cluster",
    "make_generator",
    "CodedEngine",
    "ConfigurationError",
    "IterationFailedError",
    "Master",
    "collect_until_decodable",
    "master_run",
    "ExperimentMetrics",
    "IterationStats",
    "RoundStats",
    "WorkerEncodeStats",
    "StragglerMode",
    "StragglerPolicy",
    "choose_stragglers",
    "Operand",
    "Role",
    "Worker",
    "worker_run",
]
