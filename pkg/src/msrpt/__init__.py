"""Multi-task job scheduling on identical machines: M-SRPT and friends."""

from .core_model import Instance, InstanceError, Job, Task, instance_params
from .schedulers import PolicyKind, PolicySpec, parse_policy
from .sim_engine import Trace, mean_flow, run, total_flow

__version__ = "0.1.0"

__all__ = [
    "Instance",
    "InstanceError",
    "Job",
    "Task",
    "instance_params",
    "PolicyKind",
    "PolicySpec",
    "parse_policy",
    "Trace",
    "run",
    "mean_flow",
    "total_flow",
    "__version__",
]
