from .stats import ValidationSummary, validate
from .verify import digest_file, verify_agreement
from .workloads import Workload, WorkloadReport, run_workload, compute_rate

__all__ = [
    "ValidationSummary",
    "validate",
    "digest_file",
    "verify_agreement",
    "Workload",
    "WorkloadReport",
    "run_workload",
    "compute_rate",
]
