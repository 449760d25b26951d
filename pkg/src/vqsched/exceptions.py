"""Exceptions raised by vqsched.

Every error derives from ``SchedulingError`` which is itself a ``ValueError``,
so callers that only guard against bad values keep working.
"""

from typing import Any, Optional


class SchedulingError(ValueError):
    """Base class for all vqsched errors."""


class UnknownJobError(SchedulingError):
    def __init__(self, job_id: int, context: str = ""):
        self.job_id = job_id
        where = f" in {context}" if context else ""
        super().__init__(f"unknown job id {job_id}{where}")


class NotResidentError(SchedulingError):
    def __init__(self, job_id: int, tier: int):
        self.job_id = job_id
        self.tier = tier
        super().__init__(f"job {job_id} is not waiting in tier {tier}")


class IncompleteJobError(SchedulingError):
    def __init__(self, job_id: int):
        self.job_id = job_id
        super().__init__(f"job {job_id} has not departed the last tier")


class ScheduleInvariantError(SchedulingError):
    """A schedule does not cover exactly the pending jobs of each tier."""


class ChromosomeError(SchedulingError):
    """A chromosome is not a valid permutation over its boundaries."""


class EnumerationBoundError(SchedulingError):
    def __init__(self, size: int, bound: int):
        self.size = size
        self.bound = bound
        super().__init__(
            f"brute force enumeration is limited to {bound} jobs, got {size}"
        )


class StreamFormatError(SchedulingError):
    def __init__(self, message: str, line: int, field: Optional[str] = None):
        self.line = line
        self.field = field
        location = f"line {line}" + (f", field '{field}'" if field else "")
        super().__init__(f"{location}: {message}")


class OracleMismatchError(SchedulingError):
    def __init__(self, mismatch: Any):
        self.mismatch = mismatch
        super().__init__(f"replay diverged from simulation: {mismatch}")


class InsufficientReplicationsError(SchedulingError):
    """Strategy comparison needs more replications or strategies."""
