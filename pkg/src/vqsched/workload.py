"""Randomized job streams and their on-disk format.

A stream file is JSON lines: one header record echoing the schema version
and the generating config, then one record per job::

    {"schema": "vqsched.stream", "version": 1, "n_tiers": 2, "config": {...}}
    {"id": 1, "arrival": 0, "exec_times": [120, 310], "deadline": 611, "psi": 1003.1, "zeta": 998.2}

``deadline`` is relative to the job's arrival.
"""

import logging
import math
from pathlib import Path
from typing import List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from vqsched.exceptions import StreamFormatError
from vqsched.models import Job, Topology

logger = logging.getLogger(__name__)

SCHEMA = "vqsched.stream"
SCHEMA_VERSION = 1


class WorkloadConfig(BaseModel):
    """How a job stream is drawn.

    Attributes:
        n_tiers (int): Number of tiers N.
        n_resources (int): Resources per tier M.
        n_jobs (int): Stream length.
        seed (int): Seed of the generator.
        arrival_process (str): ``batch`` puts every arrival at time 0,
            ``poisson`` draws exponential inter-arrival gaps.
        arrival_rate (float): Mean arrivals per time unit for ``poisson``.
        exec_time_lo, exec_time_hi (int): Bounds of the uniform integer
            execution time drawn for every tier.
        cost_mean (float): Mean of the psi / zeta normal distribution.
        cost_var (float): Spread parameter; read as a variance unless
            ``cost_var_is_std`` is set.
        slack_lo, slack_hi (float): Bounds of the uniform multiplier s so that
            the deadline is ET * (1 + s).
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_tiers: int = Field(1, ge=1)
    n_resources: int = Field(1, ge=1)
    n_jobs: int = Field(25, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    arrival_process: Literal["batch", "poisson"] = "batch"
    arrival_rate: float = Field(0.005, gt=0)
    exec_time_lo: int = Field(50, ge=1)
    exec_time_hi: int = Field(500, ge=1)
    cost_mean: float = Field(1000.0, gt=0)
    cost_var: float = Field(25.0, ge=0)
    cost_var_is_std: bool = False
    slack_lo: float = Field(0.1, gt=0)
    slack_hi: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def check_bounds(self):
        if self.exec_time_hi < self.exec_time_lo:
            raise ValueError("exec_time_hi must be >= exec_time_lo")
        if self.slack_hi < self.slack_lo:
            raise ValueError("slack_hi must be >= slack_lo")
        return self

    @property
    def topology(self) -> Topology:
        return Topology(n_tiers=self.n_tiers, n_resources=self.n_resources)

    @property
    def cost_std(self) -> float:
        return self.cost_var if self.cost_var_is_std else math.sqrt(self.cost_var)


class JobStream(BaseModel):
    """An immutable, arrival-ordered list of jobs."""

    model_config = ConfigDict(frozen=True)

    n_tiers: int = Field(..., ge=1)
    config: Optional[WorkloadConfig] = None
    jobs: List[Job] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_jobs(self):
        previous = None
        for position, job in enumerate(self.jobs, start=1):
            if job.id != position:
                raise ValueError(f"job ids must be 1..l in order, got {job.id} at {position}")
            if job.n_tiers != self.n_tiers:
                raise ValueError(
                    f"job {job.id} has {job.n_tiers} exec times, expected {self.n_tiers}"
                )
            if previous is not None and job.arrival < previous:
                raise ValueError(f"job {job.id} arrives before its predecessor")
            previous = job.arrival
        return self

    def by_id(self):
        return {job.id: job for job in self.jobs}


def _positive_normal(rng: np.random.Generator, mean: float, std: float, size: int) -> np.ndarray:
    """Normal samples, redrawing non-positive ones."""
    samples = rng.normal(mean, std, size)
    bad = samples <= 0
    while bad.any():
        samples[bad] = rng.normal(mean, std, int(bad.sum()))
        bad = samples <= 0
    return samples


def generate_stream(config: WorkloadConfig) -> JobStream:
    """Draw a job stream; the same config always yields the same stream."""
    rng = np.random.default_rng(config.seed)
    n, tiers = config.n_jobs, config.n_tiers

    if config.arrival_process == "batch":
        arrivals = np.zeros(n, dtype=np.int64)
    else:
        gaps = rng.exponential(1.0 / config.arrival_rate, n)
        gaps[0] = 0.0
        arrivals = np.cumsum(np.rint(gaps)).astype(np.int64)
    exec_times = rng.integers(
        config.exec_time_lo, config.exec_time_hi + 1, size=(n, tiers), dtype=np.int64
    )
    psi = _positive_normal(rng, config.cost_mean, config.cost_std, n)
    zeta = _positive_normal(rng, config.cost_mean, config.cost_std, n)
    slack = rng.uniform(config.slack_lo, config.slack_hi, n)

    jobs = []
    for i in range(n):
        total = int(exec_times[i].sum())
        deadline = max(total + 1, math.ceil(total * (1.0 + slack[i])))
        jobs.append(
            Job(
                id=i + 1,
                arrival=int(arrivals[i]),
                exec_times=tuple(int(e) for e in exec_times[i]),
                target_completion=int(arrivals[i]) + deadline,
                service_cost=float(psi[i]),
                violation_cost=float(zeta[i]),
            )
        )
    logger.debug("generated %d jobs over %d tiers (seed %d)", n, tiers, config.seed)
    return JobStream(n_tiers=tiers, config=config, jobs=jobs)


class StreamHeader(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_: str = Field(SCHEMA, alias="schema")
    version: int = SCHEMA_VERSION
    n_tiers: int = Field(..., ge=1)
    config: Optional[WorkloadConfig] = None


class JobRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: int
    arrival: int
    exec_times: List[int]
    deadline: int
    psi: float
    zeta: float

    @classmethod
    def from_job(cls, job: Job) -> "JobRecord":
        return cls(
            id=job.id,
            arrival=job.arrival,
            exec_times=list(job.exec_times),
            deadline=job.deadline,
            psi=job.service_cost,
            zeta=job.violation_cost,
        )

    def to_job(self) -> Job:
        return Job(
            id=self.id,
            arrival=self.arrival,
            exec_times=tuple(self.exec_times),
            target_completion=self.arrival + self.deadline,
            service_cost=self.psi,
            violation_cost=self.zeta,
        )


def save_stream(stream: JobStream, path: Union[str, Path]) -> Path:
    path = Path(path)
    header = StreamHeader(n_tiers=stream.n_tiers, config=stream.config)
    lines = [header.model_dump_json(by_alias=True)]
    lines += [JobRecord.from_job(job).model_dump_json() for job in stream.jobs]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _first_field(error: ValidationError) -> Optional[str]:
    for detail in error.errors():
        if detail.get("loc"):
            return ".".join(str(part) for part in detail["loc"])
    return None


def load_stream(path: Union[str, Path]) -> JobStream:
    """Read a stream file, reporting the offending line and field on error."""
    raw = Path(path).read_bytes()
    try:
        lines = raw.decode("utf-8").splitlines()
    except UnicodeDecodeError as error:
        line = raw.count(b"\n", 0, error.start) + 1
        raise StreamFormatError(f"invalid UTF-8 at byte {error.start}", line=line) from error
    if not lines:
        raise StreamFormatError("empty stream file", line=1)
    try:
        header = StreamHeader.model_validate_json(lines[0])
    except ValidationError as error:
        raise StreamFormatError(str(error), line=1, field=_first_field(error)) from error
    if header.schema_ != SCHEMA or header.version != SCHEMA_VERSION:
        raise StreamFormatError(
            f"unsupported schema {header.schema_} v{header.version}", line=1, field="schema"
        )

    jobs = []
    for number, text in enumerate(lines[1:], start=2):
        if not text.strip():
            continue
        try:
            record = JobRecord.model_validate_json(text)
        except ValidationError as error:
            raise StreamFormatError(str(error), line=number, field=_first_field(error)) from error
        if len(record.exec_times) != header.n_tiers:
            raise StreamFormatError(
                f"expected {header.n_tiers} exec times, got {len(record.exec_times)}",
                line=number,
                field="exec_times",
            )
        try:
            jobs.append(record.to_job())
        except ValidationError as error:
            field = _first_field(error) or "deadline"
            raise StreamFormatError(str(error), line=number, field=field) from error
    try:
        return JobStream(n_tiers=header.n_tiers, config=header.config, jobs=jobs)
    except ValidationError as error:
        raise StreamFormatError(str(error), line=len(lines), field=_first_field(error)) from error
