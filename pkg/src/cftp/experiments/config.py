"""Experiment configuration: JSON loading, overrides, hashing, data sources."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from cftp.chain import KernelSequence
from cftp.hmm import HmmModel, ObservationStream
from cftp.models import (
    build_from_config,
    drift_obs,
    random_walk_obs,
    simulate_hmm,
)
from cftp.rng import RngStream

_DATA_SOURCES = ("none", "simulated", "random_walk", "drift", "csv")


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved settings for one experiment run.

    ``model`` and ``data`` stay as plain mappings so the config can cross
    process boundaries and be hashed; builders turn them into live objects.
    ``options`` holds per-command knobs (documented in the README).
    """

    name: str
    model: dict
    data: dict
    replicates: int
    cutoff: int
    seed: int
    out_dir: str
    workers: int = 1
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.cutoff < 1:
            raise ValueError("cutoff must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        source = self.data.get("source", "none")
        if source not in _DATA_SOURCES:
            raise ValueError(
                f"unknown data source {source!r}; expected one of {_DATA_SOURCES}"
            )

    def payload(self) -> dict:
        """The hashable scientific payload: everything that shapes results.

        ``out_dir`` and ``workers`` are excluded on purpose — moving the
        output or changing the degree of parallelism must not change a byte
        of what is written.
        """
        return {
            "name": self.name,
            "model": self.model,
            "data": self.data,
            "replicates": self.replicates,
            "cutoff": self.cutoff,
            "seed": self.seed,
            "options": self.options,
        }

    def to_dict(self) -> dict:
        d = dict(self.payload())
        d["out_dir"] = self.out_dir
        d["workers"] = self.workers
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        return cls(
            name=str(raw.get("name", "run")),
            model=dict(raw.get("model", {})),
            data=dict(raw.get("data", {"source": "none"})),
            replicates=int(raw.get("replicates", 1000)),
            cutoff=int(raw.get("cutoff", 1000)),
            seed=int(raw.get("seed", 0)),
            out_dir=str(raw.get("out_dir", ".")),
            workers=int(raw.get("workers", 1)),
            options=dict(raw.get("options", {})),
        )


def config_hash(config: ExperimentConfig) -> str:
    blob = json.dumps(config.payload(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Read a JSON config file and apply non-None override values on top."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValueError("config file must hold a JSON object")
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value
    return ExperimentConfig.from_dict(raw)


def build_model(config: ExperimentConfig) -> HmmModel | KernelSequence:
    return build_from_config(config.model)


def _read_observation_csv(path) -> np.ndarray:
    """Columns (time, value) with times 0, -1, -2, ...; value at depth -time."""
    rows: dict[int, float] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        for line in reader:
            if not line or line[0].lstrip().startswith("#"):
                continue
            if line[0].strip().lower() in ("time", "t"):
                continue  # header row
            t, value = int(line[0]), float(line[1])
            if t > 0:
                raise ValueError("observation times must be nonpositive")
            if -t in rows:
                raise ValueError(f"duplicate observation at time {t}")
            rows[-t] = value
    if not rows:
        raise ValueError(f"no observations found in {path}")
    depth = max(rows)
    missing = [d for d in range(depth + 1) if d not in rows]
    if missing:
        raise ValueError(f"observation record has gaps at depths {missing[:5]}")
    return np.array([rows[d] for d in range(depth + 1)])


def build_observations(
    config: ExperimentConfig, model: HmmModel | KernelSequence
) -> ObservationStream | None:
    """Realize the configured data source, seeded from substream 0.

    Every replicate sees the same single realization; replicate randomness
    lives in substreams 1, 2, ... (one per replicate).
    """
    data = config.data
    source = data.get("source", "none")
    if source == "none":
        return None
    rng = RngStream(config.seed).substream(0)
    if source == "simulated":
        if not isinstance(model, HmmModel):
            raise ValueError("simulated data needs a model with emissions")
        length = int(data.get("length", config.cutoff + 50))
        path = simulate_hmm(model, length, rng)
        return path.stream()
    if source == "random_walk":
        return random_walk_obs(rng, sigma2=float(data.get("sigma2", 0.25)))
    if source == "drift":
        return drift_obs(
            rng,
            slope=float(data.get("slope", 0.003)),
            sigma2=float(data.get("sigma2", 0.25)),
        )
    if source == "csv":
        return ObservationStream.from_array(_read_observation_csv(data["path"]))
    raise ValueError(f"unknown data source {source!r}")


def ensure_out_dir(config: ExperimentConfig) -> Path:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out
