"""Resolved run configuration: every tunable of the processing pipeline.

Defaults mirror the reference operating point: 0.1 m map resolution, a
0.5 x 0.5 m landing patch (1.85 x the 0.27 m drone diameter), alpha = 0.65 /
beta = 0.35 cost weights, 15 degree slope and 0.05 m roughness limits, and a
0.1 m voxel leaf. Configs round-trip through key=value files; unknown keys
are rejected so a typo cannot silently fall back to a default.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .cloud import PipelineParams
from .formats import ParseError, read_kv_lines, write_kv
from .grid import GridParams
from .selector import SelectorConfig

_INT_KEYS = {"seed", "threads", "sor_neighbors", "ransac_iters", "min_plane_points"}


@dataclass(frozen=True)
class RunConfig:
    resolution: float = 0.1
    seed: int = 0
    threads: int = 1
    label_corruption: float = 0.0
    pipeline: PipelineParams = field(default_factory=PipelineParams)
    grid: GridParams = field(default_factory=GridParams)
    selector: SelectorConfig = field(default_factory=SelectorConfig)

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        if not 0 <= self.label_corruption <= 1:
            raise ValueError("label_corruption must lie in [0, 1]")

    def flat(self) -> dict[str, float | int]:
        """Flattened view of every tunable, keyed by its config-file name."""
        out: dict[str, float | int] = {
            "resolution": self.resolution,
            "seed": self.seed,
            "threads": self.threads,
            "label_corruption": self.label_corruption,
        }
        for group in (self.pipeline, self.grid, self.selector):
            for f in dataclasses.fields(group):
                out[f.name] = getattr(group, f.name)
        return out

    def with_overrides(self, overrides: dict[str, float | int]) -> "RunConfig":
        """New config with the given flat keys replaced; unknown keys raise."""
        flat = self.flat()
        for key, value in overrides.items():
            if key not in flat:
                raise ParseError(f"unknown config key {key!r}")
            flat[key] = int(value) if key in _INT_KEYS else float(value)
        pipeline_names = {f.name for f in dataclasses.fields(PipelineParams)}
        grid_names = {f.name for f in dataclasses.fields(GridParams)}
        selector_names = {f.name for f in dataclasses.fields(SelectorConfig)}
        return RunConfig(
            resolution=flat["resolution"],
            seed=int(flat["seed"]),
            threads=int(flat["threads"]),
            label_corruption=flat["label_corruption"],
            pipeline=PipelineParams(**{k: flat[k] for k in pipeline_names}),
            grid=GridParams(**{k: flat[k] for k in grid_names}),
            selector=SelectorConfig(**{k: flat[k] for k in selector_names}),
        )


def save_config(path, cfg: RunConfig) -> None:
    """Echo the fully resolved configuration; reloading reproduces the run."""
    write_kv(path, {k: repr(v) for k, v in cfg.flat().items()})


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    overrides: dict[str, float | int] = {}
    for lineno, key, value in read_kv_lines(path):
        try:
            overrides[key] = float(value)
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: non-numeric value for {key!r}") from exc
    try:
        return (base or RunConfig()).with_overrides(overrides)
    except (ParseError, ValueError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
