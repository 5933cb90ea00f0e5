"""YAML experiment configs with strict keys.

Layout::

    model:            # one process family, keys per family
      family: bernoulli
      atoms: [0.1, 0.3]
      probs: [0.3, 0.3]
    grid:
      n: [4, 8, 16]
      samples: 500          # matched samples per n (>= 50)
      partition_depth: 5    # dyadic grid for Monte Carlo intensities
      distance: d2_empirical
      n_boot: 100           # re-pairings for the interval
      ci_level: 0.95
      mc_samples: 100000    # draws for Monte Carlo moments
      use_nu: false
      baseline: false
      workers: 1            # processes for the n-grid; results do not depend on it
    seed: {seed: 0, stream: 0}
    output: {prefix: out/run, svg: false, timing: true}
"""

from __future__ import annotations

from pathlib import Path

import yaml

from .experiments import ExperimentSpec
from .processes import RngSeed, model_from_dict

__all__ = ["ConfigError", "load_config", "spec_from_dict"]


class ConfigError(ValueError):
    pass


_GRID = {"n", "samples", "partition_depth", "distance", "n_boot", "ci_level", "mc_samples",
         "use_nu", "baseline", "workers"}
_SEED = {"seed", "stream"}
_OUTPUT = {"prefix", "svg", "timing"}
_TOP = {"model", "grid", "seed", "output"}


def _strict(block: dict, allowed: set, where: str) -> dict:
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be a mapping")
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")
    return block


def spec_from_dict(d: dict) -> tuple[ExperimentSpec, dict]:
    """Return the experiment spec and the output block."""
    _strict(d, _TOP, "config")
    if "model" not in d:
        raise ConfigError("config needs a model block")
    try:
        model = model_from_dict(d["model"])
    except (ValueError, TypeError, KeyError) as e:
        raise ConfigError(f"model: {e}") from None
    grid = _strict(d.get("grid", {}), _GRID, "grid")
    seed = _strict(d.get("seed", {}), _SEED, "seed")
    out = _strict(d.get("output", {}), _OUTPUT, "output")
    try:
        spec = ExperimentSpec(
            model=model,
            n_grid=list(grid.get("n", [4, 8, 16, 32, 64, 128, 256])),
            samples_per_n=int(grid.get("samples", 500)),
            seed=RngSeed(int(seed.get("seed", 0)), int(seed.get("stream", 0))),
            partition_depth=int(grid.get("partition_depth", 5)),
            distance=grid.get("distance", "d2_empirical"),
            output=out.get("prefix"),
            n_boot=int(grid.get("n_boot", 100)),
            ci_level=float(grid.get("ci_level", 0.95)),
            mc_samples=int(grid.get("mc_samples", 100_000)),
            use_nu=bool(grid.get("use_nu", False)),
            baseline=bool(grid.get("baseline", False)),
            timing=bool(out.get("timing", True)),
            workers=int(grid.get("workers", 1)),
        )
    except (ValueError, TypeError) as e:
        raise ConfigError(str(e)) from None
    return spec, out


def load_config(path) -> tuple[ExperimentSpec, dict]:
    try:
        d = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from None
    return spec_from_dict(d or {})
