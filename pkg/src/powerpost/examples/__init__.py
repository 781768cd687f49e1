"""Case studies and a uniform problem description used by the command line."""
from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..core import RandomStream
from ..errors import ParameterError
from ..likelihood import Dataset, LikelihoodModel
from . import example1, example2, example3

__all__ = ["example1", "example2", "example3", "Problem", "build_problem", "CONFIG_CLASSES"]

CONFIG_CLASSES = {1: example1.Example1Config, 2: example2.Example2Config,
                  3: example3.Example3Config}


@dataclass
class Problem:
    """Everything a pipeline needs: data, model, prior, and lattice defaults."""

    example: int
    config: object
    data: Dataset
    model: LikelihoodModel
    prior_sampler: Callable
    lattice_logpdf: Callable
    box: Callable  # alpha -> box
    resolution: int
    log_tilt: Optional[Callable] = None
    log_domain_fallback: bool = False
    extra: dict = field(default_factory=dict)

    def config_dict(self) -> dict:
        return _jsonable(dataclasses.asdict(self.config))

    def write_dataset(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if self.example == 1:
                w.writerow(["y"])
                w.writerow(["%.17g" % self.data.values[0][0]])
            elif self.example == 2:
                w.writerow(["receiver", "t", "y"])
                for r, block in enumerate(self.data.values):
                    for t, y in zip(self.data.support, block):
                        w.writerow([r + 1, "%.17g" % t, "%.17g" % y])
            else:
                w.writerow(["y1", "y2"])
                for a, b in zip(*self.data.values):
                    w.writerow(["%.17g" % a, "%.17g" % b])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def make_config(example: int, overrides: Optional[dict] = None):
    """Config dataclass for ``example`` with JSON ``overrides`` applied.

    Example 3 accepts ``"preset": "twenty"`` for the 20-mode table.
    """
    if example not in CONFIG_CLASSES:
        raise ParameterError(f"unknown example {example!r}; choose 1, 2 or 3")
    overrides = dict(overrides or {})
    cls = CONFIG_CLASSES[example]
    if example == 3 and overrides.pop("preset", None) == "twenty":
        overrides.setdefault("modes", example3.MODES_20)
        overrides.setdefault("weights", tuple([1.0 / 20] * 20))
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(overrides) - names
    if unknown:
        raise ParameterError(f"unknown config keys for example {example}: {sorted(unknown)}")
    conv = {k: (tuple(tuple(x) if isinstance(x, list) else x for x in v) if isinstance(v, list) else v)
            for k, v in overrides.items()}
    return cls(**conv)


def build_problem(example: int, stream: RandomStream, overrides: Optional[dict] = None) -> Problem:
    """Generate data from ``stream`` and assemble the model for one case study."""
    cfg = make_config(example, overrides)
    if example == 1:
        data = example1.generate_data(cfg, stream)
        y = data.values[0][0]
        return Problem(1, cfg, data, example1.model(cfg), example1.prior_sampler(cfg),
                       example1.prior_logpdf(cfg),
                       box=lambda a: example1.default_box(cfg, y, a), resolution=512)
    if example == 2:
        data = example2.generate_data(cfg, stream)
        mdl = example2.model(cfg)
        return Problem(2, cfg, data, mdl, example2.prior_sampler(cfg),
                       example2.prior_logpdf(cfg, with_s=False),
                       box=lambda a: example2.default_box(cfg), resolution=61,
                       log_tilt=example2.marginal_tilt(cfg, data, mdl), log_domain_fallback=True)
    data = example3.generate_data(cfg, stream)
    return Problem(3, cfg, data, example3.model(cfg, data), example3.prior_sampler(cfg),
                   example3.prior_logpdf(cfg), box=lambda a: list(cfg.box), resolution=201,
                   log_domain_fallback=True)
