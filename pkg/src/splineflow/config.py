"""Run configuration shared by every CLI command."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import InvalidArgumentError, ParseError, ShapeError
from .flow_model import FIELD_KINDS, FlowField
from .spline_kernel import BlendParams, Convention


@dataclass
class RunConfig:
    field: str = "uniform"
    speed: float = 1.0
    field_params: dict = dataclasses.field(default_factory=dict)
    max_step: float = 0.01
    M: int = 1
    S: int | None = None
    N: int | None = None
    dt: float | None = None
    V: int = 10
    p: int = 1
    p_list: list = dataclasses.field(default_factory=lambda: [1])
    M_list: list = dataclasses.field(default_factory=lambda: [1024])
    stage: str = "pipeline"
    repeats: int = 3
    alpha: float = 0.5
    beta: float = 0.5
    allow_unnormalized: bool = False
    convention: str = "bezier_A"
    strict: bool = True
    raw_u: bool = False
    seed: int = 0
    format: str = "csv"
    storage: str = "constant_block"
    truth_factor: int = 20
    input: str | None = None
    output: str | None = None

    @classmethod
    def from_file(cls, path):
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(f"config is not valid JSON: {exc.msg}", exc.lineno, path) from None
        except OSError as exc:
            raise InvalidArgumentError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ParseError("config must be a key-value object", 1, path)
        return cls().updated(data)

    def updated(self, values):
        names = {f.name for f in dataclasses.fields(self)}
        clean = {}
        for key, val in values.items():
            k = key.replace("-", "_")
            if k not in names:
                raise InvalidArgumentError(f"unknown config key {key!r}")
            if val is not None:
                clean[k] = val
        return dataclasses.replace(self, **clean)

    # ---------------------------------------------------------------- derived

    @property
    def blend(self):
        return BlendParams(self.alpha, self.beta, self.allow_unnormalized)

    @property
    def conv(self):
        return Convention.parse(self.convention)

    @property
    def curve(self):
        return "u" if self.raw_u else "v"

    def flow_field(self):
        return FlowField(self.field, self.speed, dict(self.field_params), self.seed, self.max_step)

    def n_points(self):
        if self.S is not None:
            return int(self.S)
        if self.N is not None:
            return 3 * int(self.N) + 1
        return 4

    def coarse_dt(self):
        if self.dt is not None:
            return float(self.dt)
        fld = self.flow_field()
        # twelve samples per revolution by default
        return fld.period / 12.0 if fld.period is not None else 1.0

    def validate(self, need_flow=True):
        """Check every module precondition up front."""
        if self.field not in FIELD_KINDS:
            raise InvalidArgumentError(f"unknown field {self.field!r}")
        if not (math.isfinite(self.speed) and self.speed > 0):
            raise InvalidArgumentError("speed must be positive")
        for name in ("M", "V", "p", "repeats", "truth_factor"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise InvalidArgumentError(f"{name} must be a positive integer, got {v!r}")
        if self.dt is not None and not self.dt > 0:
            raise InvalidArgumentError(f"dt must be positive, got {self.dt}")
        if self.format not in ("csv", "bin"):
            raise InvalidArgumentError(f"format must be csv or bin, got {self.format!r}")
        self.blend
        self.conv
        self.flow_field()
        if need_flow:
            S = self.n_points()
            if S < 4:
                raise InvalidArgumentError(f"S must be at least 4, got {S}")
            if self.strict and (S - 1) % 3:
                raise ShapeError(f"S={S} does not satisfy (S - 1) mod 3 == 0 (strict mode)")
            if self.p > self.M:
                raise InvalidArgumentError(f"p={self.p} exceeds M={self.M}")
        return self

    def to_dict(self):
        return dataclasses.asdict(self)
