"""Monte Carlo configuration: schema, validation, canonical JSON form.

Intensities may depend on time and on the driving Brownian path. A number
is a constant hazard; the object form {"base": a, "w_coeff": b,
"t_coeff": c} means the rate max(a + b*W + c*t, 0), evaluated at the left
endpoint of each step so the hazard is predictable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from ..errors import ConfigError

# so the multiplicative survival factor keeps every path's L positive and
# the loaded step bounded away from the degenerate ratio
MAX_LOADING_TIMES_CLIP = 0.9
CLIP_SIGMAS = 4.0

_INTENSITY_KEYS = {"base", "w_coeff", "t_coeff"}


@dataclass(frozen=True)
class IntensitySpec:
    """Hazard rate a + b*W_t + c*t, floored at zero."""

    base: float
    w_coeff: float = 0.0
    t_coeff: float = 0.0

    @classmethod
    def from_doc(cls, doc, where: str) -> "IntensitySpec":
        if isinstance(doc, (int, float)) and not isinstance(doc, bool):
            if doc < 0:
                raise ConfigError(f"{where}: constant intensity must be >= 0")
            return cls(base=float(doc))
        if isinstance(doc, dict):
            extra = set(doc) - _INTENSITY_KEYS
            if extra:
                raise ConfigError(f"{where}: unknown intensity fields {sorted(extra)}")
            if "base" not in doc:
                raise ConfigError(f"{where}: intensity object needs a 'base' rate")
            vals = {}
            for k in _INTENSITY_KEYS:
                v = doc.get(k, 0.0)
                if not isinstance(v, (int, float)) or isinstance(v, bool):
                    raise ConfigError(f"{where}: intensity field {k!r} must be a number")
                vals[k] = float(v)
            return cls(base=vals["base"], w_coeff=vals["w_coeff"], t_coeff=vals["t_coeff"])
        raise ConfigError(f"{where}: intensity must be a number or an object")

    def to_doc(self):
        if self.w_coeff == 0.0 and self.t_coeff == 0.0:
            return self.base
        return {"base": self.base, "w_coeff": self.w_coeff, "t_coeff": self.t_coeff}

    @property
    def constant(self) -> bool:
        return self.w_coeff == 0.0 and self.t_coeff == 0.0


@dataclass(frozen=True)
class DefaultSpec:
    """One default time: hazard, survival-martingale loading, optional
    post-default auxiliary coefficient (null in generated configs)."""

    intensity: IntensitySpec
    loading: float
    p: float | None = None

    @classmethod
    def from_doc(cls, doc: dict, where: str) -> "DefaultSpec":
        if not isinstance(doc, dict):
            raise ConfigError(f"{where}: each default must be an object")
        extra = set(doc) - {"intensity", "loading", "p"}
        if extra:
            raise ConfigError(f"{where}: unknown default fields {sorted(extra)}")
        if "intensity" not in doc:
            raise ConfigError(f"{where}: default needs an 'intensity'")
        intensity = IntensitySpec.from_doc(doc["intensity"], f"{where}.intensity")
        loading = doc.get("loading", 0.0)
        if not isinstance(loading, (int, float)) or isinstance(loading, bool) or loading < 0:
            raise ConfigError(f"{where}: loading must be a number >= 0")
        p = doc.get("p")
        if p is not None and (not isinstance(p, (int, float)) or isinstance(p, bool)):
            raise ConfigError(f"{where}: p must be null or a number")
        return cls(intensity=intensity, loading=float(loading), p=None if p is None else float(p))

    def to_doc(self) -> dict:
        return {"intensity": self.intensity.to_doc(), "loading": self.loading, "p": self.p}


@dataclass(frozen=True)
class AssetSpec:
    s0: float
    mu: float
    sigma: float

    @classmethod
    def from_doc(cls, doc: dict) -> "AssetSpec":
        if not isinstance(doc, dict):
            raise ConfigError("asset: must be an object")
        extra = set(doc) - {"s0", "mu", "sigma"}
        if extra:
            raise ConfigError(f"asset: unknown fields {sorted(extra)}")
        for k in ("s0", "mu", "sigma"):
            if k not in doc:
                raise ConfigError(f"asset: missing field {k!r}")
            if not isinstance(doc[k], (int, float)) or isinstance(doc[k], bool):
                raise ConfigError(f"asset: field {k!r} must be a number")
        if doc["s0"] <= 0:
            raise ConfigError("asset: s0 must be > 0")
        if doc["sigma"] <= 0:
            raise ConfigError("asset: sigma must be > 0")
        return cls(s0=float(doc["s0"]), mu=float(doc["mu"]), sigma=float(doc["sigma"]))

    def to_doc(self) -> dict:
        return {"s0": self.s0, "mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True)
class MCConfig:
    """Validated simulation setup.

    horizon (in steps) bounds the statistical tests; paths always run the
    full grid so every bundle is self-consistent.
    """

    n_steps: int
    dt: float
    n_paths: int
    seed: int
    asset: AssetSpec
    defaults: tuple = field(default_factory=tuple)
    horizon: int | None = None

    def __post_init__(self):
        if not isinstance(self.n_steps, int) or self.n_steps < 1:
            raise ConfigError("n_steps must be an integer >= 1")
        if not isinstance(self.n_paths, int) or self.n_paths < 1:
            raise ConfigError("n_paths must be an integer >= 1")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        if not (isinstance(self.dt, float) and self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError("dt must be a finite float > 0")
        if self.horizon is not None and not (
            isinstance(self.horizon, int) and 1 <= self.horizon <= self.n_steps
        ):
            raise ConfigError("horizon must be null or an integer in [1, n_steps]")
        clip = CLIP_SIGMAS * math.sqrt(self.dt)
        for i, d in enumerate(self.defaults):
            if d.loading * clip >= MAX_LOADING_TIMES_CLIP:
                raise ConfigError(
                    f"defaults[{i}]: loading {d.loading} too large for dt {self.dt}; "
                    f"need loading * {CLIP_SIGMAS} * sqrt(dt) < {MAX_LOADING_TIMES_CLIP} "
                    "to keep the survival recursion inside (0, 1)"
                )

    @property
    def test_horizon(self) -> int:
        return self.n_steps if self.horizon is None else self.horizon

    @classmethod
    def from_doc(cls, doc: dict) -> "MCConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        extra = set(doc) - {"n_steps", "dt", "n_paths", "seed", "asset", "defaults", "horizon"}
        if extra:
            raise ConfigError(f"unknown config fields {sorted(extra)}")
        for k in ("n_steps", "dt", "n_paths", "seed", "asset"):
            if k not in doc:
                raise ConfigError(f"missing config field {k!r}")
        raw_defaults = doc.get("defaults", [])
        if not isinstance(raw_defaults, list):
            raise ConfigError("defaults must be a list")
        defaults = tuple(
            DefaultSpec.from_doc(d, f"defaults[{i}]") for i, d in enumerate(raw_defaults)
        )
        for k in ("n_steps", "n_paths", "seed"):
            if not isinstance(doc[k], int) or isinstance(doc[k], bool):
                raise ConfigError(f"{k} must be an integer")
        dt = doc["dt"]
        if not isinstance(dt, (int, float)) or isinstance(dt, bool):
            raise ConfigError("dt must be a number")
        horizon = doc.get("horizon")
        if isinstance(horizon, bool):
            raise ConfigError("horizon must be null or an integer")
        return cls(
            n_steps=doc["n_steps"],
            dt=float(dt),
            n_paths=doc["n_paths"],
            seed=doc["seed"],
            asset=AssetSpec.from_doc(doc["asset"]),
            defaults=defaults,
            horizon=horizon,
        )

    @classmethod
    def from_file(cls, path) -> "MCConfig":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except OSError as e:
            raise ConfigError(f"cannot read config file: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file is not valid JSON: {e}") from e
        return cls.from_doc(doc)

    def to_doc(self) -> dict:
        return {
            "n_steps": self.n_steps,
            "dt": self.dt,
            "n_paths": self.n_paths,
            "seed": self.seed,
            "asset": self.asset.to_doc(),
            "defaults": [d.to_doc() for d in self.defaults],
            "horizon": self.horizon,
        }
