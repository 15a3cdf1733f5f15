"""JSON run configuration (schema: ``fairshare/schema/config.schema.json``)."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources

import jsonschema
import numpy as np

from .errors import ConfigError
from .netgen import JointChain, UserModel, build_joint_chain

COMMANDS = ("solve-p", "solve-f", "llr-e", "pof", "decay", "sweep", "simulate", "validate")


def load_schema(name: str = "config") -> dict:
    text = resources.files("fairshare").joinpath(f"schema/{name}.schema.json").read_text()
    return json.loads(text)


def validate_report(obj: dict, kind: str) -> None:
    """Check an emitted report against ``schema/report.schema.json#/$defs/<kind>``."""
    full = load_schema("report")
    jsonschema.validate(obj, {"$defs": full["$defs"], "$ref": f"#/$defs/{kind}"})


def parse_grid(text) -> list[float]:
    """``"start:stop:step"`` (endpoints inclusive within half a step) or a comma list."""
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    text = str(text).strip()
    if ":" in text:
        try:
            start, stop, step = (float(t) for t in text.split(":"))
        except ValueError as exc:
            raise ConfigError(f"bad grid {text!r}: expected start:stop:step") from exc
        if step <= 0:
            raise ConfigError(f"bad grid {text!r}: step must be positive")
        n = int(math.floor((stop - start) / step + 0.5))
        return [round(start + k * step, 12) for k in range(n + 1)]
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}") from exc


def _delta(v):
    if v is None:
        return None
    if isinstance(v, str):
        if v.lower() in ("inf", "infinity"):
            return math.inf
        raise ConfigError(f"delta: expected a number or 'inf', got {v!r}")
    return float(v)


@dataclass
class RunConfig:
    users: list[dict] | None = None
    joint: dict | None = None
    b_max: int | None = None
    b_grid: list[int] | None = None
    delta: float | None = None
    delta_grid: list[float] | None = None
    command: str | None = None
    kind: str | None = None
    seed: int = 0
    steps: int = 1_000_000
    output: str | None = None
    jobs: int = 1
    tie_rule: str = "lowest_index_first"
    solver: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.b_grid is not None:
            self.b_grid = [int(v) for v in self.b_grid]
            _increasing(self.b_grid, "b_grid")
        if self.delta_grid is not None:
            self.delta_grid = [float(v) for v in self.delta_grid]
            _increasing(self.delta_grid, "delta_grid")
        self.delta = _delta(self.delta)
        if self.command is not None and self.command not in COMMANDS:
            raise ConfigError(f"command: unknown {self.command!r}")

    @property
    def backend(self) -> str:
        return self.solver.get("backend", "simplex")

    def chain(self) -> JointChain:
        return build_joint_chain(self.user_models(), *self._joint())

    def user_models(self) -> list[UserModel]:
        out = []
        for i, u in enumerate(self.users or []):
            out.append(UserModel(tuple(u["support"]), np.array(u["transitions"], dtype=float),
                                 u.get("label", f"user{i + 1}")))
        return out

    def _joint(self):
        if not self.joint:
            return None, None
        return np.array(self.joint["kernel"], dtype=float), np.array(self.joint["states"], dtype=int)

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["delta"] is not None and math.isinf(d["delta"]):
            d["delta"] = "inf"
        return {k: v for k, v in d.items() if v is not None}


def _increasing(grid, name):
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError(f"{name}: grid must be strictly increasing")


def parse_config(obj: dict) -> RunConfig:
    try:
        jsonschema.validate(obj, load_schema())
    except jsonschema.ValidationError as exc:
        where = "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in exc.absolute_path).lstrip(".")
        raise ConfigError(f"config field {where or '<root>'}: {exc.message}") from None
    if not obj.get("users") and not obj.get("joint"):
        raise ConfigError("config needs 'users' or 'joint'")
    known = set(RunConfig.__dataclass_fields__)
    return RunConfig(**{k: v for k, v in obj.items() if k in known})


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(obj)


def dump_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True)
