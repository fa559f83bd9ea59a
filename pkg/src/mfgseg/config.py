"""Run configuration: a single JSON document, parsed strictly.

Every section is a dataclass; unknown keys anywhere raise ``ConfigError``
and all values go through the module-level validators before any solve
starts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .continuation import StepPolicy
from .grid1d import Grid
from .interactions import InteractionPair, linear_pair
from .nash import BestResponseConfig

FORMATS = ("csv", "json")


class ConfigError(ValueError):
    pass


def _strict(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass
class KickConfig:
    k: int = 1
    eps: float = 0.1


@dataclass
class NashSection:
    nu: float
    damping: float = 0.5
    tol: float = 1e-10
    max_iters: int = 5000
    kick: dict | None = None

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("nu must be positive")

    def solver_config(self) -> BestResponseConfig:
        pert = None
        if self.kick is not None:
            kick = _strict(KickConfig, self.kick, "nash.kick")
            pert = (kick.k, kick.eps)
        return BestResponseConfig(self.damping, self.max_iters, self.tol, pert)


@dataclass
class VariationalSection:
    gamma1: float = 1.0
    gamma2: float = 1.0
    beta: float | None = None
    beta_list: list | None = None
    warm_start: bool = True

    def __post_init__(self):
        if (self.beta is None) == (self.beta_list is None):
            raise ValueError("give exactly one of 'beta' and 'beta_list'")
        betas = self.betas
        if not betas or any(not b > 0 for b in betas):
            raise ValueError("betas must be positive")
        if self.warm_start and any(a >= b for a, b in zip(betas[:-1], betas[1:])):
            raise ValueError("a warm-started beta_list must be strictly increasing")
        if not (self.gamma1 > 0 and self.gamma2 > 0):
            raise ValueError("gammas must be positive")

    @property
    def betas(self) -> list:
        return [float(self.beta)] if self.beta is not None else [float(b) for b in self.beta_list]


@dataclass
class BranchSection:
    k: int | list = 1
    target_nu_min: float = 1e-3
    steps: dict = field(default_factory=dict)

    def __post_init__(self):
        ks = self.ks
        if not ks or any(int(k) != k or k < 1 for k in ks):
            raise ValueError("k must be a positive integer or a list of them")
        if not self.target_nu_min > 0:
            raise ValueError("target_nu_min must be positive")
        self.policy()

    @property
    def ks(self) -> list:
        return [int(k) for k in (self.k if isinstance(self.k, list) else [self.k])]

    def policy(self) -> StepPolicy:
        return _strict(StepPolicy, self.steps, "branch.steps")


@dataclass
class DiagnoseSection:
    input: str


@dataclass
class OutputSection:
    directory: str = "out"
    formats: list = field(default_factory=lambda: list(FORMATS))

    def __post_init__(self):
        bad = set(self.formats) - set(FORMATS)
        if bad or not self.formats:
            raise ValueError(f"formats must be a non-empty subset of {FORMATS}")


@dataclass
class RunConfig:
    grid: Grid
    pair: InteractionPair
    output: OutputSection
    nash: NashSection | None = None
    variational: VariationalSection | None = None
    branch: BranchSection | None = None
    diagnose: DiagnoseSection | None = None

    SECTIONS = ("grid", "interactions", "nash", "variational", "branch", "diagnose", "output")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        extra = set(data) - set(cls.SECTIONS)
        if extra:
            raise ConfigError(f"unknown top-level keys {sorted(extra)}")
        grid_d = data.get("grid", {"M": 256})
        if not isinstance(grid_d, dict) or set(grid_d) - {"M"}:
            raise ConfigError("grid: only the key 'M' is allowed")
        try:
            grid = Grid(grid_d.get("M", 256))
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}") from exc
        try:
            pair = InteractionPair.from_dict(data["interactions"]) if "interactions" in data else linear_pair()
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"interactions: {exc}") from exc
        sections = {}
        for name, kind in (("nash", NashSection), ("variational", VariationalSection),
                           ("branch", BranchSection), ("diagnose", DiagnoseSection)):
            if data.get(name) is not None:
                sections[name] = _strict(kind, data[name], name)
        if "nash" in sections:
            try:
                sections["nash"].solver_config()
            except ValueError as exc:
                raise ConfigError(f"nash: {exc}") from exc
        output = _strict(OutputSection, data.get("output", {}), "output")
        if "variational" in sections and not pair.is_linear:
            raise ConfigError("variational: needs linear interactions")
        return cls(grid, pair, output, **sections)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(data)
