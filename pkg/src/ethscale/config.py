"""Experiment configuration (TOML or JSON)."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .cumulants import INTEGRANDS
from .model import Observable, SymmetrySector

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

DEFAULT_DELTA = {"ising": 2.0, "xxz": 1.0, "custom": 2.0}
DEFAULT_MAX_SECTOR_DIM = 20000
DEFAULT_XXZ_REALIZATIONS = 20
RUNTIME_KEYS = ("output", "workers", "cache_dir", "allow_large")


class ConfigError(ValueError):
    pass


@dataclass
class OtocConfig:
    enabled: bool = False
    T: float = 8.0
    dt: float = 0.05
    integrand: str = "corrected"


@dataclass
class ExperimentConfig:
    model: str = "ising"
    params: dict = field(default_factory=dict)
    terms: list = field(default_factory=list)
    observable: Observable = field(default_factory=Observable)
    sizes: list = field(default_factory=lambda: [7, 9, 11, 13])
    sector: str = "auto"
    delta: float | None = None
    window_anchor: str = "min"
    realizations: int | None = None
    seed: int = 0
    otoc: OtocConfig = field(default_factory=OtocConfig)
    last_k: int = 4
    output: str = "results"
    workers: int = 1
    cache_dir: str | None = None
    max_sector_dim: int = DEFAULT_MAX_SECTOR_DIM
    allow_large: bool = False
    name: str = ""

    def __post_init__(self):
        if self.delta is None:
            self.delta = DEFAULT_DELTA.get(self.model, 2.0)
        if self.realizations is None:
            self.realizations = DEFAULT_XXZ_REALIZATIONS if self.model == "xxz" else 1
        self.validate()

    @property
    def label(self) -> str:
        return self.name or f"{self.model}_{self.observable.label}"

    def window_anchor_value(self) -> float | None:
        return None if self.window_anchor == "min" else -0.5 * self.delta

    def resolved_sector(self) -> SymmetrySector:
        if self.sector != "auto":
            return SymmetrySector.parse(self.sector)
        return {"ising": SymmetrySector.parity(1), "xxz": SymmetrySector.total_sz(0)}.get(
            self.model, SymmetrySector.none())

    def validate(self):
        if self.model not in ("ising", "xxz", "custom"):
            raise ConfigError(f"unknown model {self.model!r}")
        if not self.sizes:
            raise ConfigError("sizes must not be empty")
        if list(self.sizes) != sorted(set(self.sizes)):
            raise ConfigError("sizes must be strictly increasing")
        if self.delta <= 0:
            raise ConfigError("delta must be positive")
        if self.realizations < 1:
            raise ConfigError("realizations must be at least 1")
        if self.model != "xxz" and self.realizations != 1:
            raise ConfigError("only the disordered XXZ model takes several realizations")
        if self.last_k < 2:
            raise ConfigError("last_k must be at least 2")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.window_anchor not in ("min", "zero"):
            raise ConfigError("window_anchor must be 'min' or 'zero'")
        if self.otoc.integrand not in INTEGRANDS:
            raise ConfigError(f"otoc.integrand must be one of {INTEGRANDS}")
        sector = self.resolved_sector()
        for L in self.sizes:
            if L < 2:
                raise ConfigError("sizes must be at least 2")
            if sector.kind == "sz" and (L - sector.value) % 2:
                raise ConfigError(f"L={L} is incompatible with sector {sector}")
            kind = self.observable.kind
            if kind == "single_site_Z_center" and sector.kind == "parity" and L % 2 == 0:
                raise ConfigError(f"the center-site Z observable needs odd L in the parity sector (got {L})")
            if kind == "two_site_ZZ_center" and L % 2:
                raise ConfigError(f"the two-site center observable needs even L (got {L})")
            if kind == "custom" and max(self.observable.sites) > L:
                raise ConfigError(f"observable sites exceed L={L}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["observable"] = self.observable.to_dict()
        return d

    def hash(self) -> str:
        """Digest of everything that affects results (not output location or worker count)."""
        d = {k: v for k, v in self.to_dict().items() if k not in RUNTIME_KEYS}
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _observable_from(raw) -> Observable:
    if isinstance(raw, str):
        return Observable(raw)
    if isinstance(raw, dict):
        if "kind" in raw:
            return Observable(raw["kind"], raw.get("pauli", ""), tuple(raw.get("sites", ())))
        return Observable("custom", raw["pauli"], tuple(raw["sites"]))
    raise ConfigError(f"cannot interpret observable {raw!r}")


def config_from_dict(raw: dict) -> ExperimentConfig:
    raw = dict(raw)
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        if "observable" in raw:
            raw["observable"] = _observable_from(raw["observable"])
        if "otoc" in raw:
            raw["otoc"] = OtocConfig(**raw["otoc"])
        if "sizes" in raw:
            raw["sizes"] = [int(L) for L in raw["sizes"]]
        return ExperimentConfig(**raw)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    text = path.read_text()
    try:
        raw = json.loads(text) if path.suffix == ".json" else tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(raw)
