"""Pipeline configuration: an INI file with sections, overridable from the CLI."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable

from duplexnet.errors import ConfigError

PATH_KEYS = ("market_edges", "innovation_edges", "concordance", "events", "aux")
OPTIONAL_PATH_KEYS = ("classes", "labels")


@dataclass
class Paths:
    market_edges: str = ""
    innovation_edges: str = ""
    concordance: str = ""
    events: str = ""
    aux: str = ""
    classes: str = ""
    labels: str = ""
    output_dir: str = "out"


@dataclass
class IngestParams:
    window_len: int = 5
    timing: str = "prior"
    anchors: tuple[int, ...] = tuple(range(1977, 2013, 5))
    strict_concordance: bool = True
    concordance_sides: str = "both"
    deflate: tuple[str, ...] = ("wage", "investment_pc", "energy_pc", "materials_pc", "value_added_pc")


@dataclass
class NetworkParams:
    dw_variant: str = "column"
    deflate_market_size: bool = True


@dataclass
class MetricsParams:
    damping: float = 0.85
    top_k: int = 10
    stats_threshold: float = 0.0
    similarity_threshold: float = 0.0


@dataclass
class SpillParams:
    theta: float = 0.05
    variant: str = "binary"


@dataclass
class PanelParams:
    balanced: bool = True
    iqr_multiplier: float = 30.0
    log_exempt: tuple[str, ...] = ("prod_labor_share",)
    controls: tuple[str, ...] = (
        "wage",
        "capital_intensity",
        "investment_pc",
        "rel_prod_wage",
        "energy_pc",
        "materials_pc",
    )


@dataclass
class EstimateParams:
    estimator: str = "bb_sys"
    steps: int = 1
    collapsed: bool = False
    max_instrument_lag: int | None = None
    time_dummies: bool = True
    se: str = "robust"
    weights: str = ""
    layout: str = "dp_tp"
    dependent: str = ""
    regressors: tuple[str, ...] = ()


@dataclass
class SimulateParams:
    n_industries: int = 100
    seed: int = 0
    density: float = 0.08


@dataclass
class PipelineConfig:
    paths: Paths = field(default_factory=Paths)
    ingest: IngestParams = field(default_factory=IngestParams)
    network: NetworkParams = field(default_factory=NetworkParams)
    metrics: MetricsParams = field(default_factory=MetricsParams)
    spill: SpillParams = field(default_factory=SpillParams)
    panel: PanelParams = field(default_factory=PanelParams)
    estimate: EstimateParams = field(default_factory=EstimateParams)
    simulate: SimulateParams = field(default_factory=SimulateParams)
    base_dir: Path = field(default=Path("."), repr=False)

    SECTIONS = ("paths", "ingest", "network", "metrics", "spill", "panel", "estimate", "simulate")

    def path(self, key: str) -> Path:
        raw = getattr(self.paths, key)
        p = Path(raw)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def output_dir(self) -> Path:
        return self.path("output_dir")

    def validate(self, need_inputs: bool = True) -> None:
        i = self.ingest
        if i.window_len < 1:
            raise ConfigError("ingest.window_len must be >= 1")
        if i.timing not in ("prior", "posterior"):
            raise ConfigError("ingest.timing must be prior or posterior")
        if not i.anchors:
            raise ConfigError("ingest.anchors is empty")
        if i.concordance_sides not in ("source", "target", "both"):
            raise ConfigError("ingest.concordance_sides must be source, target or both")
        if self.network.dw_variant not in ("column", "row-owner"):
            raise ConfigError("network.dw_variant must be column or row-owner")
        if not 0 < self.metrics.damping < 1:
            raise ConfigError("metrics.damping must lie in (0, 1)")
        if self.metrics.top_k < 1:
            raise ConfigError("metrics.top_k must be >= 1")
        if not 0 < self.spill.theta <= 1:
            raise ConfigError("spill.theta must lie in (0, 1]")
        if self.spill.variant not in ("binary", "weighted"):
            raise ConfigError("spill.variant must be binary or weighted")
        if not self.panel.iqr_multiplier > 0:
            raise ConfigError("panel.iqr_multiplier must be > 0")
        e = self.estimate
        if e.estimator not in ("fe_weighted", "ab_diff", "bb_sys"):
            raise ConfigError("estimate.estimator must be fe_weighted, ab_diff or bb_sys")
        if e.steps not in (1, 2):
            raise ConfigError("estimate.steps must be 1 or 2")
        if e.se not in ("robust", "twoway", "classical"):
            raise ConfigError("estimate.se must be robust, twoway or classical")
        if e.layout not in ("dp_tp", "single"):
            raise ConfigError("estimate.layout must be dp_tp or single")
        if e.layout == "single" and not (e.dependent and e.regressors):
            raise ConfigError("single layout needs estimate.dependent and estimate.regressors")
        if need_inputs:
            for key in PATH_KEYS:
                if not getattr(self.paths, key):
                    raise ConfigError(f"paths.{key} is not set")
                if not self.path(key).is_file():
                    raise ConfigError(f"paths.{key}: {self.path(key)} does not exist")
            for key in OPTIONAL_PATH_KEYS:
                if getattr(self.paths, key) and not self.path(key).is_file():
                    raise ConfigError(f"paths.{key}: {self.path(key)} does not exist")

    def parameters(self) -> dict[str, str]:
        """Flat ``section.key -> value`` view of every non-path parameter."""
        out = {}
        for sec in self.SECTIONS:
            if sec == "paths":
                continue
            for f in fields(getattr(self, sec)):
                out[f"{sec}.{f.name}"] = _render(getattr(getattr(self, sec), f.name))
        return out


def _render(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (tuple, list)):
        return ",".join(str(x) for x in v)
    if v is None:
        return ""
    return str(v)


def _coerce(raw: str, current, name: str):
    raw = raw.strip()
    if isinstance(current, bool):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    try:
        if isinstance(current, tuple):
            items = [x.strip() for x in raw.split(",") if x.strip()]
            if current and isinstance(current[0], int):
                if len(items) == 1 and ":" in items[0]:
                    lo, hi, step = (int(x) for x in items[0].split(":"))
                    return tuple(range(lo, hi + 1, step))
                return tuple(int(x) for x in items)
            return tuple(items)
        if isinstance(current, int) or (current is None and name.endswith("max_instrument_lag")):
            return int(raw) if raw else None
        if isinstance(current, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r}") from None
    return raw


def _apply(cfg: PipelineConfig, section: str, key: str, value: str) -> None:
    if section not in cfg.SECTIONS:
        raise ConfigError(f"unknown config section [{section}]")
    target = getattr(cfg, section)
    names = {f.name for f in fields(target)}
    if key not in names:
        raise ConfigError(f"unknown key {section}.{key}")
    setattr(target, key, _coerce(value, getattr(target, key), f"{section}.{key}"))


def load_config(path: str | Path | None = None, overrides: Iterable[str] = ()) -> PipelineConfig:
    """Read an INI config; ``overrides`` are ``section.key=value`` strings applied last."""
    cfg = PipelineConfig()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {path} not found")
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
        for section in parser.sections():
            for key, value in parser.items(section):
                _apply(cfg, section, key, value)
        cfg.base_dir = path.resolve().parent
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} is not section.key=value")
        lhs, value = item.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        _apply(cfg, section, key, value)
    return cfg
