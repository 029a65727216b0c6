"""
Experiment configuration: pydantic sections plus the key = value file format.

    # comment
    schedule.kind = parametric
    schedule.a = 2.0
    target.kind = iso
    target.dim = 50
    experiment.metrics = gauss-kl, sliced-w2
"""

from pathlib import Path
from typing import Dict, Any, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .. import config
from ..errors import ConfigError

METRIC_NAMES = ("gauss-kl", "gauss-w2", "sliced-w2", "knn-kl", "nll")
TARGET_KINDS = ("iso", "heterosc", "corr", "funnel", "gmm25", "custom-gaussian")
LIST_KEYS = {"target.mu", "experiment.metrics"}


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class ScheduleSection(_Section):
    kind: Literal["linear", "parametric", "cosine"] = "linear"
    a: float = 0.0
    s: float = config.COSINE_S
    beta0: float = Field(config.BETA0, gt=0)
    beta1: float = Field(config.BETA1, gt=0)
    T: float = Field(config.HORIZON, gt=0)
    sigma2: float = Field(config.SIGMA2, gt=0)


class TargetSection(_Section):
    kind: Literal["iso", "heterosc", "corr", "funnel", "gmm25", "custom-gaussian"] = "iso"
    dim: int = Field(5, ge=1)
    mu: Optional[List[float]] = None
    sigma_file: Optional[str] = None
    n_train: int = Field(config.N_TRAIN, ge=2)

    @model_validator(mode="after")
    def _check_shapes(self) -> "TargetSection":
        if self.mu is not None and len(self.mu) != self.dim:
            raise ValueError(f"mu has {len(self.mu)} entries, dim is {self.dim}")
        if self.kind == "custom-gaussian" and not self.sigma_file:
            raise ValueError("custom-gaussian needs target.sigma-file")
        if self.kind in ("funnel", "gmm25") and self.dim < 2:
            raise ValueError(f"{self.kind} needs dim >= 2")
        return self


class GridSection(_Section):
    steps: int = Field(config.N_STEPS, ge=1)


class TrainSection(_Section):
    loss: Literal["explicit", "conditional"] = "explicit"
    epochs: int = Field(config.EPOCHS, ge=1)
    lr: float = Field(config.LEARNING_RATE, gt=0)
    batch: int = Field(config.BATCH_SIZE, ge=1)
    width: int = Field(config.WIDTH, ge=2)

    @field_validator("width")
    @classmethod
    def _even_width(cls, v: int) -> int:
        if v % 2:
            raise ValueError("width must be even (sin/cos time features)")
        return v


class ExperimentSection(_Section):
    seed: int = Field(0, ge=0)
    bound: Literal["kl", "w2"] = "kl"
    refined: bool = False
    eps: str = "0"
    n_mc: int = Field(config.N_MC, ge=2)
    score: Literal["exact", "trained", "zero"] = "exact"
    scheme: Literal["em", "ei"] = "em"
    n_samples: int = Field(config.N_SAMPLES, ge=2)
    runs: int = Field(1, ge=1)
    preprocess: Literal["none", "rescale"] = "none"
    metrics: List[str] = Field(default_factory=list)

    @field_validator("eps")
    @classmethod
    def _eps_mode(cls, v: str) -> str:
        v = v.strip()
        if v == "estimate":
            return v
        try:
            value = float(v)
        except ValueError:
            raise ValueError("eps must be 'estimate' or a number") from None
        if value < 0:
            raise ValueError("eps must be >= 0")
        return v

    @field_validator("metrics")
    @classmethod
    def _known_metrics(cls, v: List[str]) -> List[str]:
        for name in v:
            if name not in METRIC_NAMES:
                raise ValueError(f"unknown metric '{name}'")
        return v


class SweepSection(_Section):
    a_min: float = config.A_MIN
    a_max: float = config.A_MAX
    a_step: float = Field(config.A_STEP, gt=0)
    # 0 disables refinement
    refine_step: float = Field(config.REFINE_STEP, ge=0)
    refine_radius: float = Field(config.REFINE_RADIUS, ge=0)

    @model_validator(mode="after")
    def _check_range(self) -> "SweepSection":
        if self.a_max < self.a_min:
            raise ValueError("a-max must be >= a-min")
        if self.refine_step > 0 and self.refine_radius < self.refine_step:
            raise ValueError("refine-radius must be >= refine-step")
        return self


class OutputSection(_Section):
    dir: str = "outputs"
    csv: str = "sweep.csv"
    report: str = "report.json"
    plot: Optional[str] = None
    log_scale: bool = False


SECTIONS: Dict[str, type] = {
    "schedule": ScheduleSection,
    "target": TargetSection,
    "grid": GridSection,
    "train": TrainSection,
    "experiment": ExperimentSection,
    "sweep": SweepSection,
    "output": OutputSection,
}


class ExperimentConfig(BaseModel):
    """
    Full experiment description; every section falls back to config.py defaults.
    """
    model_config = ConfigDict(extra="forbid")

    schedule: ScheduleSection = Field(default_factory=ScheduleSection)
    target: TargetSection = Field(default_factory=TargetSection)
    grid: GridSection = Field(default_factory=GridSection)
    train: TrainSection = Field(default_factory=TrainSection)
    experiment: ExperimentSection = Field(default_factory=ExperimentSection)
    sweep: SweepSection = Field(default_factory=SweepSection)
    output: OutputSection = Field(default_factory=OutputSection)

    def output_path(self, name: str, base_dir: Optional[Path] = None) -> Path:
        root = Path(self.output.dir)
        if not root.is_absolute() and base_dir is not None:
            root = base_dir / root
        return root / name


def _file_key(section: str, name: str) -> str:
    return f"{section}.{name.replace('_', '-')}"


def _split_line(raw: str) -> Optional[Tuple[str, str]]:
    line = raw.split("#", 1)[0].strip()
    if not line:
        return None
    if "=" not in line:
        raise ValueError("expected 'key = value'")
    key, value = line.split("=", 1)
    return key.strip(), value.strip()


def parse_config_text(text: str) -> ExperimentConfig:
    """
    Parse the key = value format into a validated ExperimentConfig.

    Raises ConfigError naming the line and key for any problem.
    """
    raw: Dict[str, Dict[str, Any]] = {}
    lines: Dict[str, int] = {}

    for lineno, line in enumerate(text.splitlines(), start=1):
        try:
            kv = _split_line(line)
        except ValueError as exc:
            raise ConfigError(str(exc), line=lineno) from None
        if kv is None:
            continue
        key, value = kv
        if "." not in key:
            raise ConfigError("keys look like 'section.name'", line=lineno, key=key)
        section, name = key.split(".", 1)
        model = SECTIONS.get(section)
        field_name = name.replace("-", "_")
        if model is None or field_name not in model.model_fields:
            raise ConfigError("unknown key", line=lineno, key=key)
        if key in lines:
            raise ConfigError(f"duplicate key (first on line {lines[key]})", line=lineno, key=key)
        lines[key] = lineno
        if key in LIST_KEYS:
            value = [v.strip() for v in value.split(",") if v.strip()]
        raw.setdefault(section, {})[field_name] = value

    try:
        return ExperimentConfig(**raw)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = [str(p) for p in err["loc"]]
        key = _file_key(loc[0], loc[1]) if len(loc) >= 2 else (loc[0] if loc else None)
        line = lines.get(key) if key else None
        if line is None and loc:
            # section-level validators: report the first line of that section
            section_lines = [n for k, n in lines.items() if k.startswith(loc[0] + ".")]
            line = min(section_lines) if section_lines else None
        raise ConfigError(err["msg"], line=line, key=key) from None


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ", ".join(_format_value(v) for v in value)
    return str(value)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical key = value text; parse_config_text inverts it."""
    out: List[str] = []
    for section in SECTIONS:
        values = getattr(cfg, section)
        for name in type(values).model_fields:
            value = getattr(values, name)
            if value is None:
                continue
            if isinstance(value, list) and not value:
                continue
            out.append(f"{_file_key(section, name)} = {_format_value(value)}")
        out.append("")
    return "\n".join(out)


def load_config(path: Path) -> ExperimentConfig:
    """
    Read and validate a config file; referenced files must exist.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    cfg = parse_config_text(text)
    sigma_file = cfg.target.sigma_file
    if sigma_file:
        resolved = Path(sigma_file)
        if not resolved.is_absolute():
            resolved = path.parent / resolved
        if not resolved.exists():
            line = None
            for lineno, raw in enumerate(text.splitlines(), start=1):
                if raw.split("#", 1)[0].strip().startswith("target.sigma-file"):
                    line = lineno
            raise ConfigError(f"file not found: {sigma_file}", line=line, key="target.sigma-file")
        cfg.target.sigma_file = str(resolved)
    return cfg
