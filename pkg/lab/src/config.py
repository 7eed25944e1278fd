import math
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import src.validators as validators
from dotenv import dotenv_values
from pydantic import (
    BaseModel,
    BaseSettings,
    Field,
    ValidationError,
    root_validator,
    validator,
)
from src.errors import ConfigurationError
from src.schemas import DataKind, GaussianParams, MPolicy, SolverConfig

KEY_PATTERN = re.compile(r"^\s*(?:export\s+)?([A-Za-z0-9_.]+)\s*=")
SECTION_DELIMITER = "__"


class Settings(BaseSettings):
    log_level: str = Field("INFO", description="Level of the structured logger.")
    threads: int = Field(1, description="Default size of the sweep worker pool.")
    fft_workers: int = Field(1, description="Worker threads handed to scipy.fft.")
    output_directory: str = Field("out", description="Default artifact directory.")

    class Config:
        env_prefix = "NLSLAB_"
        env_file = ".env"


settings = Settings()


def _split_list(v):
    if isinstance(v, str):
        return [item.strip() for item in v.split(",") if item.strip()]
    return v


class Section(BaseModel):
    class Config:
        extra = "forbid"
        validate_assignment = True


class GridSection(Section):
    n: int = 256
    L: float = 32.0

    @validator("n")
    def power_of_two(cls, n):
        validators.is_power_of_two(n)
        return n

    @validator("L")
    def box(cls, L):
        validators.is_positive("L", L)
        return L


class DataSection(Section):
    kind: Optional[DataKind] = Field(
        None, description="Unset picks the command default: random_hs for sweep-n."
    )
    seed: int = 0
    A: float = 1.0
    sigma: float = 1.0
    x0: Tuple[float, float] = (0.0, 0.0)
    v: Tuple[float, float] = (0.0, 0.0)
    s: float = Field(0.3, description="Regularity of random_hs data.")
    normalize_hs: Optional[float] = Field(
        None, description="Rescale random_hs data to this H^s norm."
    )

    _lists = validator("x0", "v", pre=True, allow_reuse=True)(_split_list)

    @validator("seed")
    def unsigned(cls, seed):
        if not 0 <= seed < 2**64:
            raise ValueError(f"Seed must be an unsigned 64-bit integer, got {seed}")
        return seed

    def gaussian(self) -> GaussianParams:
        return GaussianParams(A=self.A, sigma=self.sigma, x0=self.x0, v=self.v)


class SolverSection(Section):
    dt: float = 1e-3
    T: float = 1.0
    record_stride: int = 10
    dealias: bool = True
    nonlinear: bool = True
    max_mass_drift: float = 1e-6

    @validator("dt", "T")
    def positive(cls, v, field):
        validators.is_positive(field.name, v)
        return v

    @root_validator(skip_on_failure=True)
    def times(cls, values):
        validators.time_step_is_valid(values["dt"], values["T"])
        if values["record_stride"] < 1:
            raise ValueError("record_stride must be >= 1")
        return values

    def solver_config(self) -> SolverConfig:
        return SolverConfig(**self.dict())


class IMethodSection(Section):
    s: float = 0.5
    N: float = Field(8.0, description="Cutoff in lattice units of 2 pi / L.")
    N_list: List[float] = Field(
        [4.0, 8.0, 16.0, 32.0], description="Sweep cutoffs in lattice units."
    )
    region_samples: int = 100_000
    region_seed: int = 0

    _lists = validator("N_list", pre=True, allow_reuse=True)(_split_list)

    @validator("s")
    def regularity(cls, s):
        validators.regularity_is_valid(s)
        return s

    @validator("N")
    def cutoff(cls, N):
        validators.is_positive("N", N)
        return N

    @validator("N_list", each_item=True)
    def cutoffs(cls, N):
        validators.is_positive("N", N)
        return N


class MorawetzSection(Section):
    M_policy: MPolicy = MPolicy.T_cubed_root
    M: Optional[float] = None
    epsilon: float = Field(0.5, description="L4 smallness of Iu on each partition cell.")
    suite_constant: Optional[float] = None

    @root_validator(skip_on_failure=True)
    def fixed_needs_scale(cls, values):
        if values["M_policy"] is MPolicy.fixed and values.get("M") is None:
            raise ValueError("M_policy=fixed requires M")
        return values


class PlannerSection(Section):
    s: float = 0.5
    T0: float = 1.0
    m0: float = 1.0
    C_prime: float = 1.0
    C0: float = 1.0
    epsilon: float = 0.1
    delta_exp: float = 0.01


class OutputSection(Section):
    directory: str = Field(default_factory=lambda: settings.output_directory)
    formats: List[str] = ["csv", "json", "gnuplot", "snapshot", "config"]

    _lists = validator("formats", pre=True, allow_reuse=True)(_split_list)

    @validator("formats", each_item=True)
    def known(cls, fmt):
        if fmt not in {"csv", "json", "gnuplot", "snapshot", "config"}:
            raise ValueError(f"Unknown output format: {fmt}")
        return fmt


class ExperimentConfig(BaseModel):
    grid: GridSection = GridSection()
    data: DataSection = DataSection()
    solver: SolverSection = SolverSection()
    imethod: IMethodSection = IMethodSection()
    morawetz: MorawetzSection = MorawetzSection()
    planner: PlannerSection = PlannerSection()
    output: OutputSection = OutputSection()

    class Config:
        extra = "forbid"

    @root_validator(skip_on_failure=True)
    def fits_grid(cls, values):
        L = values["grid"].L
        if values["data"].kind is not DataKind.random_hs:
            validators.gaussian_fits_box(values["data"].sigma, L)
        if values["morawetz"].M_policy is MPolicy.fixed:
            validators.weight_fits_box(values["morawetz"].M, L)
        return values


def _key_lines(text: str) -> Dict[str, int]:
    lines = {}
    for number, line in enumerate(text.splitlines(), start=1):
        match = KEY_PATTERN.match(line)
        if match and not line.lstrip().startswith("#"):
            lines.setdefault(match.group(1).upper(), number)
    return lines


def _field_names(model: type) -> Dict[str, str]:
    return {name.lower(): name for name in model.__fields__}


def parse_experiment(text: str, values: Dict[str, Optional[str]]) -> ExperimentConfig:
    """Build an ExperimentConfig from parsed ``SECTION__FIELD=value`` pairs.

    Errors are collected into a single ConfigurationError whose ``problems``
    list carries the line number of each offending key.
    """
    lines = _key_lines(text)
    sections = _field_names(ExperimentConfig)
    nested: Dict[str, Dict[str, Any]] = {}
    where: Dict[Tuple[str, ...], int] = {}
    problems = []
    for key, raw in values.items():
        line = lines.get(key.upper())
        section, _, field = key.partition(SECTION_DELIMITER)
        section_name = sections.get(section.lower())
        if section_name is None or not field:
            problems.append({"line": line, "field": key, "message": "unknown section"})
            continue
        model = ExperimentConfig.__fields__[section_name].type_
        field_name = _field_names(model).get(field.lower())
        if field_name is None:
            problems.append({"line": line, "field": key, "message": "unknown field"})
            continue
        if raw is None or raw.strip() == "":
            continue
        nested.setdefault(section_name, {})[field_name] = raw.strip()
        where[(section_name, field_name)] = line
    if problems:
        raise ConfigurationError("Invalid configuration", problems=problems)
    try:
        return ExperimentConfig.parse_obj(nested)
    except ValidationError as e:
        for error in e.errors():
            loc = tuple(str(part) for part in error["loc"])
            problems.append(
                {
                    "line": where.get(loc[:2]),
                    "field": ".".join(loc),
                    "message": error["msg"],
                }
            )
        raise ConfigurationError("Invalid configuration", problems=problems)


def load_experiment(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigurationError(f"Cannot read config: {e}", path=str(path))
    return parse_experiment(text, dotenv_values(path))


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else str(value)
    if isinstance(value, (list, tuple)):
        return ",".join(_format_value(item) for item in value)
    if hasattr(value, "value"):
        return str(value.value)
    return str(value)


def dump_experiment(config: ExperimentConfig) -> str:
    lines: List[str] = []
    for section_name in ExperimentConfig.__fields__:
        section = getattr(config, section_name)
        lines.append(f"# {section_name}")
        for field_name in section.__fields__:
            value = getattr(section, field_name)
            if value is None:
                continue
            key = f"{section_name.upper()}{SECTION_DELIMITER}{field_name.upper()}"
            lines.append(f"{key}={_format_value(value)}")
        lines.append("")
    return "\n".join(lines)


def with_overrides(
    config: ExperimentConfig,
    seed: Optional[int] = None,
    out: Optional[str] = None,
) -> ExperimentConfig:
    update = {}
    if seed is not None:
        update["data"] = config.data.copy(update={"seed": seed})
    if out is not None:
        update["output"] = config.output.copy(update={"directory": out})
    return config.copy(update=update)

