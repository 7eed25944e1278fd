import enum
import math
from typing import Dict, List, Optional, Tuple

import src.validators as validators
from pydantic import BaseModel, Field, PositiveInt, root_validator, validator


class FrozenModel(BaseModel):
    class Config:
        frozen = True


class SolverConfig(FrozenModel):
    dt: float = Field(..., description="Time step.")
    T: float = Field(..., description="Final time.")
    record_stride: PositiveInt = Field(1, description="Steps between recorded samples.")
    dealias: bool = Field(
        True, description="Evaluate cubic and quartic diagnostics on a 2n padded grid."
    )
    nonlinear: bool = Field(True, description="False selects the free Schrodinger flow.")
    max_mass_drift: float = Field(
        1e-6, description="Relative mass drift that aborts a run."
    )

    @root_validator(skip_on_failure=True)
    def check_times(cls, values):
        validators.time_step_is_valid(values["dt"], values["T"])
        return values

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.T / self.dt)))


class DiagnosticsRecord(BaseModel):
    t: float
    step: int
    mass: float
    energy: float
    l4x4_accum: float = Field(0.0, description="Running trapezoid of the L4 norm.")
    E_Iu: Optional[float] = None
    morawetz_action: Optional[float] = None
    commutator_l2: Optional[float] = None

    @validator("mass", "energy")
    def non_negative(cls, v, field):
        if v < 0:
            raise ValueError(f"{field.name} must be non-negative, got {v}")
        return v


class IMultiplierSpec(FrozenModel):
    s: float = Field(..., description="Regularity of the data, 0 < s < 1.")
    N: float = Field(..., description="Frequency cutoff below which I is the identity.")

    @validator("s")
    def regularity(cls, s):
        validators.regularity_is_valid(s)
        return s

    @validator("N")
    def cutoff(cls, N):
        validators.is_positive("N", N)
        return N


class WeightSpec(FrozenModel):
    M: float = Field(..., description="Interaction scale of the Morawetz weight.")

    @validator("M")
    def scale(cls, M):
        validators.is_positive("M", M)
        return M

    @property
    def inner_join(self) -> float:
        return self.M / math.sqrt(math.e)


class AdmissiblePair(FrozenModel):
    q: float
    r: float

    @root_validator(skip_on_failure=True)
    def admissible(cls, values):
        validators.pair_is_admissible(values["q"], values["r"])
        return values


def _default_pairs() -> List[AdmissiblePair]:
    return [
        AdmissiblePair(q=math.inf, r=2.0),
        AdmissiblePair(q=6.0, r=3.0),
        AdmissiblePair(q=4.0, r=4.0),
        AdmissiblePair(q=3.0, r=6.0),
    ]


class AdmissiblePairSet(FrozenModel):
    pairs: Tuple[AdmissiblePair, ...] = Field(
        default_factory=lambda: tuple(_default_pairs())
    )

    @validator("pairs")
    def non_empty(cls, pairs):
        if not pairs:
            raise ValueError("At least one admissible pair is required")
        return pairs


class GaussianParams(FrozenModel):
    A: float = 1.0
    sigma: float = 1.0
    x0: Tuple[float, float] = (0.0, 0.0)
    v: Tuple[float, float] = (0.0, 0.0)

    @validator("sigma")
    def width(cls, sigma):
        validators.is_positive("sigma", sigma)
        return sigma


class ScalingPlan(BaseModel):
    s: float
    T0: float
    m0: float
    epsilon: float
    C_prime: float
    C0: float
    delta_exp: float
    N_exponent_base: float = Field(..., description="3s/(8s-2) before the + slack.")
    N_exponent: float
    N: float
    clamped_N: bool = False
    lam: float = Field(..., description="Rescaling factor C0 N^((1-s)/s).")
    partitions: float
    growth_exponent_base: float = Field(..., description="s(1-s)/(8s-2).")
    growth_exponent: float
    growth_bound: float = Field(..., description="T0 to the growth exponent.")
    energy_initial: float = 0.4
    energy_ceiling: float = 1.0


class GridPolicy(str, enum.Enum):
    dilate = "dilate"
    fixed = "fixed"


class LambdaSelection(BaseModel):
    lam: float
    energy: float = Field(..., description="E(I u_{0,lambda}) at the selected lambda.")
    params: GaussianParams
    L: float = Field(..., description="Box side the rescaled data lives on.")
    hs_scaling_error: float = Field(
        ..., description="Relative error of |u_lam|_Hs_dot = lam^-s |u|_Hs_dot."
    )


class ActionTermBreakdown(BaseModel):
    term_bilaplacian: float
    term_hessian: float
    term_nonlinear: float
    total: float = 0.0

    @root_validator(skip_on_failure=True)
    def total_is_sum(cls, values):
        values["total"] = (
            values["term_bilaplacian"] + values["term_hessian"] + values["term_nonlinear"]
        )
        return values

    def positivity(self, scale: float, tol: float = 1e-10) -> bool:
        return self.term_hessian >= -tol * scale and self.term_nonlinear >= -tol * scale


class OracleReport(BaseModel):
    quantity: str
    fast: float
    direct: float
    difference: Optional[float] = Field(
        None, description="Norm of fast - direct when the quantity is a field."
    )
    relative_error: float = 0.0
    n: int
    tolerance: float = 1e-9
    passed: bool = True

    @root_validator(skip_on_failure=True)
    def compare(cls, values):
        direct = values["direct"]
        difference = values.get("difference")
        if difference is None:
            difference = abs(values["fast"] - direct)
        values["relative_error"] = difference / max(abs(direct), 1e-300)
        values["passed"] = values["relative_error"] <= values["tolerance"]
        return values


class ResidualReport(BaseModel):
    max_residual: float
    samples: int
    residuals: List[float] = []
    max_lhs: Optional[float] = None
    max_rhs: Optional[float] = None


class RegionReport(BaseModel):
    region: int
    samples: int
    worst_ratio: Optional[float] = None
    worst_sigma: Optional[float] = None
    arg_worst: Optional[List[List[float]]] = Field(
        None, description="Frequencies (xi1, xi2, xi3) attaining the worst ratio."
    )
    empty: bool = False
    N: float
    s: float
    seed: int
    floor_violations: int = Field(
        0, description="Samples where m(xi)|xi| < m(N)N for some xi_i (region 4)."
    )


class InteractionReport(BaseModel):
    lhs: float
    rhs_main: float
    error_budget: float = 0.0
    ratio: float
    M: float
    clamped: bool = False
    T: float
    laplacian_inner_constant: Dict[str, float] = Field(
        default_factory=dict,
        description="Inner-branch Delta a prefactor as implemented and as printed.",
    )


class AlmostMorawetzReport(InteractionReport):
    cells: int
    epsilon: float
    epsilon_raised: bool = False
    cell_errors: List[float] = []
    initial_modified_energy: float = 0.0
    normalized_error_budget: float = Field(
        0.0, description="error_budget / E(Iu(0))^3, comparable across cutoffs."
    )
    constant: Optional[float] = None
    holds: Optional[bool] = None


class SweepRow(BaseModel):
    N: float
    amplitude_scale: float = 1.0
    sup_increment: float
    drift_baseline: float = 0.0
    commutator_increment: float = 0.0
    slope_so_far: Optional[float] = None
    commutator_l1l2: Optional[float] = None


class SweepReport(BaseModel):
    rows: List[SweepRow]
    increment_slope: Optional[float] = None
    raw_increment_slope: Optional[float] = None
    commutator_slope: Optional[float] = None
    reference_rates: Dict[str, float] = Field(
        default_factory=lambda: {"almost_conservation": -1.5, "improved": -2.0}
    )
    energy_target: float = 1.0
    complete: bool = True
    failure: Optional[Dict] = None


class NormComparison(BaseModel):
    upper_constant: float = Field(..., description="|Iu|_H1 / (N^(1-s) |u|_Hs).")
    lower_constant: float = Field(..., description="|u|_Hs / |Iu|_H1.")


class DataKind(str, enum.Enum):
    @classmethod
    def _missing_(cls, value):
        for member in cls:
            if member.value.lower() == str(value).lower():
                return member
        return None

    gaussian = "gaussian"
    random_hs = "random_hs"


class MPolicy(str, enum.Enum):
    T_cubed_root = "T_cubed_root"
    fixed = "fixed"
