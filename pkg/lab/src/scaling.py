"""
Scaling symmetry u -> u(t / lam^2, x / lam) / lam applied to Gaussian data, the
choice of lam that normalizes E(I u_{0,lam}), and the closed-form parameter planner.
"""
import math
from typing import Callable, List, Optional, Tuple

import src.imethod as imethod
import src.spectral as spectral
from scipy.optimize import brentq
from src.errors import ConfigurationError, InfeasibleScalingError, RegimeError
from src.monitoring import logger
from src.schemas import (
    GaussianParams,
    GridPolicy,
    IMultiplierSpec,
    LambdaSelection,
    ScalingPlan,
)
from src.spectral import Field, Grid

LAMBDA_BOUNDS = (1e-6, 1e6)
BRACKET_FACTOR = 4.0
ENERGY_TOLERANCE = 1e-6


def rescaled_params(params: GaussianParams, lam: float) -> GaussianParams:
    if not lam > 0:
        raise ConfigurationError(f"Scaling factor must be positive, got {lam}", lam=lam)
    return GaussianParams(
        A=params.A / lam,
        sigma=params.sigma * lam,
        x0=(params.x0[0] * lam, params.x0[1] * lam),
        v=(params.v[0] / lam, params.v[1] / lam),
    )


def rescaled_grid(grid: Grid, lam: float, policy: GridPolicy = GridPolicy.dilate) -> Grid:
    if GridPolicy(policy) is GridPolicy.dilate:
        return Grid(grid.n, grid.L * lam)
    return grid


def rescale_gaussian(
    params: GaussianParams,
    lam: float,
    grid: Grid,
    policy: GridPolicy = GridPolicy.dilate,
) -> Field:
    """
    Re-synthesize the rescaled Gaussian. ``dilate`` keeps n and stretches the box to
    lam L, so the sampled field is exactly the rescaled one. ``fixed`` keeps the box
    and refuses widths above L/8.
    """
    scaled = rescaled_params(params, lam)
    return spectral.synthesize_gaussian(
        rescaled_grid(grid, lam, policy), scaled.A, scaled.sigma, scaled.x0, scaled.v
    )


def _bracket(
    g: Callable[[float], float], low: float, high: float
) -> Optional[Tuple[float, float]]:
    """Expand geometrically from log lam = 0 until g changes sign."""
    limit_low, limit_high = math.log(low), math.log(high)
    step = math.log(BRACKET_FACTOR)
    g0 = g(0.0)
    if g0 == 0.0:
        return 0.0, 0.0
    frontier = {+1: (0.0, g0), -1: (0.0, g0)}
    while frontier:
        for direction in list(frontier):
            x, gx = frontier[direction]
            nxt = min(max(x + direction * step, limit_low), limit_high)
            try:
                gn = g(nxt)
            except ConfigurationError:
                del frontier[direction]
                continue
            if gx * gn <= 0:
                return (x, nxt) if x < nxt else (nxt, x)
            if nxt in (limit_low, limit_high):
                del frontier[direction]
            else:
                frontier[direction] = (nxt, gn)
    return None


def choose_lambda(
    params: GaussianParams,
    grid: Grid,
    s: float,
    N: float,
    policy: GridPolicy = GridPolicy.dilate,
    target: float = 0.4,
    dealias: bool = True,
) -> LambdaSelection:
    """Find lam with E(I u_{0,lam}) = target, bracketing then solving in log lam."""
    spec = IMultiplierSpec(s=s, N=N)

    def energy(lam: float) -> float:
        u = rescale_gaussian(params, lam, grid, policy)
        return imethod.modified_energy(u, spec, dealias)

    def g(log_lam: float) -> float:
        return energy(math.exp(log_lam)) - target

    bracket = _bracket(g, *LAMBDA_BOUNDS)
    if bracket is None:
        raise InfeasibleScalingError(
            f"No lambda in {list(LAMBDA_BOUNDS)} brackets E(Iu) = {target}",
            s=s,
            N=N,
            target=target,
        )
    a, b = bracket
    log_lam = a if a == b else brentq(g, a, b, xtol=1e-14, rtol=4 * 2.0**-52)
    lam = math.exp(log_lam)
    value = energy(lam)
    if abs(value - target) > ENERGY_TOLERANCE:
        raise InfeasibleScalingError(
            f"Selected lambda gives E(Iu) = {value}, not {target}", lam=lam, energy=value
        )

    u0 = spectral.synthesize_gaussian(grid, params.A, params.sigma, params.x0, params.v)
    ulam = rescale_gaussian(params, lam, grid, policy)
    norm0 = spectral.sobolev_norm(u0, s, homogeneous=True)
    expected = lam**-s * norm0
    error = abs(spectral.sobolev_norm(ulam, s, homogeneous=True) - expected) / max(
        expected, 1e-300
    )
    if error > ENERGY_TOLERANCE:
        logger.warning("Homogeneous Sobolev scaling check failed", extra={"error": error})
    selection = LambdaSelection(
        lam=lam,
        energy=value,
        params=rescaled_params(params, lam),
        L=rescaled_grid(grid, lam, policy).L,
        hs_scaling_error=error,
    )
    logger.info("Selected scaling factor", extra=selection.dict())
    return selection


def _positive(**values: float) -> None:
    bad: List[str] = [k for k, v in values.items() if not (math.isfinite(v) and v > 0)]
    if bad:
        raise ConfigurationError(
            f"Planner inputs must be positive: {', '.join(bad)}",
            **{k: values[k] for k in bad},
        )


def plan_parameters(
    s: float,
    T0: float,
    m0: float,
    epsilon: float,
    C_prime: float = 1.0,
    C0: float = 1.0,
    delta_exp: float = 0.01,
) -> ScalingPlan:
    """Cutoff, rescaling factor, partition count and growth exponent for horizon T0."""
    if not 0.25 < s < 1:
        raise RegimeError(f"The planner needs 1/4 < s < 1, got s={s}", s=s)
    _positive(T0=T0, m0=m0, epsilon=epsilon, C_prime=C_prime, C0=C0)
    if delta_exp < 0:
        raise ConfigurationError("delta_exp must be non-negative", delta_exp=delta_exp)

    mass_terms = m0**4 + m0**3
    N_exponent_base = 3 * s / (8 * s - 2)
    N_exponent = N_exponent_base + delta_exp
    base = 20 * C_prime * C0 ** (2 / 3) * T0 ** (1 / 3) * mass_terms / epsilon**4
    N = base**N_exponent
    clamped = N < 1.0
    if clamped:
        logger.warning("Planner cutoff below 1 clamped", extra={"N": N})
        N = 1.0
    lam = C0 * N ** ((1 - s) / s)
    partitions = 2 * C0 * lam ** (2 / 3) * T0 ** (1 / 3) * mass_terms / epsilon**4
    growth_exponent_base = s * (1 - s) / (8 * s - 2)
    growth_exponent = growth_exponent_base + delta_exp
    return ScalingPlan(
        s=s,
        T0=T0,
        m0=m0,
        epsilon=epsilon,
        C_prime=C_prime,
        C0=C0,
        delta_exp=delta_exp,
        N_exponent_base=N_exponent_base,
        N_exponent=N_exponent,
        N=N,
        clamped_N=clamped,
        lam=lam,
        partitions=partitions,
        growth_exponent_base=growth_exponent_base,
        growth_exponent=growth_exponent,
        growth_bound=T0**growth_exponent,
    )
