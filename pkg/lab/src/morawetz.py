"""
Interaction Morawetz machinery for the radial weight a(x, y) = f(|x - y|).

Every double integral over (x, y) is reduced to 2D periodic convolutions with
kernels tabulated on the displacement lattice w = d dx, d in [-n/2, n/2)^2:

    K = grad f(|w|),   H = Hess f(|w|),   lap = Lap f(|w|)

With rho = |u|^2, p = Im(conj(u) grad u), q = Re(conj(u) grad u) and
G_jk = Re(conj(d_j u) d_k u), the action and its time derivative are

    A        = 4 <p, K * rho>
    bilap    = -4 <rho, lap * Lap rho>
    hessian  = 8 <G_jk, H_jk * rho> - 8 <p_j, H_jk * p_k> - 8 <q_j, H_jk * q_k>
    nonlin   = 2 <rho^2, lap * rho>

and dA/dt = bilap + hessian + nonlin along the flow.
"""
import math
import threading
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np
import src.imethod as imethod
import src.solver as solver
import src.spectral as spectral
import src.validators as validators
from cachetools import LRUCache, cached
from cachetools.keys import hashkey
from src.errors import ConfigurationError, SingularityError
from src.monitoring import logger
from src.schemas import (
    ActionTermBreakdown,
    AdmissiblePairSet,
    AlmostMorawetzReport,
    IMultiplierSpec,
    InteractionReport,
    ResidualReport,
    WeightSpec,
)
from src.solver import Trajectory
from src.spectral import Field, Grid, Spectrum

OUTER_SLOPE = 100.0
# Radius whose log is the mean of log r over a square cell of side dx
CENTRE_FACTOR = math.exp(0.5 * (math.log(2) - 3 + math.pi / 2) - math.log(2))

Array = Union[float, np.ndarray]


def centre_radius(dx: float) -> float:
    return CENTRE_FACTOR * dx


def weight_eval(spec: WeightSpec, r: Array) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    (f, f', f'') of the three-branch weight

        r < M/sqrt(e):       r^2 (1 - log(r/M)) / (2M)
        M/sqrt(e) <= r <= M: f' rises from e^(-1/2) to 100 along 3t^2 - 2t^3
        r > M:               100 r
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ConfigurationError("Weight radius must be non-negative", r=float(r.min()))
    M = spec.M
    r0 = spec.inner_join
    width = M - r0
    slope0 = math.exp(-0.5)
    rise = OUTER_SLOPE - slope0

    f = np.array(OUTER_SLOPE * r, dtype=float)
    f1 = np.full_like(r, OUTER_SLOPE)
    f2 = np.zeros_like(r)

    inner = r < r0
    ri = r[inner]
    with np.errstate(divide="ignore", invalid="ignore"):
        log = np.log(ri / M)
        f[inner] = np.where(ri > 0, ri**2 * (1 - log) / (2 * M), 0.0)
        f1[inner] = np.where(ri > 0, ri / (2 * M) * (1 - 2 * log), 0.0)
        f2[inner] = (-1 - 2 * log) / (2 * M)

    bridge = (r >= r0) & (r <= M)
    t = (r[bridge] - r0) / width
    f[bridge] = 3 * M / (4 * math.e) + slope0 * (r[bridge] - r0) + rise * width * (
        t**3 - t**4 / 2
    )
    f1[bridge] = slope0 + rise * (3 * t**2 - 2 * t**3)
    f2[bridge] = rise * (6 * t - 6 * t**2) / width
    return f, f1, f2


def hessian_block(spec: WeightSpec, w: np.ndarray) -> np.ndarray:
    """2x2 Hessian f'' w w^T / r^2 + (f'/r)(I - w w^T / r^2) for w of shape (..., 2)."""
    w = np.asarray(w, dtype=float)
    r = np.linalg.norm(w, axis=-1)
    if np.any(r == 0):
        raise SingularityError("The weight Hessian is singular at w = 0")
    _, f1, f2 = weight_eval(spec, r)
    e = w / r[..., None]
    outer = e[..., :, None] * e[..., None, :]
    eye = np.eye(2)
    return f2[..., None, None] * outer + (f1 / r)[..., None, None] * (eye - outer)


def hessian_a(spec: WeightSpec, w: np.ndarray) -> np.ndarray:
    """4x4 Hessian of a(x, y) = f(|x - y|) in (x, y) at separation w = x - y."""
    H = hessian_block(spec, w)
    return np.block([[H, -H], [-H, H]])


def min_eig(spec: WeightSpec, w: np.ndarray) -> np.ndarray:
    values = np.linalg.eigvalsh(hessian_a(spec, w))
    return values[..., 0]


def laplacian_a(
    spec: WeightSpec, r: float, dx: Optional[float] = None
) -> Tuple[float, bool]:
    """
    2 (f'' + f'/r), the Laplacian of a in all four variables. At r = 0 the value is
    taken at the centre-cell radius, which needs ``dx``, and the clamp is flagged.
    """
    clamped = r == 0
    if clamped:
        if dx is None:
            raise ConfigurationError("laplacian_a at r = 0 needs the grid spacing dx")
        r = centre_radius(dx)
    _, f1, f2 = weight_eval(spec, r)
    return float(2 * (f2 + f1 / r)), bool(clamped)


@dataclass(frozen=True)
class PairKernels:
    K: Tuple[np.ndarray, np.ndarray]
    H: Tuple[Tuple[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]
    lap: np.ndarray


def pair_kernels(
    spec: WeightSpec, grid: Grid, d1: np.ndarray, d2: np.ndarray
) -> PairKernels:
    """
    Kernel values at integer displacements (d1, d2) in [-n/2, n/2). The centre cell
    uses the cell-averaged Hessian, isotropic with trace lap(r_c). On the edge
    d = -n/2 the components odd in that axis are set to zero so that the
    tabulated K stays odd and H stays even under d -> -d mod n.
    """
    d1 = np.asarray(d1)
    d2 = np.asarray(d2)
    w1, w2 = d1 * grid.dx, d2 * grid.dx
    r = np.hypot(w1, w2)
    centre = r == 0
    rr = np.where(centre, centre_radius(grid.dx), r)
    _, f1, f2 = weight_eval(spec, rr)
    e1 = np.where(centre, 0.0, w1 / rr)
    e2 = np.where(centre, 0.0, w2 / rr)
    radial = f1 / rr
    lap = f2 + radial

    K1 = np.where(centre, 0.0, f1 * e1)
    K2 = np.where(centre, 0.0, f1 * e2)
    H11 = np.where(centre, 0.5 * lap, f2 * e1**2 + radial * (1 - e1**2))
    H22 = np.where(centre, 0.5 * lap, f2 * e2**2 + radial * (1 - e2**2))
    H12 = np.where(centre, 0.0, (f2 - radial) * e1 * e2)

    edge1 = d1 == -grid.n // 2
    edge2 = d2 == -grid.n // 2
    K1 = np.where(edge1, 0.0, K1)
    K2 = np.where(edge2, 0.0, K2)
    H12 = np.where(edge1 | edge2, 0.0, H12)
    return PairKernels(K=(K1, K2), H=((H11, H12), (H12, H22)), lap=lap)


def minimum_image(grid: Grid, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Integer displacement of node i from node j wrapped into [-n/2, n/2)."""
    half = grid.n // 2
    return (np.asarray(i) - np.asarray(j) + half) % grid.n - half


def _tabulate(grid: Grid, spec: WeightSpec) -> PairKernels:
    # node index idx holds displacement idx - n/2, matching spectral.convolve
    d = np.arange(grid.n) - grid.n // 2
    D1, D2 = np.meshgrid(d, d, indexing="ij")
    return pair_kernels(spec, grid, D1, D2)


@dataclass(frozen=True)
class KernelTables:
    grid: Grid
    K: Tuple[Spectrum, Spectrum]
    H11: Spectrum
    H12: Spectrum
    H22: Spectrum
    lap: Spectrum
    bilap: Spectrum


@cached(
    cache=LRUCache(maxsize=16),
    key=lambda grid, spec: hashkey(grid, spec.M),
    lock=threading.Lock(),
)
def kernel_tables(grid: Grid, spec: WeightSpec) -> KernelTables:
    try:
        validators.weight_fits_box(spec.M, grid.L)
    except ValueError as e:
        raise ConfigurationError(str(e), M=spec.M, L=grid.L)
    tables = _tabulate(grid, spec)

    def hat(values: np.ndarray) -> Spectrum:
        return spectral.transform(Field(grid, values))

    lap = hat(tables.lap)
    logger.debug(
        "Tabulated Morawetz kernels", extra={"n": grid.n, "L": grid.L, "M": spec.M}
    )
    return KernelTables(
        grid=grid,
        K=(hat(tables.K[0]), hat(tables.K[1])),
        H11=hat(tables.H[0][0]),
        H12=hat(tables.H[0][1]),
        H22=hat(tables.H[1][1]),
        lap=lap,
        bilap=lap.multiply(-grid.k2),
    )


def _convolve(kernel: Spectrum, values: np.ndarray) -> np.ndarray:
    field = Field(kernel.grid, values)
    product = spectral.transform(field).multiply(kernel.coefficients)
    return spectral.inverse(product).values.real


def _pair(a: np.ndarray, b: np.ndarray, dx: float) -> float:
    return float(dx**2 * np.sum(a * b))


def momentum_density(u: Field) -> Tuple[np.ndarray, np.ndarray]:
    """Im(conj(u) grad u), without the factor 2 of the momentum tensor."""
    g1, g2 = spectral.gradient(u)
    ubar = np.conj(u.values)
    return (ubar * g1.values).imag, (ubar * g2.values).imag


def morawetz_action(u: Field, spec: WeightSpec) -> float:
    tables = kernel_tables(u.grid, spec)
    rho = u.abs2()
    p = momentum_density(u)
    dx = u.grid.dx
    return 4.0 * sum(_pair(p[j], _convolve(tables.K[j], rho), dx) for j in range(2))


def _hessian_form(
    tables: KernelTables, a: Tuple[np.ndarray, np.ndarray], dx: float
) -> float:
    """sum_jk <a_j, H_jk * a_k>."""
    total = _pair(a[0], _convolve(tables.H11, a[0]), dx)
    total += 2 * _pair(a[0], _convolve(tables.H12, a[1]), dx)
    total += _pair(a[1], _convolve(tables.H22, a[1]), dx)
    return total


def action_derivative_terms(
    u: Field, spec: WeightSpec, nonlinear: bool = True
) -> ActionTermBreakdown:
    """Split d/dt of the Morawetz action into its bilaplacian, Hessian and nonlinear
    parts. The Hessian part is the quadratic form of X_j = d_j u(x) u(y) - u(x) d_j u(y)
    against Hess f and is non-negative."""
    tables = kernel_tables(u.grid, spec)
    dx = u.grid.dx
    rho = u.abs2()
    g1, g2 = spectral.gradient(u)
    ubar = np.conj(u.values)
    flux1, flux2 = ubar * g1.values, ubar * g2.values
    p = (flux1.imag, flux2.imag)
    q = (flux1.real, flux2.real)
    G11 = g1.abs2()
    G22 = g2.abs2()
    G12 = (np.conj(g1.values) * g2.values).real

    bilap = -4.0 * _pair(rho, _convolve(tables.bilap, rho), dx)
    gradients = (
        _pair(G11, _convolve(tables.H11, rho), dx)
        + 2 * _pair(G12, _convolve(tables.H12, rho), dx)
        + _pair(G22, _convolve(tables.H22, rho), dx)
    )
    hessian = 8.0 * (
        gradients - _hessian_form(tables, p, dx) - _hessian_form(tables, q, dx)
    )
    nonlin = 2.0 * _pair(rho**2, _convolve(tables.lap, rho), dx) if nonlinear else 0.0
    return ActionTermBreakdown(
        term_bilaplacian=bilap, term_hessian=hessian, term_nonlinear=nonlin
    )


def field_scale(u: Field) -> float:
    """Size of the quartic quantities: max |u|^4 times the box area."""
    return float(u.abs2().max() ** 2 * u.grid.area) if u.values.size else 0.0


def action_identity_check(traj: Trajectory, spec: WeightSpec) -> ResidualReport:
    """
    Central differences of the action along the trajectory against the derivative
    terms at the midpoint sample. Residuals are relative to the largest |dA/dt|.
    """
    if len(traj) < 3:
        raise ConfigurationError(
            "The action identity needs at least 3 samples", samples=len(traj)
        )
    times = np.asarray(traj.times)
    actions = np.array([morawetz_action(u, spec) for u in traj.snapshots])
    fd = (actions[2:] - actions[:-2]) / (times[2:] - times[:-2])
    totals = np.array(
        [
            action_derivative_terms(u, spec, traj.config.nonlinear).total
            for u in traj.snapshots[1:-1]
        ]
    )
    scale = max(float(np.abs(totals).max()), float(np.abs(fd).max()), 1e-300)
    residuals = np.abs(fd - totals) / scale
    report = ResidualReport(
        max_residual=float(residuals.max()),
        samples=len(residuals),
        residuals=residuals.tolist(),
        max_lhs=float(np.abs(fd).max()),
        max_rhs=float(np.abs(totals).max()),
    )
    logger.info("Action identity residual", extra={"max_residual": report.max_residual})
    return report


def _final_index(traj: Trajectory, T: float) -> int:
    tol = 1e-9 * traj.config.dt
    index = max(i for i, t in enumerate(traj.times) if t <= T + tol)
    return index


def morawetz_scale(T: float, L: float, M: Optional[float] = None) -> Tuple[float, bool]:
    """M = T^(1/3) unless given, clamped to L/4."""
    M = T ** (1 / 3) if M is None else M
    if M > L / 4:
        logger.warning("Morawetz scale clamped to L/4", extra={"M": M, "L": L})
        return L / 4, True
    return M, False


def inner_constant(M: float) -> dict:
    """Prefactor of log(M/r) in the inner Laplacian, computed and as usually printed."""
    return {"implemented": 4.0 / M, "printed": 2.0 / M}


def _main_rhs(T: float, mass0: float, sup_h1: float) -> float:
    m0 = math.sqrt(mass0)
    return T ** (1 / 3) * (m0**3 * sup_h1 + m0**4)


def _ratio(lhs: float, rhs: float) -> float:
    if rhs == 0:
        return 0.0 if lhs == 0 else math.inf
    return lhs / rhs


def interaction_inequality_check(
    traj: Trajectory, T: Optional[float] = None, M: Optional[float] = None
) -> InteractionReport:
    """
    Spacetime |u|^4 against T^(1/3)(m0^3 sup |u|_H1_dot + m0^4) on [0, T].
    """
    T = traj.times[-1] if T is None else T
    last = _final_index(traj, T)
    M, clamped = morawetz_scale(T, traj.grid.L, M)
    lhs = traj.records[last].l4x4_accum
    sup_h1 = max(
        spectral.sobolev_norm(u, 1.0, homogeneous=True)
        for u in traj.snapshots[: last + 1]
    )
    rhs = _main_rhs(T, solver.mass(traj.snapshots[0]), sup_h1)
    return InteractionReport(
        lhs=lhs,
        rhs_main=rhs,
        ratio=_ratio(lhs, rhs),
        M=M,
        clamped=clamped,
        T=T,
        laplacian_inner_constant=inner_constant(M),
    )


def partition_cells(
    pieces: np.ndarray, epsilon: float
) -> Tuple[List[np.ndarray], float, bool]:
    """
    Fewest uniform splits of the sample intervals such that every cell has
    (integral of |Iu|^4)^(1/4) <= epsilon. Epsilon is raised to the largest single
    interval when no split can reach it.
    """
    raised = False
    largest = float(pieces.max() ** 0.25) if pieces.size else 0.0
    if largest > epsilon:
        logger.warning(
            "Single interval exceeds the L4 smallness threshold",
            extra={"epsilon": epsilon, "raised_to": largest},
        )
        epsilon, raised = largest, True
    intervals = np.arange(pieces.size)
    for count in range(1, pieces.size + 1):
        cells = np.array_split(intervals, count)
        if all(pieces[cell].sum() ** 0.25 <= epsilon for cell in cells):
            return cells, epsilon, raised
    return [intervals], epsilon, raised


def almost_morawetz_check(
    traj: Trajectory,
    ispec: IMultiplierSpec,
    T: Optional[float] = None,
    epsilon: float = 0.5,
    constant: Optional[float] = None,
    pairs: Optional[AdmissiblePairSet] = None,
    M: Optional[float] = None,
) -> AlmostMorawetzReport:
    """
    The interaction inequality for Iu with the commutator error
    sum over cells of |I(|u|^2 u) - |Iu|^2 Iu|_L1L2(cell) Z_I(cell)^3.
    """
    T = traj.times[-1] if T is None else T
    window = traj.window(0.0, T)
    M, clamped = morawetz_scale(T, traj.grid.L, M)
    iu = [imethod.apply_I(u, ispec) for u in window.snapshots]
    pieces = imethod.iu_quartic_pieces(window, ispec)
    if imethod.is_identity(ispec, traj.grid):
        # Iu = u: use the per-step accumulator, as the u-level check does
        lhs = traj.records[_final_index(traj, T)].l4x4_accum
    else:
        lhs = float(pieces.sum())
    sup_h1 = max(spectral.sobolev_norm(v, 1.0, homogeneous=True) for v in iu)
    rhs = _main_rhs(T, solver.mass(iu[0]), sup_h1)

    cells, epsilon, raised = partition_cells(pieces, epsilon)
    errors = []
    for cell in cells:
        if cell.size == 0:
            continue
        piece = window.window(window.times[cell[0]], window.times[cell[-1] + 1])
        errors.append(
            imethod.commutator_norm_l1l2(piece, ispec)
            * imethod.z_diagnostic(piece, ispec, pairs) ** 3
        )
    budget = float(sum(errors))
    energy0 = imethod.modified_energy(
        window.snapshots[0], ispec, traj.config.dealias, traj.config.nonlinear
    )
    normalized = budget / energy0**3 if energy0 > 0 else 0.0
    holds = None if constant is None else bool(lhs <= constant * (rhs + budget))
    report = AlmostMorawetzReport(
        lhs=lhs,
        rhs_main=rhs,
        error_budget=budget,
        ratio=_ratio(lhs, rhs + budget),
        M=M,
        clamped=clamped,
        T=T,
        laplacian_inner_constant=inner_constant(M),
        cells=len(errors),
        epsilon=epsilon,
        epsilon_raised=raised,
        cell_errors=errors,
        initial_modified_energy=energy0,
        normalized_error_budget=normalized,
        constant=constant,
        holds=holds,
    )
    logger.info(
        "Almost Morawetz check",
        extra={
            "lhs": lhs,
            "rhs_main": rhs,
            "error_budget": budget,
            "normalized_error_budget": normalized,
            "cells": len(errors),
        },
    )
    return report


def action_series(
    traj: Trajectory, spec: WeightSpec
) -> List[Tuple[float, float, ActionTermBreakdown]]:
    """(t, action, derivative terms) at every sample."""
    return [
        (
            t,
            morawetz_action(u, spec),
            action_derivative_terms(u, spec, traj.config.nonlinear),
        )
        for t, u in zip(traj.times, traj.snapshots)
    ]


def action_observer(spec: WeightSpec):
    def observe(t: float, u: Field) -> dict:
        return {"morawetz_action": morawetz_action(u, spec)}

    return observe

