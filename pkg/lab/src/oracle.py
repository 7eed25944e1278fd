"""
Brute-force counterparts of the fast paths, for tiny grids only: literal double
sums over grid pairs, literal convolutions over frequency triples, and a
finite-difference check of the modified-energy derivative.
"""
import math
from typing import Iterable, List

import numpy as np
import src.imethod as imethod
import src.morawetz as morawetz
import src.spectral as spectral
from src.errors import ConfigurationError
from src.monitoring import logger
from src.schemas import IMultiplierSpec, OracleReport, ResidualReport, WeightSpec
from src.solver import Trajectory
from src.spectral import Field, Grid, Spectrum

MAX_PAIR_SUM = 16
MAX_HESSIAN_SUM = 12
BATTERY_SIZES = (8, 12, 16)
BATTERY_BOX = 8.0
BATTERY_SCALE = 2.0


def _guard(n: int, limit: int, what: str):
    if n > limit:
        raise ConfigurationError(
            f"{what} is an O(n^4) oracle limited to n <= {limit}, got n={n}",
            n=n,
            limit=limit,
        )


def _pairs(grid: Grid):
    """Flattened node indices and the minimum-image displacement of every pair."""
    i1, i2 = np.meshgrid(np.arange(grid.n), np.arange(grid.n), indexing="ij")
    i1, i2 = i1.ravel(), i2.ravel()
    d1 = morawetz.minimum_image(grid, i1[:, None], i1[None, :])
    d2 = morawetz.minimum_image(grid, i2[:, None], i2[None, :])
    return d1, d2


def direct_morawetz_action(u: Field, spec: WeightSpec) -> float:
    """2 sum_{x,y} dx^4 K(x - y) . (p(x) rho(y) - rho(x) p(y))."""
    grid = u.grid
    _guard(grid.n, MAX_PAIR_SUM, "direct_morawetz_action")
    kernels = morawetz.pair_kernels(spec, grid, *_pairs(grid))
    rho = u.abs2().ravel()
    p = [c.ravel() for c in morawetz.momentum_density(u)]
    total = 0.0
    for j in range(2):
        total += np.sum(kernels.K[j] * (p[j][:, None] * rho[None, :]))
        total -= np.sum(kernels.K[j] * (rho[:, None] * p[j][None, :]))
    return float(2.0 * grid.dx**4 * total)


def direct_hessian_term(u: Field, spec: WeightSpec) -> float:
    """4 sum_{x,y} dx^4 H_jk(x - y) Re(conj(X_j) X_k), X_j = g_j(x) u(y) - u(x) g_j(y)."""
    grid = u.grid
    _guard(grid.n, MAX_HESSIAN_SUM, "direct_hessian_term")
    kernels = morawetz.pair_kernels(spec, grid, *_pairs(grid))
    values = u.values.ravel()
    gradients = [g.values.ravel() for g in spectral.gradient(u)]
    X = [g[:, None] * values[None, :] - values[:, None] * g[None, :] for g in gradients]
    total = 0.0
    for j in range(2):
        for k in range(2):
            total += np.sum(kernels.H[j][k] * (np.conj(X[j]) * X[k]).real)
    return float(4.0 * grid.dx**4 * total)


def _linear_convolution(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Full 2D linear convolution by shifted slices of ``b``."""
    na, nb = a.shape[0], b.shape[0]
    out = np.zeros((na + nb - 1, na + nb - 1), dtype=np.complex128)
    for i in range(na):
        for j in range(na):
            if a[i, j] != 0:
                out[i : i + nb, j : j + nb] += a[i, j] * b
    return out


def direct_cubic_spectrum(u: Field) -> Spectrum:
    """
    Coefficients of |u|^2 u as the literal sum over xi1 + xi2 + xi3 = xi of
    u_hat(xi1) conj_u_hat(xi2) u_hat(xi3) / L^4. The coefficient of conj(u) at xi is
    conj(u_hat(-xi)) with -xi taken mod n, so the Nyquist mode is its own negative.
    """
    grid = u.grid
    _guard(grid.n, MAX_PAIR_SUM, "direct_cubic_spectrum")
    n = grid.n
    centred = np.fft.fftshift(spectral.transform(u).coefficients)
    flip = (-np.arange(n)) % n
    flipped = np.conj(centred[np.ix_(flip, flip)])
    # the triple sum starts at mode -3n/2, so mode xi sits at index xi + 3n/2
    full = _linear_convolution(centred, _linear_convolution(centred, flipped))
    window = full[n : 2 * n, n : 2 * n]
    return Spectrum(grid, np.fft.ifftshift(window) / grid.L**4)


def direct_convolution(a: Field, b: Field) -> Field:
    """dx^2 sum_l a[(i - l + n/2) mod n] b[l], the node-indexed periodic convolution."""
    grid = a.grid
    _guard(grid.n, MAX_PAIR_SUM, "direct_convolution")
    n = grid.n
    d1, d2 = _pairs(grid)
    index = ((d1 + n // 2) % n) * n + (d2 + n // 2) % n
    out = (a.values.ravel()[index] * b.values.ravel()[None, :]).sum(axis=1)
    return Field(grid, grid.dx**2 * out.reshape(n, n))


def fd_energy_derivative(traj: Trajectory, ispec: IMultiplierSpec) -> ResidualReport:
    """
    Central differences of E(Iu) against the integral of
    -Re(Iu_t conj(I(|u|^2 u) - |Iu|^2 Iu)), with Iu_t = i(Lap Iu - I(|u|^2 u))
    taken from the equation.
    """
    if len(traj) < 3:
        raise ConfigurationError(
            "The energy derivative check needs at least 3 samples", samples=len(traj)
        )
    cfg = traj.config
    times = np.asarray(traj.times)
    energies = np.array(
        [
            imethod.modified_energy(u, ispec, cfg.dealias, cfg.nonlinear)
            for u in traj.snapshots
        ]
    )
    lhs = np.gradient(energies, times)[1:-1]
    rhs = np.array(
        [
            imethod.energy_derivative(u, ispec, cfg.dealias, cfg.nonlinear)
            for u in traj.snapshots[1:-1]
        ]
    )
    scale = max(float(np.abs(rhs).max()), float(np.abs(lhs).max()), 1e-300)
    residuals = np.abs(lhs - rhs) / scale
    return ResidualReport(
        max_residual=float(residuals.max()),
        samples=len(residuals),
        residuals=residuals.tolist(),
        max_lhs=float(np.abs(lhs).max()),
        max_rhs=float(np.abs(rhs).max()),
    )


def battery_field(grid: Grid, seed: int = 0) -> Field:
    """A moving Gaussian with a random rough perturbation: nonzero momentum everywhere."""
    bump = spectral.synthesize_gaussian(
        grid, A=1.0, sigma=grid.L / 8, x0=(0.3, -0.2), v=(1.5, 0.5)
    )
    noise = spectral.synthesize_random_hs(grid, s=0.5, seed=seed)
    return bump + noise * (0.3 / max(float(np.sqrt(noise.abs2().max())), 1e-300))


def _field_report(quantity: str, fast: np.ndarray, direct: np.ndarray, n: int, tol):
    return OracleReport(
        quantity=quantity,
        fast=float(np.linalg.norm(fast)),
        direct=float(np.linalg.norm(direct)),
        difference=float(np.linalg.norm(fast - direct)),
        n=n,
        tolerance=tol,
    )


def run_battery(
    sizes: Iterable[int] = BATTERY_SIZES,
    L: float = BATTERY_BOX,
    M: float = BATTERY_SCALE,
    seed: int = 0,
    tolerance: float = 1e-9,
) -> List[OracleReport]:
    """Every fast path with a direct counterpart, at each grid size."""
    weight = WeightSpec(M=M)
    reports: List[OracleReport] = []
    for n in sizes:
        grid = Grid(int(n), float(L))
        u = battery_field(grid, seed)
        reports.append(
            OracleReport(
                quantity="morawetz_action",
                fast=morawetz.morawetz_action(u, weight),
                direct=direct_morawetz_action(u, weight),
                n=grid.n,
                tolerance=tolerance,
            )
        )
        if grid.n <= MAX_HESSIAN_SUM:
            reports.append(
                OracleReport(
                    quantity="term_hessian",
                    fast=morawetz.action_derivative_terms(u, weight).term_hessian,
                    direct=direct_hessian_term(u, weight),
                    n=grid.n,
                    tolerance=tolerance,
                )
            )
        reports.append(
            _field_report(
                "cubic_spectrum",
                spectral.transform(spectral.cubic(u, dealias=True)).coefficients,
                direct_cubic_spectrum(u).coefficients,
                grid.n,
                tolerance,
            )
        )
        other = spectral.synthesize_random_hs(grid, s=0.5, seed=seed + 1)
        reports.append(
            _field_report(
                "convolution",
                spectral.convolve(u, other).values,
                direct_convolution(u, other).values,
                grid.n,
                tolerance,
            )
        )
        ispec = IMultiplierSpec(s=0.5, N=2 * 2 * math.pi / grid.L)
        m = imethod.lattice_multiplier(ispec, grid)
        iu = imethod.apply_I(u, ispec)
        direct = direct_cubic_spectrum(u).coefficients * m
        direct = direct - direct_cubic_spectrum(iu).coefficients
        reports.append(
            _field_report(
                "commutator",
                spectral.transform(imethod.commutator_field(u, ispec)).coefficients,
                direct,
                grid.n,
                tolerance,
            )
        )
    failed = [r.quantity for r in reports if not r.passed]
    logger.info(
        "Oracle battery finished",
        extra={"reports": len(reports), "failed": failed},
    )
    return reports
