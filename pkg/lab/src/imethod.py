"""
The I-operator I_N, the modified energy E(Iu), the commutator
I(|u|^2 u) - |Iu|^2 Iu, and the trajectory-level diagnostics built on them.
"""
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import src.solver as solver
import src.spectral as spectral
import src.utils as utils
import src.validators as validators
from cachetools import LRUCache, cached
from scipy.interpolate import CubicHermiteSpline
from src.errors import ConfigurationError, IntegrationFailure, NumericError
from src.monitoring import logger
from src.schemas import (
    AdmissiblePairSet,
    IMultiplierSpec,
    NormComparison,
    SolverConfig,
    SweepReport,
    SweepRow,
)
from src.solver import Trajectory
from src.spectral import Field

LOG2 = math.log(2.0)


@cached(cache=LRUCache(maxsize=64), lock=threading.Lock())
def _bridge(s: float) -> CubicHermiteSpline:
    """Cubic Hermite bridge for log m against log(|xi|/N) on [0, log 2].

    Matches value and slope of log m = 0 at the left end and of
    log m = (s - 1) log(|xi|/N) at the right end.
    """
    return CubicHermiteSpline(
        [0.0, LOG2], [0.0, (s - 1.0) * LOG2], [0.0, s - 1.0], extrapolate=False
    )


def m_value(
    spec: IMultiplierSpec, xi: Union[float, np.ndarray]
) -> Union[float, np.ndarray]:
    """Radial multiplier m_N evaluated at |xi| (``xi`` holds magnitudes)."""
    r = np.abs(np.asarray(xi, dtype=float))
    ratio = r / spec.N
    m = np.ones_like(ratio)
    outer = ratio >= 2.0
    m[outer] = ratio[outer] ** (spec.s - 1.0)
    bridge = (ratio > 1.0) & ~outer
    if bridge.any():
        m[bridge] = np.exp(_bridge(spec.s)(np.log(ratio[bridge])))
    return float(m) if m.ndim == 0 else m


def lattice_multiplier(spec: IMultiplierSpec, grid: spectral.Grid) -> np.ndarray:
    return m_value(spec, grid.kabs)


def is_identity(spec: IMultiplierSpec, grid: spectral.Grid) -> bool:
    return bool(grid.kabs.max() <= spec.N)


def apply_I(u: Field, spec: IMultiplierSpec) -> Field:
    # I is the identity once every lattice mode sits below the cutoff
    if is_identity(spec, u.grid):
        return u
    return spectral.apply_multiplier(u, lattice_multiplier(spec, u.grid))


def modified_energy(
    u: Field, spec: IMultiplierSpec, dealias: bool = True, nonlinear: bool = True
) -> float:
    return solver.energy(apply_I(u, spec), dealias, nonlinear)


def split_nonlinearity(
    u: Field, spec: IMultiplierSpec, dealias: bool = True
) -> Tuple[Field, Field]:
    """Return (N_g, N_b) = (|Iu|^2 Iu, I(|u|^2 u) - |Iu|^2 Iu)."""
    good = spectral.cubic(apply_I(u, spec), dealias)
    bad = apply_I(spectral.cubic(u, dealias), spec) - good
    return good, bad


def commutator_field(u: Field, spec: IMultiplierSpec, dealias: bool = True) -> Field:
    return split_nonlinearity(u, spec, dealias)[1]


def commutator_norm_l1l2(traj: Trajectory, spec: IMultiplierSpec) -> float:
    norms = [
        spectral.lp_norm(commutator_field(u, spec, traj.config.dealias), 2)
        for u in traj.snapshots
    ]
    return utils.trapezoid(norms, traj.times)


def norm_comparison(u: Field, spec: IMultiplierSpec) -> NormComparison:
    """Measured constants of |Iu|_H1 <~ N^(1-s)|u|_Hs and |u|_Hs <~ |Iu|_H1."""
    h1 = spectral.sobolev_norm(apply_I(u, spec), 1.0)
    hs = spectral.sobolev_norm(u, spec.s)
    return NormComparison(
        upper_constant=h1 / (spec.N ** (1.0 - spec.s) * hs),
        lower_constant=hs / h1,
    )


def _bracket_derivative(u: Field, spec: IMultiplierSpec) -> Field:
    """<D> I u, multiplier (1 + |xi|^2)^(1/2) m(xi)."""
    symbol = np.sqrt(1.0 + u.grid.k2) * lattice_multiplier(spec, u.grid)
    return spectral.apply_multiplier(u, symbol)


def _space_norm(u: Field, r: float) -> float:
    return float((u.grid.dx**2 * np.sum(np.sqrt(u.abs2()) ** r)) ** (1.0 / r))


def z_diagnostic(
    traj: Trajectory,
    spec: IMultiplierSpec,
    pairs: Optional[AdmissiblePairSet] = None,
) -> float:
    """Max over admissible (q, r) of the L^q_t L^r_x norm of <D> I u."""
    pairs = pairs or AdmissiblePairSet()
    derivatives = [_bracket_derivative(u, spec) for u in traj.snapshots]
    best = 0.0
    for pair in pairs.pairs:
        norms = np.array([_space_norm(d, pair.r) for d in derivatives])
        if math.isinf(pair.q):
            value = float(norms.max())
        else:
            value = utils.trapezoid(norms**pair.q, traj.times) ** (1.0 / pair.q)
        best = max(best, value)
    return best


def iu_quartic_pieces(traj: Trajectory, spec: IMultiplierSpec) -> np.ndarray:
    """Trapezoid contribution of each sample interval to the integral of |Iu|^4."""
    quartic = np.array(
        [
            spectral.quartic_integral(apply_I(u, spec), traj.config.dealias)
            for u in traj.snapshots
        ]
    )
    return 0.5 * np.diff(traj.times) * (quartic[1:] + quartic[:-1])


def energy_derivative(
    u: Field, spec: IMultiplierSpec, dealias: bool = True, nonlinear: bool = True
) -> float:
    """
    d/dt E(Iu) along the flow through u:
    -Re integral of Iu_t conj(I(|u|^2 u) - |Iu|^2 Iu), with Iu_t = i(Lap Iu - I(|u|^2 u)).
    """
    if not nonlinear or is_identity(spec, u.grid):
        return 0.0
    good, bad = split_nonlinearity(u, spec, dealias)
    iu_t = 1j * (spectral.laplacian(apply_I(u, spec)).values - (good.values + bad.values))
    return -spectral.inner(iu_t, np.conj(bad.values), u.grid.dx)


def energy_scale(
    u: Field,
    spec: IMultiplierSpec,
    target: float = 1.0,
    dealias: bool = True,
    nonlinear: bool = True,
) -> float:
    """Amplitude factor c with E(I(c u)) = target."""
    Iu = apply_I(u, spec)
    kinetic = solver.kinetic_energy(Iu)
    quartic = 0.25 * spectral.quartic_integral(Iu, dealias) if nonlinear else 0.0
    if kinetic + quartic == 0.0:
        raise NumericError("Cannot normalize the modified energy of a zero field")
    # c^2 K + c^4 Q = target
    c2 = 2.0 * target / (kinetic + math.sqrt(kinetic**2 + 4.0 * quartic * target))
    return math.sqrt(c2)


@dataclass
class IncrementIntegral:
    """Step observer integrating d/dt E(Iu) by the trapezoid rule over every step."""

    spec: IMultiplierSpec
    dealias: bool = True
    nonlinear: bool = True
    value: float = 0.0
    sup: float = 0.0
    _last: Optional[Tuple[float, float]] = None

    def __call__(self, t: float, u: Field):
        rate = energy_derivative(u, self.spec, self.dealias, self.nonlinear)
        if self._last is not None:
            t0, rate0 = self._last
            self.value += 0.5 * (t - t0) * (rate + rate0)
            self.sup = max(self.sup, abs(self.value))
        self._last = (t, rate)


def _sup_change(values: Sequence[float]) -> float:
    values = np.asarray(values, dtype=float)
    return float(np.max(np.abs(values - values[0])))


def _sweep_row(
    u0: Field, s: float, N: float, cfg: SolverConfig, target: float
) -> Tuple[Optional[SweepRow], Optional[dict]]:
    spec = IMultiplierSpec(s=s, N=N)
    scale = energy_scale(u0, spec, target, cfg.dealias, cfg.nonlinear)
    integral = IncrementIntegral(spec, cfg.dealias, cfg.nonlinear)
    failure = None
    try:
        traj = solver.evolve(u0 * scale, cfg, step_observers=[integral])
    except IntegrationFailure as e:
        logger.warning(
            "Sweep evolution failed", extra={"N": N, "step": e.step, "error": e.kind}
        )
        traj, failure = e.trajectory, e.to_dict()
    if traj is None or len(traj) == 0:
        return None, failure

    energies = [
        modified_energy(u, spec, cfg.dealias, cfg.nonlinear) for u in traj.snapshots
    ]
    row = SweepRow(
        N=N,
        amplitude_scale=scale,
        sup_increment=_sup_change(energies),
        drift_baseline=_sup_change([record.energy for record in traj.records]),
        commutator_increment=integral.sup,
        commutator_l1l2=commutator_norm_l1l2(traj, spec),
    )
    return row, failure


def increment_sweep(
    u0: Field,
    s: float,
    N_list: Iterable[float],
    cfg: SolverConfig,
    workers: int = 1,
    energy_target: float = 1.0,
) -> SweepReport:
    """
    Growth of E(Iu) over [0, T] for each cutoff, with least-squares log-log slopes.

    For every N the amplitude is rescaled so that E(Iu(0)) = energy_target and the
    rescaled data is evolved on its own. Each row carries the sampled
    sup_t |E(Iu(t)) - E(Iu(0))|, the same quantity for E(u) (the solver drift that
    any cutoff inherits), and sup_t of the time integral of d/dt E(Iu) taken at
    every step. The increment slope is fitted to the last column, which excludes
    the solver drift.
    """
    Ns = sorted(float(N) for N in N_list)
    if not Ns:
        raise NumericError("increment_sweep needs at least one cutoff")
    try:
        validators.is_positive("energy_target", energy_target)
    except ValueError as e:
        raise ConfigurationError(str(e), energy_target=energy_target)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(
            pool.map(lambda N: _sweep_row(u0, s, N, cfg, energy_target), Ns)
        )
    rows: List[SweepRow] = [row for row, _ in results if row is not None]
    failures = [failure for _, failure in results if failure is not None]

    for i, row in enumerate(rows):
        row.slope_so_far = utils.loglog_slope(
            [r.N for r in rows[: i + 1]],
            [r.commutator_increment for r in rows[: i + 1]],
        )
    Ns_kept = [r.N for r in rows]
    return SweepReport(
        rows=rows,
        increment_slope=rows[-1].slope_so_far if rows else None,
        raw_increment_slope=utils.loglog_slope(
            Ns_kept, [r.sup_increment for r in rows]
        ),
        commutator_slope=utils.loglog_slope(
            Ns_kept, [r.commutator_l1l2 for r in rows]
        ),
        energy_target=energy_target,
        complete=not failures,
        failure=failures[0] if failures else None,
    )


def sweep_cutoffs(grid: spectral.Grid, lattice_units: Sequence[float]) -> List[float]:
    """Convert cutoffs given in units of 2 pi / L into wavenumbers."""
    return [float(N) * 2 * math.pi / grid.L for N in lattice_units]
