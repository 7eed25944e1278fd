from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
import src.spectral as spectral
from scipy import fft
from src.config import settings
from src.errors import IntegrationFailure, MassDriftError
from src.monitoring import logger
from src.schemas import DiagnosticsRecord, SolverConfig
from src.spectral import Field

Observer = Callable[[float, Field], Dict[str, float]]
StepObserver = Callable[[float, Field], None]

BASE_COLUMNS = ["t", "mass", "energy", "l4x4_accum"]
OPTIONAL_COLUMNS = ["E_Iu", "morawetz_action", "commutator_l2"]


@dataclass
class Trajectory:
    config: SolverConfig
    times: List[float] = field(default_factory=list)
    snapshots: List[Field] = field(default_factory=list)
    records: List[DiagnosticsRecord] = field(default_factory=list)
    complete: bool = True

    def __len__(self) -> int:
        return len(self.times)

    @property
    def grid(self) -> spectral.Grid:
        return self.snapshots[0].grid

    def append(self, t: float, u: Field, record: DiagnosticsRecord):
        if self.times and t <= self.times[-1]:
            raise ValueError(f"Sample time {t} does not follow {self.times[-1]}")
        self.times.append(t)
        self.snapshots.append(u)
        self.records.append(record)

    def window(self, t0: float = 0.0, t1: Optional[float] = None) -> "Trajectory":
        """Sub-trajectory of the samples with t0 <= t <= t1."""
        tol = 1e-9 * self.config.dt
        t1 = self.times[-1] if t1 is None else t1
        keep = [i for i, t in enumerate(self.times) if t0 - tol <= t <= t1 + tol]
        return Trajectory(
            config=self.config,
            times=[self.times[i] for i in keep],
            snapshots=[self.snapshots[i] for i in keep],
            records=[self.records[i] for i in keep],
            complete=self.complete,
        )

    def to_frame(self) -> pd.DataFrame:
        rows = [record.dict() for record in self.records]
        columns = BASE_COLUMNS + [
            c for c in OPTIONAL_COLUMNS if any(row[c] is not None for row in rows)
        ]
        return pd.DataFrame(rows, columns=columns)

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path


def mass(u: Field) -> float:
    return float(u.grid.dx**2 * u.abs2().sum())


def kinetic_energy(u: Field) -> float:
    coefficients = spectral.transform(u).coefficients
    power = coefficients.real**2 + coefficients.imag**2
    return float(0.5 * (u.grid.k2 * power).sum() / u.grid.area)


def energy(u: Field, dealias: bool = True, nonlinear: bool = True) -> float:
    """Hamiltonian of the selected flow: the kinetic part alone for the free flow."""
    kinetic = kinetic_energy(u)
    if not nonlinear:
        return kinetic
    return kinetic + 0.25 * spectral.quartic_integral(u, dealias)


def _half_kinetic(grid: spectral.Grid, dt: float) -> np.ndarray:
    return np.exp(-0.5j * dt * grid.k2)


def _step(values: np.ndarray, half: np.ndarray, dt: float, nonlinear: bool) -> np.ndarray:
    workers = settings.fft_workers
    values = fft.ifft2(fft.fft2(values, workers=workers) * half, workers=workers)
    if nonlinear:
        values = values * np.exp(-1j * dt * (values.real**2 + values.imag**2))
    return fft.ifft2(fft.fft2(values, workers=workers) * half, workers=workers)


def strang_step(u: Field, dt: float, nonlinear: bool = True) -> Field:
    """
    One Strang step for i u_t + Lap u = |u|^2 u: half kinetic, exact nonlinear
    rotation, half kinetic. Negative dt steps backwards.
    """
    values = _step(u.values, _half_kinetic(u.grid, dt), dt, nonlinear)
    if not np.isfinite(values).all():
        raise IntegrationFailure("Non-finite values after step", step=1)
    return Field(u.grid, values)


def _record(
    t: float,
    step: int,
    u: Field,
    cfg: SolverConfig,
    accum: float,
    observers: Sequence[Observer],
) -> DiagnosticsRecord:
    extra: Dict[str, float] = {}
    for observer in observers:
        extra.update(observer(t, u))
    return DiagnosticsRecord(
        t=t,
        step=step,
        mass=mass(u),
        energy=energy(u, cfg.dealias, cfg.nonlinear),
        l4x4_accum=accum,
        **extra,
    )


def evolve(
    u0: Field,
    cfg: SolverConfig,
    observers: Sequence[Observer] = (),
    step_observers: Sequence[StepObserver] = (),
) -> Trajectory:
    """
    Integrate from u0 to T with fixed steps, sampling every ``record_stride`` steps
    and at the final step. The spacetime integral of |u|^4 is accumulated with the
    trapezoid rule over every step. ``observers`` contribute columns to recorded
    samples; ``step_observers`` see the initial field and every step.
    """
    grid = u0.grid
    half = _half_kinetic(grid, cfg.dt)
    n_steps = cfg.n_steps
    trajectory = Trajectory(config=cfg)
    logger.info(
        "Starting evolution",
        extra={"n": grid.n, "L": grid.L, "dt": cfg.dt, "steps": n_steps},
    )

    mass0 = mass(u0)
    quartic = spectral.quartic_integral(u0, cfg.dealias)
    accum = 0.0
    trajectory.append(0.0, u0, _record(0.0, 0, u0, cfg, accum, observers))
    for hook in step_observers:
        hook(0.0, u0)

    values = u0.values
    for step in range(1, n_steps + 1):
        values = _step(values, half, cfg.dt, cfg.nonlinear)
        if not np.isfinite(values).all():
            trajectory.complete = False
            raise IntegrationFailure(
                f"Non-finite values at step {step}", step=step, trajectory=trajectory
            )
        u = Field(grid, values)
        current = mass(u)
        if mass0 > 0 and abs(current - mass0) / mass0 > cfg.max_mass_drift:
            trajectory.complete = False
            raise MassDriftError(
                f"Relative mass drift {abs(current - mass0) / mass0:.3e} at step {step}",
                step=step,
                trajectory=trajectory,
            )
        next_quartic = spectral.quartic_integral(u, cfg.dealias)
        accum += 0.5 * cfg.dt * (quartic + next_quartic)
        quartic = next_quartic
        for hook in step_observers:
            hook(step * cfg.dt, u)
        if step % cfg.record_stride == 0 or step == n_steps:
            t = step * cfg.dt
            trajectory.append(t, u, _record(t, step, u, cfg, accum, observers))
            logger.debug("Recorded sample", extra={"t": t, "step": step})

    logger.info("Finished evolution", extra={"samples": len(trajectory)})
    return trajectory
