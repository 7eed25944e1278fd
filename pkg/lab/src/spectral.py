"""
Periodic grids, the physical-quadrature Fourier transform, multipliers, convolutions,
norms and initial data.

Transform convention on nodes x_j = -L/2 + j dx:

    u_hat(xi) = dx^2 sum_x u(x) exp(-i xi.x)
    u(x)      = (1/L^2) sum_xi u_hat(xi) exp(i xi.x)

so that quadrature L2 norms satisfy Parseval with weight 1/L^2 on the coefficients.
Frequencies are stored in numpy fftfreq order.
"""
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Tuple, Union

import numpy as np
import src.validators as validators
from scipy import fft
from src.config import settings
from src.errors import ConfigurationError, GridMismatch, NumericError

Multiplier = Union[np.ndarray, Callable[[np.ndarray, np.ndarray], np.ndarray]]

SNAPSHOT_HEADER = np.dtype([("n", "<u8"), ("L", "<f8")])


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Grid:
    n: int
    L: float

    def __post_init__(self):
        try:
            validators.is_even_size(self.n)
            validators.is_positive("L", self.L)
        except ValueError as e:
            raise ConfigurationError(str(e), n=self.n, L=self.L)

    @property
    def dx(self) -> float:
        return self.L / self.n

    @property
    def area(self) -> float:
        return self.L * self.L

    @cached_property
    def x(self) -> np.ndarray:
        return _readonly(-self.L / 2 + self.dx * np.arange(self.n))

    @cached_property
    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        X, Y = np.meshgrid(self.x, self.x, indexing="ij")
        return _readonly(X), _readonly(Y)

    @cached_property
    def modes(self) -> np.ndarray:
        """Integer frequencies in fftfreq order, -n/2 included once."""
        return _readonly(np.rint(fft.fftfreq(self.n, d=1.0 / self.n)).astype(np.int64))

    @cached_property
    def k(self) -> np.ndarray:
        return _readonly(2 * np.pi / self.L * self.modes)

    @cached_property
    def wavenumbers(self) -> Tuple[np.ndarray, np.ndarray]:
        KX, KY = np.meshgrid(self.k, self.k, indexing="ij")
        return _readonly(KX), _readonly(KY)

    @cached_property
    def k2(self) -> np.ndarray:
        KX, KY = self.wavenumbers
        return _readonly(KX**2 + KY**2)

    @cached_property
    def kabs(self) -> np.ndarray:
        return _readonly(np.sqrt(self.k2))

    @cached_property
    def nyquist(self) -> np.ndarray:
        return _readonly(self.modes == -self.n // 2)

    @cached_property
    def odd_symbols(self) -> Tuple[np.ndarray, np.ndarray]:
        """i xi_1 and i xi_2 with the Nyquist row/column zeroed."""
        KX, KY = self.wavenumbers
        SX = np.where(self.nyquist[:, None], 0.0, 1j * KX)
        SY = np.where(self.nyquist[None, :], 0.0, 1j * KY)
        return _readonly(SX), _readonly(SY)

    @cached_property
    def phase(self) -> np.ndarray:
        # exp(-i xi.x_0) with x_0 = -L/2 reduces to (-1)^(k1+k2)
        parity = (self.modes[:, None] + self.modes[None, :]) % 2
        return _readonly(np.where(parity == 0, 1.0, -1.0))


def make_grid(n: int, L: float) -> Grid:
    """Public constructor; production grids are powers of two. The oracle builds
    small even grids (e.g. n = 12) through Grid directly."""
    try:
        validators.is_power_of_two(int(n))
    except ValueError as e:
        raise ConfigurationError(str(e), n=n, L=L)
    return Grid(n=int(n), L=float(L))


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.complex128)
        if values.shape != (self.grid.n, self.grid.n):
            raise GridMismatch(
                f"Field of shape {values.shape} does not match grid n={self.grid.n}"
            )
        object.__setattr__(self, "values", _readonly(values))

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.values).all())

    def conj(self) -> "Field":
        return Field(self.grid, np.conj(self.values))

    def abs2(self) -> np.ndarray:
        return self.values.real**2 + self.values.imag**2

    def _other(self, other) -> np.ndarray:
        if isinstance(other, Field):
            _same_grid(self, other)
            return other.values
        return other

    def __add__(self, other) -> "Field":
        return Field(self.grid, self.values + self._other(other))

    def __sub__(self, other) -> "Field":
        return Field(self.grid, self.values - self._other(other))

    def __mul__(self, other) -> "Field":
        return Field(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class Spectrum:
    grid: Grid
    coefficients: np.ndarray

    def __post_init__(self):
        coefficients = np.array(self.coefficients, dtype=np.complex128)
        if coefficients.shape != (self.grid.n, self.grid.n):
            raise GridMismatch(
                f"Spectrum of shape {coefficients.shape} does not match n={self.grid.n}"
            )
        object.__setattr__(self, "coefficients", _readonly(coefficients))

    def multiply(self, symbol: np.ndarray) -> "Spectrum":
        return Spectrum(self.grid, self.coefficients * symbol)


def _same_grid(*items):
    grids = {item.grid for item in items}
    if len(grids) > 1:
        raise GridMismatch(
            "Operands live on different grids",
            grids=[{"n": g.n, "L": g.L} for g in grids],
        )


def transform(field: Field) -> Spectrum:
    grid = field.grid
    coefficients = fft.fft2(field.values, workers=settings.fft_workers)
    return Spectrum(grid, grid.dx**2 * grid.phase * coefficients)


def inverse(spectrum: Spectrum) -> Field:
    grid = spectrum.grid
    values = fft.ifft2(spectrum.coefficients * grid.phase, workers=settings.fft_workers)
    return Field(grid, values / grid.dx**2)


def _symbol(grid: Grid, mult: Multiplier) -> np.ndarray:
    if callable(mult):
        mult = mult(*grid.wavenumbers)
    symbol = np.broadcast_to(np.asarray(mult), (grid.n, grid.n))
    bad = ~np.isfinite(symbol)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise NumericError(
            "Multiplier is not finite on the lattice",
            xi=[float(grid.k[i]), float(grid.k[j])],
        )
    return symbol


def apply_multiplier(field: Field, mult: Multiplier) -> Field:
    return inverse(transform(field).multiply(_symbol(field.grid, mult)))


def gradient(field: Field) -> Tuple[Field, Field]:
    spectrum = transform(field)
    SX, SY = field.grid.odd_symbols
    return inverse(spectrum.multiply(SX)), inverse(spectrum.multiply(SY))


def laplacian(field: Field) -> Field:
    return inverse(transform(field).multiply(-field.grid.k2))


def convolve(a: Field, b: Field) -> Field:
    """Periodic convolution dx^2 sum_y a(x - y) b(y) with x - y wrapped into the box."""
    _same_grid(a, b)
    return inverse(transform(a).multiply(transform(b).coefficients))


def inner(a: Union[Field, np.ndarray], b: Union[Field, np.ndarray], dx: float) -> float:
    """Real quadrature pairing dx^2 sum Re(a b)."""
    a = a.values if isinstance(a, Field) else a
    b = b.values if isinstance(b, Field) else b
    return float(dx**2 * np.sum((a * b).real))


def lp_norm(field: Field, p: int = 2) -> float:
    if p not in (2, 4):
        raise ConfigurationError(f"Unsupported Lebesgue exponent p={p}", p=p)
    integrand = field.abs2() if p == 2 else field.abs2() ** 2
    return float((field.grid.dx**2 * integrand.sum()) ** (1.0 / p))


def sobolev_weight(grid: Grid, s: float, homogeneous: bool = False) -> np.ndarray:
    if homogeneous:
        with np.errstate(divide="ignore"):
            weight = np.where(grid.k2 > 0, grid.k2**s, 0.0)
        return weight
    return (1.0 + grid.k2) ** s


def sobolev_norm(field: Field, s: float, homogeneous: bool = False) -> float:
    coefficients = transform(field).coefficients
    weight = sobolev_weight(field.grid, s, homogeneous)
    power = coefficients.real**2 + coefficients.imag**2
    return float(math.sqrt((weight * power).sum() / field.grid.area))


def synthesize_gaussian(
    grid: Grid,
    A: float = 1.0,
    sigma: float = 1.0,
    x0: Tuple[float, float] = (0.0, 0.0),
    v: Tuple[float, float] = (0.0, 0.0),
) -> Field:
    try:
        validators.gaussian_fits_box(sigma, grid.L)
    except ValueError as e:
        raise ConfigurationError(str(e), sigma=sigma, L=grid.L)
    X, Y = grid.mesh
    r2 = (X - x0[0]) ** 2 + (Y - x0[1]) ** 2
    envelope = A * np.exp(-r2 / (2 * sigma**2))
    return Field(grid, envelope * np.exp(1j * (v[0] * X + v[1] * Y)))


def synthesize_random_hs(grid: Grid, s: float, seed: int, A: float = 1.0) -> Field:
    """
    Random-phase data with |u_hat| = A <xi>^-(s + 1.01), which lies in H^s but not
    in H^(s + 0.02) uniformly in n. The Nyquist row and column are left empty so the
    data is band-limited.
    """
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2 * np.pi, size=(grid.n, grid.n))
    amplitude = A * (1.0 + grid.k2) ** (-(s + 1.01) / 2)
    coefficients = amplitude * np.exp(1j * theta)
    coefficients[grid.nyquist, :] = 0.0
    coefficients[:, grid.nyquist] = 0.0
    return inverse(Spectrum(grid, coefficients))


def normalize_sobolev(
    field: Field, s: float, target: float = 1.0, homogeneous: bool = False
) -> Field:
    norm = sobolev_norm(field, s, homogeneous)
    if norm == 0:
        raise NumericError("Cannot normalize a field with zero Sobolev norm", s=s)
    return field * (target / norm)


def _padded_size(n: int, degree: int) -> int:
    size = 2 * n
    while size < (degree + 1) * n / 2:
        size *= 2
    return size


def pad(spectrum: Spectrum, size: int) -> Field:
    """Zero-pad a spectrum onto a size x size grid of the same box, in physical space."""
    grid = spectrum.grid
    fine = Grid(size, grid.L)
    big = np.zeros((size, size), dtype=np.complex128)
    idx = grid.modes % size
    big[np.ix_(idx, idx)] = spectrum.coefficients
    return inverse(Spectrum(fine, big))


def truncate(field: Field, grid: Grid) -> Spectrum:
    idx = grid.modes % field.grid.n
    return Spectrum(grid, transform(field).coefficients[np.ix_(idx, idx)])


def dealias_pad_product(*fields: Field, degree: int = 3) -> Field:
    """
    Product of the given factors with zero-padding, exact (no aliasing) when the
    number of factors is at most ``degree`` <= 3. Pass conjugated factors explicitly,
    e.g. ``dealias_pad_product(u, u.conj(), u)`` for |u|^2 u.
    """
    if not fields:
        raise ConfigurationError("dealias_pad_product needs at least one factor")
    if len(fields) > degree:
        raise ConfigurationError(
            f"{len(fields)} factors exceed the declared degree {degree}"
        )
    _same_grid(*fields)
    grid = fields[0].grid
    size = _padded_size(grid.n, degree)
    product = np.ones((size, size), dtype=np.complex128)
    for field in fields:
        product = product * pad(transform(field), size).values
    return inverse(truncate(Field(Grid(size, grid.L), product), grid))


def cubic(u: Field, dealias: bool = True) -> Field:
    """|u|^2 u, padded or pointwise."""
    if dealias:
        return dealias_pad_product(u, u.conj(), u)
    return Field(u.grid, u.abs2() * u.values)


def quartic_integral(u: Field, dealias: bool = True) -> float:
    """Quadrature of |u|^4, on the 2n padded grid when ``dealias`` is set."""
    if dealias:
        fine = pad(transform(u), 2 * u.grid.n)
        return float(fine.grid.dx**2 * np.sum(fine.abs2() ** 2))
    return float(u.grid.dx**2 * np.sum(u.abs2() ** 2))


def write_snapshot(field: Field, path: Union[str, Path]) -> Path:
    path = Path(path)
    header = np.array([(field.grid.n, field.grid.L)], dtype=SNAPSHOT_HEADER)
    with path.open("wb") as f:
        f.write(header.tobytes())
        f.write(np.ascontiguousarray(field.values, dtype="<c16").tobytes())
    return path


def read_snapshot(path: Union[str, Path]) -> Field:
    raw = Path(path).read_bytes()
    header = np.frombuffer(raw[: SNAPSHOT_HEADER.itemsize], dtype=SNAPSHOT_HEADER)[0]
    n, L = int(header["n"]), float(header["L"])
    values = np.frombuffer(raw[SNAPSHOT_HEADER.itemsize :], dtype="<c16")
    if values.size != n * n:
        raise ConfigurationError(
            f"Snapshot holds {values.size} values, expected {n * n}", path=str(path)
        )
    return Field(Grid(n, L), values.reshape(n, n))
