import math


def is_power_of_two(n: int, minimum: int = 8):
    if n < minimum or n & (n - 1):
        raise ValueError(f"Grid size must be a power of two >= {minimum}, got {n}")


def is_even_size(n: int, minimum: int = 8):
    if n < minimum or n % 2:
        raise ValueError(f"Grid size must be even and >= {minimum}, got {n}")


def is_positive(name: str, value: float):
    if not math.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be positive and finite, got {value}")


def time_step_is_valid(dt: float, T: float):
    is_positive("dt", dt)
    is_positive("T", T)
    if dt > T:
        raise ValueError(f"dt={dt} exceeds the final time T={T}")


def regularity_is_valid(s: float):
    if not 0 < s < 1:
        raise ValueError(f"Regularity s must lie in (0, 1), got {s}")


def pair_is_admissible(q: float, r: float, tol: float = 1e-12):
    """Admissible pairs satisfy 1/q = 1/2 - 1/r with q > 2 (q may be infinite)."""
    if not q > 2:
        raise ValueError(f"Admissible pairs need q > 2, got q={q}")
    if r < 2 or math.isinf(r):
        raise ValueError(f"Admissible pairs need 2 <= r < inf, got r={r}")
    if abs(1 / q - (0.5 - 1 / r)) > tol:
        raise ValueError(f"(q, r) = ({q}, {r}) violates 1/q = 1/2 - 1/r")


def gaussian_fits_box(sigma: float, L: float):
    is_positive("sigma", sigma)
    if sigma > L / 8:
        raise ValueError(
            f"Gaussian width {sigma} exceeds L/8 = {L / 8}; periodic images would "
            "contaminate the box"
        )


def weight_fits_box(M: float, L: float):
    if M > L / 4:
        raise ValueError(f"Morawetz scale M={M} exceeds L/4 = {L / 4}")
