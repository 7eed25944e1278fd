"""Sampled certificates for the four-region bounds on the multiplier defect

    sigma = |m(xi1 + xi2 + xi3) - m(xi1) m(xi2) m(xi3)| / (m(xi1) m(xi2) m(xi3)).

Dyadic scales N_i = N 2^k with k1 >= k2 >= k3. "Much smaller than N" means
k <= -3 and "at least comparable to N" means k >= -1.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from src.errors import ConfigurationError
from src.imethod import m_value
from src.monitoring import logger
from src.schemas import IMultiplierSpec, RegionReport

CHUNK = 4096
DYADIC_RANGE = range(-6, 5)
SMALL = -3
COMPARABLE = -1


def _in_region(region: int, k1: int, k2: int, k3: int) -> bool:
    if region == 1:
        return k1 <= SMALL
    if region == 2:
        return k2 <= SMALL and k1 >= COMPARABLE
    if region == 3:
        return k3 <= SMALL and k2 >= COMPARABLE
    return k3 >= COMPARABLE


def dyadic_triples(
    region: int,
    N: float,
    xi_min: Optional[float] = None,
    xi_max: Optional[float] = None,
) -> np.ndarray:
    """Admissible (k1, k2, k3) whose annuli [N 2^k, N 2^(k+1)) lie inside the bounds."""
    if region not in (1, 2, 3, 4):
        raise ConfigurationError(f"Unknown region {region}", region=region)

    def fits(k: int) -> bool:
        low = N * 2.0**k
        return (xi_min is None or low >= xi_min) and (xi_max is None or 2 * low <= xi_max)

    ks = [k for k in DYADIC_RANGE if fits(k)]
    triples = [
        (k1, k2, k3)
        for k1 in ks
        for k2 in ks
        for k3 in ks
        if k1 >= k2 >= k3 and _in_region(region, k1, k2, k3)
    ]
    return np.array(triples, dtype=np.int64).reshape(-1, 3)


def _annulus(rng: np.random.Generator, inner: np.ndarray) -> np.ndarray:
    """Uniform-in-area points of the annuli inner <= |xi| < 2 inner."""
    r = np.sqrt(inner**2 * (1.0 + 3.0 * rng.random(inner.shape)))
    theta = rng.uniform(0.0, 2 * np.pi, inner.shape)
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)


def _safe_ratio(numerator: np.ndarray, denominator: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        positive = denominator > 0
        quotient = numerator / np.where(positive, denominator, 1.0)
        ratio = np.where(positive, quotient, np.inf)
    return np.where(numerator == 0, 0.0, ratio)


@dataclass
class _ChunkResult:
    worst_sigma: float
    worst_ratio: float
    arg_worst: List[List[float]]
    floor_violations: int


def _sample_chunk(
    spec: IMultiplierSpec,
    region: int,
    triples: np.ndarray,
    size: int,
    seed: np.random.SeedSequence,
) -> _ChunkResult:
    rng = np.random.default_rng(seed)
    picks = triples[rng.integers(0, len(triples), size)]
    inner = spec.N * np.exp2(picks.astype(float))
    xi = _annulus(rng, inner)
    mags = np.linalg.norm(xi, axis=-1)
    m = m_value(spec, mags)
    product = m.prod(axis=1)
    total = m_value(spec, np.linalg.norm(xi.sum(axis=1), axis=-1))
    sigma = np.abs(total - product) / product

    violations = 0
    if region == 1:
        ratio = sigma
    elif region == 2:
        tail = np.linalg.norm(xi[:, 1] + xi[:, 2], axis=-1)
        ratio = _safe_ratio(sigma, tail / mags[:, 0])
    elif region == 3:
        ratio = _safe_ratio(sigma, 1.0 / m[:, 1])
    else:
        ratio = _safe_ratio(sigma, total / product)
        floor = m_value(spec, spec.N) * spec.N
        violations = int(np.any(m * mags < floor, axis=1).sum())

    worst = int(np.argmax(ratio))
    return _ChunkResult(
        worst_sigma=float(sigma.max()),
        worst_ratio=float(ratio[worst]),
        arg_worst=xi[worst].tolist(),
        floor_violations=violations,
    )


def _chunk_sizes(sample_count: int) -> List[int]:
    full, rest = divmod(sample_count, CHUNK)
    return [CHUNK] * full + ([rest] if rest else [])


def region_bound_check(
    spec: IMultiplierSpec,
    region: int,
    sample_count: int,
    rng_seed: int,
    xi_min: Optional[float] = None,
    xi_max: Optional[float] = None,
    workers: int = 1,
) -> RegionReport:
    """
    Worst sampled ratio of sigma to the region's envelope

        region 1: 0 (sigma itself is reported)
        region 2: |xi2 + xi3| / |xi1|
        region 3: 1 / m(xi2)
        region 4: m(xi1 + xi2 + xi3) / (m(xi1) m(xi2) m(xi3))

    Samples are drawn in fixed chunks from generators spawned off ``rng_seed``, so
    the result does not depend on ``workers``.
    """
    if sample_count < 1:
        raise ConfigurationError("sample_count must be positive", samples=sample_count)
    base = dict(region=region, N=spec.N, s=spec.s, seed=rng_seed)
    triples = dyadic_triples(region, spec.N, xi_min, xi_max)
    if len(triples) == 0:
        logger.warning("Region has no admissible dyadic triple", extra=base)
        return RegionReport(samples=0, empty=True, **base)

    sizes = _chunk_sizes(sample_count)
    seeds = np.random.SeedSequence(rng_seed).spawn(len(sizes))
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(
            pool.map(
                lambda job: _sample_chunk(spec, region, triples, *job), zip(sizes, seeds)
            )
        )

    best: Tuple[float, List[List[float]]] = (-1.0, [])
    for result in results:
        if result.worst_ratio > best[0]:
            best = (result.worst_ratio, result.arg_worst)
    report = RegionReport(
        samples=sample_count,
        worst_ratio=best[0],
        worst_sigma=max(r.worst_sigma for r in results),
        arg_worst=best[1],
        floor_violations=sum(r.floor_violations for r in results),
        **base,
    )
    logger.info("Region check finished", extra=report.dict(exclude={"arg_worst"}))
    return report
