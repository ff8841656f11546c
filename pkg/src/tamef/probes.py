"""Deterministic probe sequences for certification and validation runs.

Probe sets mix monomial sequences (one nonzero coefficient) with random
decay-profile sequences whose coefficient norms fall off like e^{-alpha k}.
Support degrees are cycled through the full truncation, half, and a quarter
so that ratio statistics can be compared across coefficient degrees; an
equivalence or tameness constant that secretly grows with the truncation
shows up as a ratio jump between those buckets.

All randomness flows through one counter-based generator so runs with equal
seeds are bitwise reproducible.
"""

from __future__ import annotations

from typing import List, Optional, Sequence

import numpy as np

from .graded import SequenceSpace, TruncatedSequence

GENERATOR_NAME = "philox4x32"

DEFAULT_ALPHAS = (0.5, 1.0, 2.0)


def rng_from_seed(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def spawn_seeds(seed: int, count: int) -> List[int]:
    """Independent child seeds derived from one root seed."""
    children = np.random.SeedSequence(int(seed)).spawn(count)
    return [int(c.generate_state(1, np.uint64)[0]) for c in children]


def monomial_degrees(truncation_degree: int) -> List[int]:
    """A short ladder of degrees covering both halves of the truncation."""
    K = truncation_degree
    ladder = {0, 1, 2, 3, K // 4, K // 2, K // 2 + 1, (3 * K) // 4, K - 1, K}
    return sorted(d for d in ladder if 0 <= d <= K)


def _random_fiber_block(rng: np.random.Generator, rows: int, fiber) -> np.ndarray:
    if fiber.scalar_field == "complex":
        re = rng.uniform(-1.0, 1.0, size=(rows, fiber.dimension))
        im = rng.uniform(-1.0, 1.0, size=(rows, fiber.dimension))
        return re + 1j * im
    return rng.uniform(-1.0, 1.0, size=(rows, fiber.dimension))


def decay_probe(space: SequenceSpace, rng: np.random.Generator, alpha: float,
                support_degree: int, target_norm: float) -> TruncatedSequence:
    """A random sequence with |f_k| ~ e^{-alpha k} up to support_degree.

    The result is rescaled so its level-0 seminorm equals target_norm.
    """
    K = space.truncation_degree
    support = min(max(int(support_degree), 0), K)
    block = np.zeros((K + 1, space.fiber.dimension), dtype=space.fiber.dtype)
    raw = _random_fiber_block(rng, support + 1, space.fiber)
    profile = np.exp(-alpha * np.arange(support + 1.0))
    block[:support + 1] = raw * profile[:, None]
    # the top coefficient anchors the support degree, keep it off zero
    if np.all(np.abs(block[support]) < 1e-3):
        block[support] = space.fiber.unit(0) * np.exp(-alpha * support)
    f = TruncatedSequence(space.fiber, block)
    base = space.seminorm(f, 0)
    if base > 0.0 and target_norm > 0.0:
        f = f * (target_norm / base)
    return f


def make_probes(space: SequenceSpace, count: int, seed: int, *,
                region_radius: float = 1.0,
                center: Optional[TruncatedSequence] = None,
                include_monomials: bool = True,
                alphas: Sequence[float] = DEFAULT_ALPHAS) -> List[TruncatedSequence]:
    """Exactly `count` probes: a monomial ladder followed by decay profiles.

    With a center, every probe is center + delta with |delta|_0 <= radius,
    suitable for probing a map on a metric ball; without one the monomials
    keep unit scale so certification ratios hit exact weight quotients.
    """
    if count < 1:
        raise ValueError("probe count must be >= 1")
    K = space.truncation_degree
    rng = rng_from_seed(seed)
    probes: List[TruncatedSequence] = []

    if include_monomials:
        degrees = monomial_degrees(K)
        for j, deg in enumerate(degrees):
            if len(probes) >= count:
                break
            axis = j % space.fiber.dimension
            scale = 1.0 if center is None else 0.5 * region_radius
            probes.append(space.basis(deg, axis, scale))

    supports = [K, K // 2, max(K // 4, 0)]
    i = 0
    while len(probes) < count:
        # decoupled cycles so every (alpha, support) pair occurs
        alpha = alphas[(i // len(supports)) % len(alphas)]
        support = supports[i % len(supports)]
        t = float(rng.uniform(0.2, 1.0))
        probes.append(decay_probe(space, rng, alpha, support, region_radius * t))
        i += 1

    if center is not None:
        probes = [center + p for p in probes]
    return probes


def make_product_probes(factors, count: int, seed: int, *,
                        region_radius: float = 1.0):
    """Tuples of probes for a product space, one child seed per factor."""
    seeds = spawn_seeds(seed, len(factors))
    columns = [make_probes(space, count, s, region_radius=region_radius)
               for space, s in zip(factors, seeds)]
    return list(zip(*columns))
