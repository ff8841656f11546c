"""Banach fibers, truncated coefficient sequences, and graded seminorm families.

The central object is a finitely truncated coefficient sequence f_0 .. f_K
with values in a fixed finite-dimensional Banach fiber.  Level-n seminorms
weight coefficient k by e^{nk}; the summed flavour and the supremum flavour
of that family are both gradings (monotone in the level), and the
certification machinery estimates, over a probe set, a level shift r and
constants C(n) with

    |f|_n  <=  C(n) * |f|~_{n+r}        for b <= n <= n_max - r

together with the symmetric bound, recording the evidence in a certificate.

Boundedness of the ratios cannot be read off a finite probe set directly
(every finite max is finite), so acceptance of a shift r uses truncation
degree stability: the max ratio over probes of high coefficient degree must
not exceed 1.5x the max over low-degree probes.  Growth with the degree is
the finite-truncation shadow of an unbounded constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from .errors import UnsupportedGradingError

DEFAULT_N_MAX = 8
DEFAULT_TRUNCATION = 32
#: e^{nk} overflows doubles near nk ~ 709; configurations are kept well clear.
MAX_LEVEL_EXPONENT = 256
DEFAULT_ATOL = 1e-9
DEFAULT_RTOL = 1e-9
#: high-degree probe ratios may exceed low-degree ones by at most this factor
DEGREE_STABILITY_FACTOR = 1.5

_FIELDS = ("real", "complex")
_NORM_KINDS = ("euclidean", "supremum", "sum")
_PROVENANCES = ("analytic", "empirical", "derived-analytic")


def within_upper(lhs: float, rhs: float, atol: float = DEFAULT_ATOL,
                 rtol: float = DEFAULT_RTOL) -> bool:
    """lhs <= rhs up to the package-wide absolute-plus-relative tolerance."""
    return lhs <= rhs + atol + rtol * max(abs(lhs), abs(rhs))


# ---------------------------------------------------------------------------
# fibers and sequences
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BanachFiber:
    """A finite-dimensional Banach space holding one coefficient."""

    dimension: int
    scalar_field: str = "real"
    norm_kind: str = "euclidean"

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("fiber dimension must be >= 1")
        if self.scalar_field not in _FIELDS:
            raise ValueError(f"unknown scalar field {self.scalar_field!r}")
        if self.norm_kind not in _NORM_KINDS:
            raise ValueError(f"unknown norm kind {self.norm_kind!r}")

    @property
    def dtype(self):
        return np.complex128 if self.scalar_field == "complex" else np.float64

    @property
    def is_metric(self) -> bool:
        """True when the norm comes from an inner product."""
        return self.norm_kind == "euclidean"

    def complexified(self) -> "BanachFiber":
        return BanachFiber(self.dimension, "complex", self.norm_kind)

    def norm(self, coordinates) -> float:
        if isinstance(coordinates, FiberPoint):
            coordinates = coordinates.coordinates
        a = np.abs(np.asarray(coordinates))
        if a.shape != (self.dimension,):
            raise ValueError(
                f"coordinate length {a.shape} does not match fiber dimension "
                f"{self.dimension}")
        if self.norm_kind == "euclidean":
            return float(np.sqrt(np.sum(a * a)))
        if self.norm_kind == "supremum":
            return float(np.max(a))
        return float(np.sum(a))

    def norms(self, rows: np.ndarray) -> np.ndarray:
        """Row-wise norms of a (count, dimension) coordinate block."""
        a = np.abs(np.asarray(rows))
        if self.norm_kind == "euclidean":
            return np.sqrt(np.sum(a * a, axis=1))
        if self.norm_kind == "supremum":
            return np.max(a, axis=1)
        return np.sum(a, axis=1)

    def unit(self, axis: int = 0) -> np.ndarray:
        if not 0 <= axis < self.dimension:
            raise IndexError(f"fiber axis {axis} out of range")
        u = np.zeros(self.dimension, dtype=self.dtype)
        u[axis] = 1.0
        return u


@dataclass(frozen=True)
class FiberPoint:
    """One coefficient: a single point of a Banach fiber."""

    coordinates: np.ndarray

    def __post_init__(self):
        arr = np.array(self.coordinates)
        arr.setflags(write=False)
        object.__setattr__(self, "coordinates", arr)

    def __len__(self) -> int:
        return len(self.coordinates)


class TruncatedSequence:
    """Coefficients f_0 .. f_K in a fixed fiber, immutable after construction."""

    __slots__ = ("fiber", "_coeffs")

    def __init__(self, fiber: BanachFiber, coefficients):
        if isinstance(coefficients, (list, tuple)) and coefficients and \
                isinstance(coefficients[0], FiberPoint):
            coefficients = [p.coordinates for p in coefficients]
        arr = np.array(coefficients, dtype=fiber.dtype)
        if arr.ndim == 1:
            if fiber.dimension != 1:
                raise ValueError("flat coefficient list needs a 1-d fiber")
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] != fiber.dimension:
            raise ValueError(
                f"coefficients must form a (K+1, {fiber.dimension}) block, "
                f"got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "fiber", fiber)
        object.__setattr__(self, "_coeffs", arr)

    # construction helpers -------------------------------------------------

    @classmethod
    def zero(cls, fiber: BanachFiber, truncation_degree: int) -> "TruncatedSequence":
        return cls(fiber, np.zeros((truncation_degree + 1, fiber.dimension),
                                   dtype=fiber.dtype))

    @classmethod
    def basis(cls, fiber: BanachFiber, truncation_degree: int, index: int,
              axis: int = 0, scale: float = 1.0) -> "TruncatedSequence":
        """The monomial sequence: coefficient `index` is scale * unit(axis)."""
        if not 0 <= index <= truncation_degree:
            raise IndexError(f"coefficient index {index} out of range")
        block = np.zeros((truncation_degree + 1, fiber.dimension), dtype=fiber.dtype)
        block[index] = scale * fiber.unit(axis)
        return cls(fiber, block)

    # basic accessors ------------------------------------------------------

    @property
    def truncation_degree(self) -> int:
        return self._coeffs.shape[0] - 1

    @property
    def coefficients(self) -> np.ndarray:
        return self._coeffs

    def coefficient(self, k: int) -> np.ndarray:
        if not 0 <= k <= self.truncation_degree:
            raise IndexError(f"coefficient index {k} out of range")
        return self._coeffs[k]

    def coefficient_norms(self) -> np.ndarray:
        return self.fiber.norms(self._coeffs)

    def degree(self) -> int:
        """Largest k with a nonzero coefficient, -1 for the zero sequence."""
        nz = np.nonzero(self.coefficient_norms() > 0.0)[0]
        return int(nz[-1]) if nz.size else -1

    def is_zero(self) -> bool:
        return self.degree() < 0

    # arithmetic -----------------------------------------------------------

    def _compatible(self, other: "TruncatedSequence"):
        if self.fiber != other.fiber:
            raise ValueError("fiber mismatch")
        if self.truncation_degree != other.truncation_degree:
            raise ValueError("truncation degree mismatch")

    def __add__(self, other):
        self._compatible(other)
        return TruncatedSequence(self.fiber, self._coeffs + other._coeffs)

    def __sub__(self, other):
        self._compatible(other)
        return TruncatedSequence(self.fiber, self._coeffs - other._coeffs)

    def __mul__(self, scalar):
        return TruncatedSequence(self.fiber, self._coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return TruncatedSequence(self.fiber, -self._coeffs)

    def __repr__(self):
        return (f"TruncatedSequence(K={self.truncation_degree}, "
                f"dim={self.fiber.dimension}, field={self.fiber.scalar_field})")

    # serialization ----------------------------------------------------------

    def to_json(self) -> dict:
        if self.fiber.scalar_field == "complex":
            coeffs = [[[float(z.real), float(z.imag)] for z in row]
                      for row in self._coeffs]
        else:
            coeffs = [[float(x) for x in row] for row in self._coeffs]
        return {
            "fiber": {"dim": self.fiber.dimension,
                      "field": self.fiber.scalar_field,
                      "norm": self.fiber.norm_kind},
            "coefficients": coeffs,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TruncatedSequence":
        fib = obj["fiber"]
        fiber = BanachFiber(int(fib["dim"]), fib["field"], fib["norm"])
        rows = obj["coefficients"]
        if fiber.scalar_field == "complex":
            block = np.array([[complex(re, im) for re, im in row] for row in rows])
        else:
            block = np.array(rows, dtype=np.float64)
        return cls(fiber, block)


# ---------------------------------------------------------------------------
# seminorms
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _weights(level: int, truncation_degree: int) -> Tuple[float, ...]:
    return tuple(math.exp(level * k) for k in range(truncation_degree + 1))


def _check_level(f: TruncatedSequence, n: int, n_max: Optional[int]):
    if n < 0:
        raise IndexError(f"seminorm level {n} is negative")
    if n_max is not None and n > n_max:
        raise IndexError(f"seminorm level {n} exceeds n_max={n_max}")
    if n * f.truncation_degree > MAX_LEVEL_EXPONENT:
        raise ValueError(
            f"level*degree = {n * f.truncation_degree} exceeds the overflow "
            f"guard {MAX_LEVEL_EXPONENT}")


def seminorm_l1(f: TruncatedSequence, n: int, n_max: Optional[int] = None) -> float:
    """Sum of e^{nk} |f_k|, accumulated in ascending k with no compensation."""
    _check_level(f, int(n), n_max)
    w = _weights(int(n), f.truncation_degree)
    v = f.coefficient_norms()
    total = 0.0
    for k in range(f.truncation_degree + 1):
        total = total + w[k] * float(v[k])
    return total

def seminorm_linf(f: TruncatedSequence, n: int, n_max: Optional[int] = None) -> float:
    """Max over k of e^{nk} |f_k|."""
    _check_level(f, int(n), n_max)
    w = _weights(int(n), f.truncation_degree)
    v = f.coefficient_norms()
    best = 0.0
    for k in range(f.truncation_degree + 1):
        value = w[k] * float(v[k])
        if value > best:
            best = value
    return best


def inner_product(f: TruncatedSequence, g: TruncatedSequence, level: int = 0) -> float:
    """Level-n inner product sum_k e^{2nk} <f_k, g_k> (metric fibers only)."""
    if not (f.fiber.is_metric and f.fiber.scalar_field == "real"):
        raise UnsupportedGradingError(
            "level inner products need a real euclidean fiber")
    if f.fiber != g.fiber or f.truncation_degree != g.truncation_degree:
        raise ValueError("sequences live in different spaces")
    _check_level(f, 2 * int(level), None)
    w = _weights(2 * int(level), f.truncation_degree)
    dots = np.sum(f.coefficients * g.coefficients, axis=1)
    total = 0.0
    for k in range(f.truncation_degree + 1):
        total = total + w[k] * float(dots[k])
    return total


def metric_norm(f: TruncatedSequence, level: int = 0) -> float:
    return math.sqrt(max(inner_product(f, f, level), 0.0))


# ---------------------------------------------------------------------------
# gradings
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grading:
    """A family of seminorms indexed by levels 0..n_max, expected monotone."""

    kind: str
    n_max: int
    evaluator: Callable[[TruncatedSequence, int], float]

    def __post_init__(self):
        if self.n_max < 0:
            raise ValueError("n_max must be >= 0")

    def seminorm(self, f: TruncatedSequence, n: int) -> float:
        if not 0 <= n <= self.n_max:
            raise IndexError(f"level {n} outside 0..{self.n_max}")
        return float(self.evaluator(f, n))


def l1_grading(n_max: int = DEFAULT_N_MAX) -> Grading:
    return Grading("l1", n_max, lambda f, n: seminorm_l1(f, n))


def linf_grading(n_max: int = DEFAULT_N_MAX) -> Grading:
    return Grading("linf", n_max, lambda f, n: seminorm_linf(f, n))


def custom_grading(evaluator, n_max: int = DEFAULT_N_MAX, kind: str = "custom") -> Grading:
    return Grading(kind, n_max, evaluator)


def seminorm_table(grading: Grading, probes: Sequence[TruncatedSequence],
                   levels: Optional[Sequence[int]] = None) -> np.ndarray:
    """Values table[j, i] = |probe_i|_{levels[j]}.

    The l1/linf kinds take a vectorized path over probes that reproduces the
    scalar ascending-k accumulation bit for bit.
    """
    if levels is None:
        levels = range(grading.n_max + 1)
    levels = [int(n) for n in levels]
    if grading.kind not in ("l1", "linf"):
        out = np.empty((len(levels), len(probes)))
        for j, n in enumerate(levels):
            for i, f in enumerate(probes):
                out[j, i] = grading.seminorm(f, n)
        return out

    degrees = {f.truncation_degree for f in probes}
    if len(degrees) != 1:
        raise ValueError("probes must share one truncation degree")
    K = degrees.pop()
    norms = np.stack([f.coefficient_norms() for f in probes], axis=1)  # (K+1, P)
    out = np.empty((len(levels), len(probes)))
    for j, n in enumerate(levels):
        if not 0 <= n <= grading.n_max:
            raise IndexError(f"level {n} outside 0..{grading.n_max}")
        if n * K > MAX_LEVEL_EXPONENT:
            raise ValueError("level*degree exceeds the overflow guard")
        w = _weights(n, K)
        if grading.kind == "l1":
            acc = np.zeros(len(probes))
            for k in range(K + 1):
                acc = acc + w[k] * norms[k]
            out[j] = acc
        else:
            acc = np.zeros(len(probes))
            for k in range(K + 1):
                acc = np.maximum(acc, w[k] * norms[k])
            out[j] = acc
    return out


# ---------------------------------------------------------------------------
# space descriptors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SequenceSpace:
    """Fiber + truncation degree + grading: the ambient space descriptor."""

    fiber: BanachFiber
    truncation_degree: int = DEFAULT_TRUNCATION
    n_max: int = DEFAULT_N_MAX
    grading_kind: str = "l1"

    def __post_init__(self):
        if self.truncation_degree < 0:
            raise ValueError("truncation degree must be >= 0")
        if self.n_max < 0:
            raise ValueError("n_max must be >= 0")
        if self.n_max * self.truncation_degree > MAX_LEVEL_EXPONENT:
            raise ValueError(
                f"n_max * K = {self.n_max * self.truncation_degree} exceeds "
                f"the overflow guard {MAX_LEVEL_EXPONENT}")
        if self.grading_kind not in ("l1", "linf"):
            raise ValueError(f"unknown grading kind {self.grading_kind!r}")

    @property
    def flat_dimension(self) -> int:
        return (self.truncation_degree + 1) * self.fiber.dimension

    def grading(self) -> Grading:
        if self.grading_kind == "l1":
            return l1_grading(self.n_max)
        return linf_grading(self.n_max)

    def seminorm(self, f: TruncatedSequence, n: int) -> float:
        if self.grading_kind == "l1":
            return seminorm_l1(f, n, self.n_max)
        return seminorm_linf(f, n, self.n_max)

    def zero(self) -> TruncatedSequence:
        return TruncatedSequence.zero(self.fiber, self.truncation_degree)

    def basis(self, index: int, axis: int = 0, scale: float = 1.0) -> TruncatedSequence:
        return TruncatedSequence.basis(self.fiber, self.truncation_degree,
                                       index, axis, scale)

    def check_member(self, f: TruncatedSequence):
        if f.fiber != self.fiber or f.truncation_degree != self.truncation_degree:
            raise ValueError("sequence does not belong to this space")


@dataclass(frozen=True)
class ProductSpace:
    """Finite product of sequence spaces, graded by the sum of the factors."""

    factors: Tuple[SequenceSpace, ...]

    def __post_init__(self):
        if not self.factors:
            raise ValueError("a product needs at least one factor")
        object.__setattr__(self, "factors", tuple(self.factors))
        n_maxes = {s.n_max for s in self.factors}
        if len(n_maxes) != 1:
            raise ValueError("product factors must share one level range")

    @property
    def n_max(self) -> int:
        return self.factors[0].n_max

    def seminorm(self, element: Sequence[TruncatedSequence], n: int) -> float:
        if len(element) != len(self.factors):
            raise ValueError("element arity does not match the product")
        total = 0.0
        for space, part in zip(self.factors, element):
            total = total + space.seminorm(part, n)
        return total

    def zero(self):
        return tuple(s.zero() for s in self.factors)

    def check_member(self, element):
        if len(element) != len(self.factors):
            raise ValueError("element arity does not match the product")
        for space, part in zip(self.factors, element):
            space.check_member(part)


def element_degree(element) -> int:
    """Coefficient degree of a sequence, or the max over a product tuple."""
    if isinstance(element, TruncatedSequence):
        return element.degree()
    return max(part.degree() for part in element)


# ---------------------------------------------------------------------------
# monotonicity validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GradingViolation:
    probe_index: int
    level: int
    lhs: float
    rhs: float


@dataclass(frozen=True)
class GradingValidationReport:
    probe_count: int
    violations: Tuple[GradingViolation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_grading(grading: Grading, probes: Sequence[TruncatedSequence],
                     atol: float = DEFAULT_ATOL,
                     rtol: float = DEFAULT_RTOL) -> GradingValidationReport:
    """Check |f|_n <= |f|_{n+1} for every probe and consecutive level pair."""
    if not probes:
        raise ValueError("probe set is empty")
    table = seminorm_table(grading, probes)
    violations = []
    for i in range(len(probes)):
        for n in range(grading.n_max):
            lhs, rhs = float(table[n, i]), float(table[n + 1, i])
            if not within_upper(lhs, rhs, atol, rtol):
                violations.append(GradingViolation(i, n, lhs, rhs))
    return GradingValidationReport(len(probes), tuple(violations))


# ---------------------------------------------------------------------------
# tameness certificates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TamenessCertificate:
    """Evidence that |f|_n <= C(n) |f|~_{n+r} holds from level b upward."""

    r: int
    b: int
    C: Dict[int, float]
    provenance: str
    probe_count: int = 0
    max_ratio_observed: float = 0.0
    observed: Dict[int, float] = field(default_factory=dict)
    linear: bool = True

    def __post_init__(self):
        if self.r < 0 or self.b < 0:
            raise ValueError("r and b must be >= 0")
        if self.provenance not in _PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if self.provenance == "empirical" and self.probe_count < 1:
            raise ValueError("empirical certificates need probe evidence")
        if not self.C:
            raise ValueError("certificate constant table is empty")
        for n, c in self.C.items():
            if n < self.b:
                raise ValueError(f"constant at level {n} below base level {self.b}")
            if not c > 0.0:
                raise ValueError(f"C({n}) = {c} is not positive")

    @property
    def levels(self) -> Tuple[int, ...]:
        return tuple(sorted(self.C))

    def constant(self, n: int) -> float:
        if n not in self.C:
            raise IndexError(f"certificate is silent at level {n}")
        return self.C[n]

    def to_json(self) -> dict:
        return {
            "r": self.r,
            "b": self.b,
            "C": {str(n): self.C[n] for n in self.levels},
            "provenance": self.provenance,
            "probe_count": self.probe_count,
            "max_ratio_observed": self.max_ratio_observed,
            "observed": {str(n): self.observed[n] for n in sorted(self.observed)},
            "linear": self.linear,
        }

    def csv_rows(self):
        """Rows (n, C_n, max_ratio) for the certificate table."""
        for n in self.levels:
            yield n, self.C[n], self.observed.get(n, "")


@dataclass(frozen=True)
class RatioWitness:
    """The probe that maximized the ratio when no level shift was accepted."""

    r: int
    level: int
    probe_index: int
    ratio: float
    reason: str


#: smallest positive stand-in when every observed ratio vanished
_RATIO_FLOOR = 1e-300


def certify_from_tables(num: np.ndarray, den: np.ndarray,
                        degrees: Sequence[int], degree_split: int,
                        *, b: int = 0, r_max: int, forced_r: Optional[int] = None,
                        stability_factor: float = DEGREE_STABILITY_FACTOR,
                        atol: float = DEFAULT_ATOL,
                        probe_count: int, linear: bool = True):
    """Pick the smallest accepted level shift from precomputed seminorm tables.

    num[n, i] and den[n, i] hold the numerator/denominator values of probe i
    at level n for n = 0..n_max.  Ratios with a vanishing denominator and a
    nonvanishing numerator reject the shift outright; vanishing/vanishing
    pairs are excluded.  A shift is accepted when, at every level, the max
    ratio over probes of degree > degree_split stays within
    stability_factor x the max over the rest.

    Returns (certificate, witness); exactly one of the two is not None.
    """
    n_levels = num.shape[0]
    n_max = n_levels - 1
    degrees = np.asarray(degrees)
    high = degrees > degree_split

    def try_shift(r: int):
        top = n_max - r
        if top < b:
            return None, RatioWitness(r, b, -1, math.inf, "no level admits the shift")
        constants: Dict[int, float] = {}
        for n in range(b, top + 1):
            numerator = num[n]
            denominator = den[n + r]
            included = denominator > 0.0
            bad = ~included & (numerator > atol)
            if np.any(bad):
                i = int(np.nonzero(bad)[0][0])
                return None, RatioWitness(r, n, i, math.inf,
                                          "ratio unbounded: zero denominator")
            if not np.any(included):
                continue
            ratios = np.zeros_like(numerator)
            ratios[included] = numerator[included] / denominator[included]
            hi_mask = included & high
            lo_mask = included & ~high
            if np.any(hi_mask) and np.any(lo_mask):
                m_hi = float(np.max(ratios[hi_mask]))
                m_lo = float(np.max(ratios[lo_mask]))
                if m_hi > stability_factor * m_lo + atol:
                    i_hi = int(np.argmax(np.where(hi_mask, ratios, -np.inf)))
                    return None, RatioWitness(
                        r, n, i_hi, m_hi,
                        f"ratio grows with truncation degree "
                        f"({m_hi:.6g} > {stability_factor} * {m_lo:.6g})")
            constants[n] = float(np.max(ratios[included]))
        if not constants:
            return None, RatioWitness(r, b, -1, math.inf,
                                      "no probe produced a usable ratio")
        observed = dict(constants)
        floored = {n: (c if c > 0.0 else _RATIO_FLOOR) for n, c in constants.items()}
        cert = TamenessCertificate(
            r=r, b=b, C=floored, provenance="empirical",
            probe_count=probe_count,
            max_ratio_observed=max(observed.values()),
            observed=observed, linear=linear)
        return cert, None

    if forced_r is not None:
        return try_shift(forced_r)

    witness = None
    for r in range(r_max + 1):
        cert, witness = try_shift(r)
        if cert is not None:
            return cert, None
    if witness is not None and witness.probe_index >= 0:
        return None, witness
    # fall back to the probe maximizing the ratio at the largest shift
    r = r_max
    reason = witness.reason if witness is not None else "no shift accepted"
    worst_ratio, worst_level, worst_probe = -1.0, b, 0
    for n in range(b, n_max - r + 1):
        denominator = den[n + r]
        included = denominator > 0.0
        if not np.any(included):
            continue
        ratios = np.zeros_like(num[n])
        ratios[included] = num[n][included] / denominator[included]
        i_top = int(np.argmax(ratios))
        if ratios[i_top] > worst_ratio:
            worst_ratio, worst_level, worst_probe = float(ratios[i_top]), n, i_top
    return None, RatioWitness(r, worst_level, worst_probe, worst_ratio, reason)


# ---------------------------------------------------------------------------
# grading equivalence
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EquivalenceFailure:
    direction: str
    witness: RatioWitness
    probe: TruncatedSequence


@dataclass(frozen=True)
class EquivalenceOutcome:
    """Result of a two-sided grading comparison over a probe set."""

    forward: Optional[TamenessCertificate]
    backward: Optional[TamenessCertificate]
    failure: Optional[EquivalenceFailure]

    @property
    def ok(self) -> bool:
        return self.failure is None


def certify_grading_equivalence(g1: Grading, g2: Grading,
                                probes: Sequence[TruncatedSequence],
                                r_max: int, *, b: int = 0,
                                stability_factor: float = DEGREE_STABILITY_FACTOR,
                                atol: float = DEFAULT_ATOL) -> EquivalenceOutcome:
    """Certify |f|_1,n <= C |f|_2,n+r (forward) and the reverse (backward).

    The smallest accepted shift is searched per direction up to r_max; on
    rejection the failure carries the probe maximizing the ratio at r_max.
    """
    if g1.n_max != g2.n_max:
        raise ValueError("gradings must share one level range 0..n_max")
    if r_max < 0 or r_max > g1.n_max:
        raise ValueError("r_max must lie in 0..n_max")
    if not probes:
        raise ValueError("probe set is empty")
    degrees = [f.degree() for f in probes]
    if max(degrees) < 0:
        raise ValueError("degenerate probe set: every probe is zero")
    split = max(f.truncation_degree for f in probes) // 2

    t1 = seminorm_table(g1, probes)
    t2 = seminorm_table(g2, probes)

    fwd_cert, fwd_wit = certify_from_tables(
        t1, t2, degrees, split, b=b, r_max=r_max,
        stability_factor=stability_factor, atol=atol,
        probe_count=len(probes), linear=True)
    if fwd_cert is None:
        return EquivalenceOutcome(None, None, EquivalenceFailure(
            "g1<=g2", fwd_wit, probes[fwd_wit.probe_index]))
    bwd_cert, bwd_wit = certify_from_tables(
        t2, t1, degrees, split, b=b, r_max=r_max,
        stability_factor=stability_factor, atol=atol,
        probe_count=len(probes), linear=True)
    if bwd_cert is None:
        return EquivalenceOutcome(fwd_cert, None, EquivalenceFailure(
            "g2<=g1", bwd_wit, probes[bwd_wit.probe_index]))
    return EquivalenceOutcome(fwd_cert, bwd_cert, None)


def validate_equivalence_certificate(cert: TamenessCertificate,
                                     g_num: Grading, g_den: Grading,
                                     probes: Sequence[TruncatedSequence],
                                     atol: float = DEFAULT_ATOL,
                                     rtol: float = DEFAULT_RTOL):
    """Re-check |f|_num,n <= C(n) |f|_den,n+r on a probe set.

    Returns the violations as (probe_index, level, lhs, bound) tuples.
    """
    levels = cert.levels
    t_num = seminorm_table(g_num, probes, levels)
    t_den = seminorm_table(g_den, probes, [n + cert.r for n in levels])
    violations = []
    for j, n in enumerate(levels):
        c = cert.C[n]
        for i in range(len(probes)):
            lhs = float(t_num[j, i])
            bound = c * float(t_den[j, i])
            if not within_upper(lhs, bound, atol, rtol):
                violations.append((i, n, lhs, bound))
    return violations
