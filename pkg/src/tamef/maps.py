"""Maps between graded sequence spaces and empirical tameness certification.

A descriptor bundles an evaluator with its domain and codomain descriptors,
a linearity tag, and the metric ball on which probing is meaningful.
Certification estimates the smallest level shift r and constants C(n) with

    |F(f)|_n  <=  C(n) * |f|_{n+r}          (linear maps)
    |F(f)|_n  <=  C(n) * (1 + |f|_{n+r})    (nonlinear maps)

over a probe set, using the same truncation-degree stability rule as the
grading comparison: constants that grow with the coefficient degree of the
probes mark the shift as unattainable.

Certificate combinators mirror the closure rules for tame maps: direct
factors of products, finite products, and (for linear certificates)
composition with constants C_out(n) * C_in(n + r_out).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import InconsistentInverseError
from .graded import (
    DEFAULT_ATOL,
    DEGREE_STABILITY_FACTOR,
    ProductSpace,
    RatioWitness,
    SequenceSpace,
    TamenessCertificate,
    TruncatedSequence,
    certify_from_tables,
    element_degree,
)

SpaceLike = Union[SequenceSpace, ProductSpace]
Element = Union[TruncatedSequence, Tuple[TruncatedSequence, ...]]

#: quasi-isometry estimates may grow by at most this factor across the
#: probe-norm median split; saturating ratios like s/(1+s) stay under it
QUASI_SCALE_FACTOR = 2.0

LINEARITY_TOL = 1e-9


def _space_n_max(space: SpaceLike) -> int:
    return space.n_max


def _space_truncation(space: SpaceLike) -> int:
    if isinstance(space, ProductSpace):
        return max(s.truncation_degree for s in space.factors)
    return space.truncation_degree


def scale_element(x: Element, c: float) -> Element:
    if isinstance(x, TruncatedSequence):
        return x * c
    return tuple(part * c for part in x)


def add_elements(x: Element, y: Element) -> Element:
    if isinstance(x, TruncatedSequence):
        return x + y
    return tuple(a + b for a, b in zip(x, y))


def sub_elements(x: Element, y: Element) -> Element:
    return add_elements(x, scale_element(y, -1.0))


@dataclass(frozen=True)
class TameMapDescriptor:
    """A map between graded spaces with certification metadata.

    region_radius bounds the metric ball (in the level region_level
    seminorm around zero) on which the evaluator is probed; linear maps are
    scale invariant so the region only matters for nonlinear ones.
    """

    name: str
    domain: SpaceLike
    codomain: SpaceLike
    evaluator: Callable[[Element], Element]
    linearity: str = "linear"
    region_radius: float = 1.0
    region_level: int = 0

    def __post_init__(self):
        if self.linearity not in ("linear", "nonlinear"):
            raise ValueError(f"unknown linearity tag {self.linearity!r}")
        if self.region_radius <= 0.0:
            raise ValueError("probe region radius must be positive")

    @property
    def is_linear(self) -> bool:
        return self.linearity == "linear"

    def __call__(self, f: Element) -> Element:
        out = self.evaluator(f)
        self.codomain.check_member(out)
        return out


def validate_descriptor(desc: TameMapDescriptor,
                        probes: Sequence[Element],
                        tol: float = LINEARITY_TOL) -> List[str]:
    """Spot-check descriptor invariants; returns human-readable defects."""
    defects: List[str] = []
    if not probes:
        return ["empty probe set"]
    outputs = []
    for i, f in enumerate(probes):
        try:
            desc.domain.check_member(f)
        except ValueError as exc:
            defects.append(f"probe {i} outside domain: {exc}")
            return defects
        outputs.append(desc(f))
    if desc.is_linear:
        n = _space_n_max(desc.codomain)
        for i in range(min(len(probes) - 1, 8)):
            f, g = probes[i], probes[i + 1]
            left = desc(add_elements(f, g))
            right = add_elements(outputs[i], outputs[i + 1])
            gap = desc.codomain.seminorm(sub_elements(left, right), n)
            scale = 1.0 + desc.codomain.seminorm(right, n)
            if gap > tol * scale:
                defects.append(
                    f"additivity defect {gap:.3g} at probe pair ({i},{i + 1})")
            left2 = desc(scale_element(f, 2.0))
            gap2 = desc.codomain.seminorm(
                sub_elements(left2, scale_element(outputs[i], 2.0)), n)
            if gap2 > tol * (1.0 + 2.0 * desc.codomain.seminorm(outputs[i], n)):
                defects.append(f"homogeneity defect {gap2:.3g} at probe {i}")
    return defects


# ---------------------------------------------------------------------------
# empirical certification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CertificationOutcome:
    certificate: Optional[TamenessCertificate]
    witness: Optional[RatioWitness]
    witness_probe: Optional[Element] = None

    @property
    def ok(self) -> bool:
        return self.certificate is not None


def map_seminorm_tables(desc: TameMapDescriptor, probes: Sequence[Element]):
    """(num, den) tables: image and source seminorms per level and probe."""
    n_max = _space_n_max(desc.domain)
    if _space_n_max(desc.codomain) != n_max:
        raise ValueError("domain and codomain must share one level range")
    num = np.empty((n_max + 1, len(probes)))
    den = np.empty((n_max + 1, len(probes)))
    for i, f in enumerate(probes):
        out = desc(f)
        for n in range(n_max + 1):
            num[n, i] = desc.codomain.seminorm(out, n)
            den[n, i] = desc.domain.seminorm(f, n)
    return num, den


def certify_tame(desc: TameMapDescriptor, probes: Sequence[Element],
                 r_max: int, *, b: int = 0, forced_r: Optional[int] = None,
                 stability_factor: float = DEGREE_STABILITY_FACTOR,
                 atol: float = DEFAULT_ATOL,
                 check_region: bool = True) -> CertificationOutcome:
    """Estimate the smallest accepted shift and constants for one map.

    Nonlinear maps are compared against 1 + |f|_{n+r}; zero probes drop out
    of linear ratios through the zero-denominator exclusion.
    """
    if not probes:
        raise ValueError("probe set is empty")
    n_max = _space_n_max(desc.domain)
    if r_max < 0 or r_max > n_max:
        raise ValueError("r_max must lie in 0..n_max")
    if check_region and not desc.is_linear:
        for i, f in enumerate(probes):
            level_norm = desc.domain.seminorm(f, desc.region_level)
            if level_norm > desc.region_radius + atol:
                raise ValueError(
                    f"probe {i} leaves the certification region "
                    f"({level_norm:.6g} > {desc.region_radius:.6g})")
    num, den = map_seminorm_tables(desc, probes)
    if not desc.is_linear:
        den = den + 1.0
    degrees = [element_degree(f) for f in probes]
    split = _space_truncation(desc.domain) // 2
    cert, witness = certify_from_tables(
        num, den, degrees, split, b=b, r_max=r_max, forced_r=forced_r,
        stability_factor=stability_factor, atol=atol,
        probe_count=len(probes), linear=desc.is_linear)
    if cert is not None:
        return CertificationOutcome(cert, None)
    probe = probes[witness.probe_index] if witness.probe_index >= 0 else None
    return CertificationOutcome(None, witness, probe)


def validate_certificate_on_probes(desc: TameMapDescriptor,
                                   cert: TamenessCertificate,
                                   probes: Sequence[Element],
                                   atol: float = DEFAULT_ATOL,
                                   rtol: float = DEFAULT_ATOL):
    """Re-check the certified inequality; returns (probe, level) violations."""
    num, den = map_seminorm_tables(desc, probes)
    if not cert.linear:
        den = den + 1.0
    violations = []
    for n in cert.levels:
        if n + cert.r >= num.shape[0]:
            continue
        for i in range(len(probes)):
            lhs = float(num[n, i])
            bound = cert.C[n] * float(den[n + cert.r, i])
            if lhs > bound + atol + rtol * max(abs(lhs), abs(bound)):
                violations.append((i, n, lhs, bound))
    return violations


# ---------------------------------------------------------------------------
# certificate combinators
# ---------------------------------------------------------------------------

def certify_projection(index: int, product: ProductSpace) -> TamenessCertificate:
    """Factor projections satisfy the bound with shift 0 and constant 1."""
    if not 1 <= index <= len(product.factors):
        raise IndexError(
            f"factor index {index} outside 1..{len(product.factors)}")
    levels = range(product.n_max + 1)
    return TamenessCertificate(
        r=0, b=0, C={n: 1.0 for n in levels}, provenance="analytic")


def _combined_provenance(certs: Sequence[TamenessCertificate]) -> str:
    kinds = {c.provenance for c in certs}
    if kinds == {"analytic"}:
        return "analytic"
    if "empirical" in kinds:
        return "empirical"
    return "derived-analytic"


def combine_product(certs: Sequence[TamenessCertificate]) -> TamenessCertificate:
    """Product rule: (max r_i, max b_i, sum C_i(n)) over shared levels."""
    if not certs:
        raise ValueError("need at least one certificate")
    if len(certs) == 1:
        return certs[0]
    r = max(c.r for c in certs)
    b = max(c.b for c in certs)
    shared = set(certs[0].C)
    for c in certs[1:]:
        shared &= set(c.C)
    levels = sorted(n for n in shared if n >= b)
    if not levels:
        raise ValueError("certificates share no usable levels")
    table = {n: float(sum(c.C[n] for c in certs)) for n in levels}
    provenance = _combined_provenance(certs)
    counts = [c.probe_count for c in certs if c.provenance == "empirical"]
    return TamenessCertificate(
        r=r, b=b, C=table, provenance=provenance,
        probe_count=min(counts) if counts else 0,
        max_ratio_observed=max(c.max_ratio_observed for c in certs),
        linear=all(c.linear for c in certs))


def certify_composition(outer: TamenessCertificate,
                        inner: TamenessCertificate) -> TamenessCertificate:
    """Chain rule for linear certificates: C_out(n) * C_in(n + r_out).

    Nonlinear certificates are rejected; their chained bound would need
    region bookkeeping, so certify the composed evaluator directly instead.
    """
    if not (outer.linear and inner.linear):
        raise ValueError(
            "composition constants are only derived for linear certificates; "
            "certify the composed map directly")
    r = outer.r + inner.r
    b = max(outer.b, inner.b)
    table = {}
    for n in outer.levels:
        if n < b:
            continue
        if (n + outer.r) in inner.C:
            table[n] = outer.C[n] * inner.C[n + outer.r]
    if not table:
        raise ValueError("certificate level ranges do not compose")
    counts = [c.probe_count for c in (outer, inner) if c.provenance == "empirical"]
    return TamenessCertificate(
        r=r, b=b, C=table, provenance="derived-analytic",
        probe_count=min(counts) if counts else 0,
        max_ratio_observed=max(outer.max_ratio_observed,
                               inner.max_ratio_observed),
        linear=True)


# ---------------------------------------------------------------------------
# quasi-isometry (single-norm spaces)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuasiIsometryReport:
    """Two-sided bound estimates |F(f)| <= C1(1+|f|), |f| <= C2(1+|F(f)|).

    Each constant is estimated on the small and large halves of the probe
    set (split at the median source norm); an estimate that keeps growing
    with the probe scale marks that side as failed.
    """

    c1: float
    c2: float
    c1_small: float
    c1_large: float
    c2_small: float
    c2_large: float
    upper_stable: bool
    lower_stable: bool
    round_trip_max: float
    witness_upper: Optional[int] = None
    witness_lower: Optional[int] = None

    @property
    def ok(self) -> bool:
        return self.upper_stable and self.lower_stable

    def to_json(self) -> dict:
        return {
            "c1": self.c1, "c2": self.c2,
            "c1_small": self.c1_small, "c1_large": self.c1_large,
            "c2_small": self.c2_small, "c2_large": self.c2_large,
            "upper_stable": self.upper_stable,
            "lower_stable": self.lower_stable,
            "round_trip_max": self.round_trip_max,
            "witness_upper": self.witness_upper,
            "witness_lower": self.witness_lower,
        }


def quasi_isometry_check(desc: TameMapDescriptor,
                         inverse: Callable[[Element], Element],
                         probes: Sequence[Element],
                         round_trip_tol: float = 1e-9,
                         scale_factor: float = QUASI_SCALE_FACTOR,
                         atol: float = DEFAULT_ATOL) -> QuasiIsometryReport:
    if _space_n_max(desc.domain) != 0 or _space_n_max(desc.codomain) != 0:
        raise ValueError(
            "quasi-isometry bounds need single-norm spaces (n_max = 0)")
    if len(probes) < 4:
        raise ValueError("need at least 4 probes for the scale split")
    src = np.empty(len(probes))
    img = np.empty(len(probes))
    round_trip_max = 0.0
    for i, f in enumerate(probes):
        out = desc(f)
        src[i] = desc.domain.seminorm(f, 0)
        img[i] = desc.codomain.seminorm(out, 0)
        back = inverse(out)
        residual = desc.domain.seminorm(sub_elements(back, f), 0)
        round_trip_max = max(round_trip_max, residual)
        if residual > round_trip_tol * (1.0 + src[i]):
            raise InconsistentInverseError(
                f"inverse misses probe {i} by {residual:.3g}")
    ratio_upper = img / (1.0 + src)
    ratio_lower = src / (1.0 + img)
    order = np.argsort(src, kind="stable")
    half = len(probes) // 2
    small, large = order[:half], order[half:]

    def side(ratios):
        m_small = float(np.max(ratios[small]))
        m_large = float(np.max(ratios[large]))
        stable = m_large <= scale_factor * m_small + atol
        witness = None if stable else int(large[np.argmax(ratios[large])])
        return m_small, m_large, stable, witness

    c1_small, c1_large, upper_stable, witness_upper = side(ratio_upper)
    c2_small, c2_large, lower_stable, witness_lower = side(ratio_lower)
    return QuasiIsometryReport(
        c1=float(np.max(ratio_upper)), c2=float(np.max(ratio_lower)),
        c1_small=c1_small, c1_large=c1_large,
        c2_small=c2_small, c2_large=c2_large,
        upper_stable=upper_stable, lower_stable=lower_stable,
        round_trip_max=round_trip_max,
        witness_upper=witness_upper, witness_lower=witness_lower)


# ---------------------------------------------------------------------------
# differentiation
# ---------------------------------------------------------------------------

def directional_derivative(desc: TameMapDescriptor, f: Element, h: Element,
                           step: Optional[float] = None) -> Element:
    """Central difference (F(f + eh) - F(f - eh)) / 2e.

    The default step scales with the base-level norm of f; linear maps
    reproduce F(h) to roundoff.
    """
    if step is None:
        step = 1e-6 * (1.0 + desc.domain.seminorm(f, desc.region_level))
    if not step > 0.0 or not math.isfinite(step):
        raise ValueError(f"finite-difference step {step} must be positive")
    plus = desc(add_elements(f, scale_element(h, step)))
    minus = desc(sub_elements(f, scale_element(h, step)))
    return scale_element(sub_elements(plus, minus), 0.5 / step)


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

def _shift_up(space: SequenceSpace):
    def run(f: TruncatedSequence) -> TruncatedSequence:
        block = np.zeros_like(f.coefficients)
        block[1:] = f.coefficients[:-1]
        return TruncatedSequence(f.fiber, block)
    return run


def _shift_down(space: SequenceSpace):
    def run(f: TruncatedSequence) -> TruncatedSequence:
        block = np.zeros_like(f.coefficients)
        block[:-1] = f.coefficients[1:]
        return TruncatedSequence(f.fiber, block)
    return run


def _derivative(space: SequenceSpace):
    K = space.truncation_degree
    factors = np.arange(1.0, K + 1.0).reshape(-1, 1)

    def run(f: TruncatedSequence) -> TruncatedSequence:
        block = np.zeros_like(f.coefficients)
        block[:-1] = factors * f.coefficients[1:]
        return TruncatedSequence(f.fiber, block)
    return run


def _coeff_square(space: SequenceSpace):
    def run(f: TruncatedSequence) -> TruncatedSequence:
        return TruncatedSequence(f.fiber, f.coefficients * f.coefficients)
    return run


def build_map(name: str, space: SequenceSpace) -> TameMapDescriptor:
    """Construct a registry map over the given base space.

    Grammar: identity | shift_up | shift_down | derivative | scale:<c> |
    coeff_square | projection:<i> | product:<a>,<b> | compose:<a>,<b>.
    product pairs two maps with the shared domain; compose:<a>,<b> applies
    b first, then a.  Nested product/compose arguments are not supported.
    """
    head, _, rest = name.partition(":")
    if head == "identity":
        return TameMapDescriptor("identity", space, space, lambda f: f)
    if head == "shift_up":
        return TameMapDescriptor("shift_up", space, space, _shift_up(space))
    if head == "shift_down":
        return TameMapDescriptor("shift_down", space, space, _shift_down(space))
    if head == "derivative":
        return TameMapDescriptor("derivative", space, space, _derivative(space))
    if head == "scale":
        try:
            c = float(rest)
        except ValueError:
            raise ValueError(f"scale needs a numeric argument, got {rest!r}")
        return TameMapDescriptor(f"scale:{rest}", space, space,
                                 lambda f: f * c)
    if head == "coeff_square":
        return TameMapDescriptor("coeff_square", space, space,
                                 _coeff_square(space), linearity="nonlinear")
    if head == "projection":
        try:
            index = int(rest)
        except ValueError:
            raise ValueError(f"projection needs an integer index, got {rest!r}")
        product = ProductSpace((space, space))
        if not 1 <= index <= 2:
            raise IndexError(f"factor index {index} outside 1..2")
        return TameMapDescriptor(f"projection:{index}", product, space,
                                 lambda t: t[index - 1])
    if head in ("product", "compose"):
        parts = rest.split(",") if rest else []
        if len(parts) != 2 or any(p.startswith(("product", "compose",
                                                "projection")) for p in parts):
            raise ValueError(
                f"{head} needs exactly two non-nested single-space map "
                f"names, got {rest!r}")
        a = build_map(parts[0], space)
        b = build_map(parts[1], space)
        if head == "compose" and b.codomain != a.domain:
            raise ValueError("compose arguments do not chain")
        if head == "product":
            codomain = ProductSpace((a.codomain, b.codomain))
            linearity = "linear" if a.is_linear and b.is_linear else "nonlinear"
            return TameMapDescriptor(
                f"product:{rest}", space, codomain,
                lambda f: (a(f), b(f)), linearity=linearity,
                region_radius=min(a.region_radius, b.region_radius))
        linearity = "linear" if a.is_linear and b.is_linear else "nonlinear"
        return TameMapDescriptor(
            f"compose:{rest}", space, a.codomain,
            lambda f: a(b(f)), linearity=linearity,
            region_radius=min(a.region_radius, b.region_radius))
    raise ValueError(f"unknown map name {name!r}")


REGISTRY_NAMES = ("identity", "shift_up", "shift_down", "derivative",
                  "scale:<c>", "coeff_square", "projection:<i>",
                  "product:<a>,<b>", "compose:<a>,<b>")
