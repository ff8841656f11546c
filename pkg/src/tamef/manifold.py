"""Atlases for zero sets of constraints with finitely many defining equations.

A submanifold here is the zero set of a constraint map into R^m, carrying
charts built at regular points.  Chart coordinates are kernel offsets, so
transition maps compose one chart's Newton inverse with another chart's
projection; verifying an atlas means round-tripping sampled overlap points
and certifying the transition maps with the same degree-stability test used
for any other map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import (ConstructionError, NonConvergenceError,
                     NotIntoSubmanifoldError, RegularityError,
                     SingularBlockError)
from .graded import SequenceSpace, TamenessCertificate, TruncatedSequence
from .implicit import (Chart, ConstraintMap, build_chart, find_preimage,
                       flatten, is_regular_point, sphere_constraint,
                       sphere_intersection_constraint, unflatten)
from .maps import CertificationOutcome, TameMapDescriptor, certify_tame
from .probes import rng_from_seed, spawn_seeds

BASE_POINT_RESIDUAL_TOL = 1e-10
TRANSITION_ROUND_TRIP_TOL = 1e-8
DEFAULT_OVERLAP_PROBES = 12
DEFAULT_IMAGE_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class Submanifold:
    """A constraint's zero set together with charts at regular points."""

    constraint: ConstraintMap
    charts: Tuple[Chart, ...]

    def __post_init__(self):
        for i, chart in enumerate(self.charts):
            residual = float(np.linalg.norm(
                self.constraint.value(chart.base_point)))
            if residual > BASE_POINT_RESIDUAL_TOL:
                raise ValueError(
                    f"chart {i} base point off the zero set "
                    f"(residual {residual:.3g})")

    @property
    def ambient(self) -> SequenceSpace:
        return self.constraint.space

    @property
    def codimension(self) -> int:
        return self.constraint.target_dim

    def residual(self, q: TruncatedSequence) -> float:
        return float(np.linalg.norm(self.constraint.value(q)))

    def to_json(self) -> dict:
        return {
            "constraint": self.constraint.name,
            "codimension": self.codimension,
            "truncation_degree": self.ambient.truncation_degree,
            "n_max": self.ambient.n_max,
            "fiber_dimension": self.ambient.fiber.dimension,
            "charts": [c.to_json() for c in self.charts],
        }


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def make_sphere(space: SequenceSpace, level: int = 0, *,
                seed: int = 0) -> Submanifold:
    """Unit sphere of the level-n metric, charted at the two poles +-e0.

    Both poles lie on the sphere at every level because the degree-0 weight
    is always 1.  The two charts share kernel directions, so their overlap
    covers everything except the poles themselves.
    """
    c = sphere_constraint(space, level)
    north = space.basis(0)
    south = space.basis(0, scale=-1.0)
    charts = tuple(build_chart(c, p, seed=s)
                   for p, s in zip((north, south), spawn_seeds(seed, 2)))
    return Submanifold(c, charts)


def make_sphere_intersection(space: SequenceSpace, levels: Sequence[int], *,
                             radii: Optional[Sequence[float]] = None,
                             seed: int = 0, attempts: int = 8) -> Submanifold:
    """Intersection of metric spheres, charted at one regular point.

    Seeds a Newton search for points on the fiber, then rank-tests each
    find.  When every attempt ends rank-deficient (or fails to converge),
    raises with the per-seed evidence: for unit radii this is the expected
    outcome, because subtracting the defining equations forces the tail to
    zero and leaves all gradients parallel.
    """
    base = sphere_intersection_constraint(space, levels)
    if radii is None:
        c = base
    else:
        radii = [float(r) for r in radii]
        if len(radii) != base.target_dim or any(r <= 0 for r in radii):
            raise ValueError("radii must be positive, one per level")
        shift = np.asarray([r * r - 1.0 for r in radii])
        inner_phi, inner_jac = base.phi, base.jacobian
        c = ConstraintMap(
            base.name + ";radii=" + ",".join(f"{r:g}" for r in radii),
            space, base.target_dim,
            lambda f: inner_phi(f) - shift, inner_jac, level=base.level)

    rng = rng_from_seed(seed)
    chart_seeds = spawn_seeds(seed, attempts)
    evidence: List[dict] = []
    shape = (space.truncation_degree + 1, space.fiber.dimension)
    # scale coefficient k by e^{-n_top k} so every constraint row starts O(1)
    top = max(levels)
    decay = np.exp(-float(top) * np.arange(space.truncation_degree + 1))
    w2_top = np.repeat(np.exp(2.0 * top *
                              np.arange(space.truncation_degree + 1)),
                       space.fiber.dimension)
    for attempt in range(attempts):
        block = rng.uniform(-1.0, 1.0, size=shape) * decay[:, None]
        flat = block.reshape(-1)
        norm_top = math.sqrt(float(np.dot(w2_top * flat, flat)))
        seed_point = TruncatedSequence(space.fiber, block / norm_top)
        found = find_preimage(c, np.zeros(c.target_dim), seed_point,
                              scaling=np.sqrt(w2_top))
        if found is None:
            evidence.append({"attempt": attempt, "converged": False})
            continue
        report = is_regular_point(c, found)
        entry = {
            "attempt": attempt,
            "converged": True,
            "residual": float(np.linalg.norm(c.value(found))),
            "singular_values": list(report.singular_values),
            "rank_decision": report.rank_decision,
        }
        if not report.rank_decision:
            evidence.append(entry)
            continue
        try:
            chart = build_chart(c, found, seed=int(chart_seeds[attempt]),
                                report=report)
        except RegularityError as err:
            entry["chart_error"] = str(err)
            evidence.append(entry)
            continue
        return Submanifold(c, (chart,))
    raise ConstructionError(
        f"{c.name}: no regular point found in {attempts} attempts "
        f"({sum(1 for e in evidence if e.get('converged'))} converged, "
        f"all rank-deficient or unusable)", evidence=evidence)


# ---------------------------------------------------------------------------
# transition verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransitionReport:
    chart_i: int
    chart_j: int
    probe_count: int
    max_round_trip_error: float
    certificate: Optional[TamenessCertificate]

    @property
    def overlap_empty(self) -> bool:
        return self.probe_count == 0

    @property
    def ok(self) -> bool:
        if self.overlap_empty:
            return True
        return (self.max_round_trip_error <= TRANSITION_ROUND_TRIP_TOL
                and self.certificate is not None)

    def csv_row(self) -> tuple:
        r = self.certificate.r if self.certificate else ""
        b = self.certificate.b if self.certificate else ""
        return (self.chart_i, self.chart_j, self.probe_count,
                self.max_round_trip_error, r, b)


def _kernel_offsets(chart: Chart, q: TruncatedSequence) -> np.ndarray:
    x, _ = chart.split_data.coords_of(q - chart.base_point)
    return x


def _embed_offsets(chart: Chart, x: np.ndarray) -> TruncatedSequence:
    flat = chart.split_data.kernel_mat @ np.asarray(x, dtype=np.float64)
    return unflatten(chart.constraint.space, flat)


def _sample_overlap(chart_a: Chart, chart_b: Chart, count: int,
                    seed: int) -> List[TruncatedSequence]:
    """Manifold points inside both validity radii, sampled through chart_a."""
    rng = rng_from_seed(seed)
    dim = chart_a.split_data.split.x_dim
    points: List[TruncatedSequence] = []
    for _ in range(4 * count):
        if len(points) >= count:
            break
        u = rng.normal(size=dim)
        norm = float(np.linalg.norm(u))
        if norm == 0.0:
            continue
        scale = 0.9 * chart_a.validity_radius * \
            float(rng.uniform(0.2, 1.0)) ** (1.0 / max(dim, 1))
        try:
            q = chart_a.inverse(scale * u / norm)
        except (NonConvergenceError, SingularBlockError):
            continue
        if chart_b.contains(q):
            points.append(q)
    return points


def _transition_descriptor(manifold: Submanifold, chart_a: Chart,
                           chart_b: Chart,
                           probes: Sequence[TruncatedSequence]
                           ) -> Tuple[TameMapDescriptor,
                                      List[TruncatedSequence]]:
    """Chart-b coordinates as a function of chart-a coordinates.

    Offsets are embedded along the kernel bases so the transition becomes a
    map of the ambient space and the usual certification applies.  The
    claimed region is the ball actually covered by the probe set.
    """
    space = manifold.ambient
    offset_probes = [_embed_offsets(chart_a, _kernel_offsets(chart_a, q))
                     for q in probes]
    level = manifold.constraint.level
    radius = max(space.seminorm(h, level) for h in offset_probes) * 1.0001

    def evaluator(h: TruncatedSequence) -> TruncatedSequence:
        x = chart_a.split_data.coords_of(h)[0]
        q = chart_a.inverse(x)
        return _embed_offsets(chart_b, _kernel_offsets(chart_b, q))

    desc = TameMapDescriptor(
        name="transition", domain=space, codomain=space,
        evaluator=evaluator, linearity="nonlinear",
        region_radius=radius, region_level=level)
    return desc, offset_probes


def verify_transitions(manifold: Submanifold, *,
                       probes_per_pair: int = DEFAULT_OVERLAP_PROBES,
                       seed: int = 0, r_max: int = 2,
                       round_trip_tol: float = TRANSITION_ROUND_TRIP_TOL
                       ) -> List[TransitionReport]:
    """Round-trip and certify every chart pair; single charts verify trivially.

    An empty overlap is reported as such, not raised: disjoint chart
    domains are a legitimate atlas shape.
    """
    charts = manifold.charts
    pairs = [(i, j) for i in range(len(charts))
             for j in range(i + 1, len(charts))]
    child_seeds = spawn_seeds(seed, max(len(pairs), 1))
    reports: List[TransitionReport] = []
    for pair_index, (i, j) in enumerate(pairs):
        chart_a, chart_b = charts[i], charts[j]
        overlap = _sample_overlap(chart_a, chart_b, probes_per_pair,
                                  int(child_seeds[pair_index]))
        if not overlap:
            reports.append(TransitionReport(i, j, 0, 0.0, None))
            continue
        worst = 0.0
        for q in overlap:
            x_a = _kernel_offsets(chart_a, q)
            x_b = _kernel_offsets(chart_b, q)
            try:
                # transition a->b, then its inverse b->a, in chart coords
                t_ab = _kernel_offsets(chart_b, chart_a.inverse(x_a))
                err = float(np.linalg.norm(t_ab - x_b)) / \
                    (1.0 + float(np.linalg.norm(x_b)))
                t_back = _kernel_offsets(chart_a, chart_b.inverse(t_ab))
                err = max(err, float(np.linalg.norm(t_back - x_a)) /
                          (1.0 + float(np.linalg.norm(x_a))))
            except (NonConvergenceError, SingularBlockError):
                err = math.inf
            worst = max(worst, err)
        desc, offset_probes = _transition_descriptor(
            manifold, chart_a, chart_b, overlap)
        outcome = certify_tame(desc, offset_probes, r_max)
        reports.append(TransitionReport(
            i, j, len(overlap), worst, outcome.certificate))
    return reports


def transitions_csv_rows(reports: Sequence[TransitionReport]) -> List[tuple]:
    header = ("chart_i", "chart_j", "probes", "max_error", "r", "b")
    return [header] + [r.csv_row() for r in reports]


# ---------------------------------------------------------------------------
# maps into a submanifold
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntoSubmanifoldReport:
    max_image_residual: float
    probe_count: int
    certificate: Optional[TamenessCertificate]
    chart_coverage: Tuple[int, ...]
    chart_certificates: Tuple[Optional[TamenessCertificate], ...]

    @property
    def covered(self) -> int:
        return sum(self.chart_coverage)


def chart_restriction(desc: TameMapDescriptor, manifold: Submanifold,
                      chart_index: int) -> TameMapDescriptor:
    """The map followed by one chart's kernel projection, offsets embedded
    back along the kernel basis so it stays a map of the ambient space."""
    chart = manifold.charts[chart_index]

    def evaluator(h: TruncatedSequence) -> TruncatedSequence:
        return _embed_offsets(chart, _kernel_offsets(chart, desc(h)))

    return TameMapDescriptor(
        name=f"{desc.name}|chart{chart_index}",
        domain=desc.domain, codomain=manifold.ambient,
        evaluator=evaluator, linearity="nonlinear",
        region_radius=desc.region_radius, region_level=desc.region_level)


def certify_map_into_submanifold(desc: TameMapDescriptor,
                                 manifold: Submanifold,
                                 probes: Sequence[TruncatedSequence],
                                 r_max: int = 2, *,
                                 residual_tol: float =
                                 DEFAULT_IMAGE_RESIDUAL_TOL,
                                 **certify_kwargs) -> IntoSubmanifoldReport:
    """Check the image stays on the zero set, then certify into the ambient.

    A tameness certificate for the corestriction is exactly an ambient
    certificate plus the membership check: the constraint values vanish on
    the image, so no extra coordinates are involved.  Probes whose images
    land inside a chart's validity radius additionally certify that chart's
    composed restriction.
    """
    if desc.codomain is not manifold.ambient and \
            desc.codomain != manifold.ambient:
        raise ValueError("descriptor codomain must be the ambient space")
    if not probes:
        raise ValueError("need at least one probe")
    images = [desc(f) for f in probes]
    residuals = [manifold.residual(g) for g in images]
    worst = max(residuals)
    if worst > residual_tol:
        raise NotIntoSubmanifoldError(
            f"{desc.name}: image leaves the zero set "
            f"(max residual {worst:.3g} > {residual_tol:.3g})",
            residual=worst)
    outcome: CertificationOutcome = certify_tame(desc, probes, r_max,
                                                 **certify_kwargs)
    coverage = []
    chart_certs = []
    for k, chart in enumerate(manifold.charts):
        hits = [f for f, g in zip(probes, images) if chart.contains(g)]
        coverage.append(len(hits))
        if not hits:
            chart_certs.append(None)
            continue
        restricted = chart_restriction(desc, manifold, k)
        chart_certs.append(
            certify_tame(restricted, hits, r_max, **certify_kwargs)
            .certificate)
    return IntoSubmanifoldReport(
        max_image_residual=worst, probe_count=len(probes),
        certificate=outcome.certificate,
        chart_coverage=tuple(coverage),
        chart_certificates=tuple(chart_certs))


def normalization_descriptor(space: SequenceSpace, *,
                             region_radius: float,
                             region_level: int = 0) -> TameMapDescriptor:
    """f -> f / sqrt(<f,f>_0), mapping a ball away from zero onto the sphere."""
    from .graded import inner_product

    def evaluator(f: TruncatedSequence) -> TruncatedSequence:
        norm_sq = inner_product(f, f, 0)
        if norm_sq <= 0.0:
            raise ValueError("cannot normalize the zero sequence")
        return f * (1.0 / math.sqrt(norm_sq))

    return TameMapDescriptor(
        name="normalize0", domain=space, codomain=space,
        evaluator=evaluator, linearity="nonlinear",
        region_radius=region_radius, region_level=region_level)
