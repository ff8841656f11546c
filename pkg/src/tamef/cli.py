"""Command-line surface: certification, solving, and atlas construction as
seeded batch runs with machine-readable outputs.

Exit codes: 0 success, 2 certification failure (witness written), 3 solve
failure (history written), 4 construction failure (evidence written),
64 bad usage/config.  Identical configs including the seed produce
byte-identical output files; nothing time- or environment-dependent is
ever written.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import (ConstructionError, NonConvergenceError, RegularityError,
                     SingularBlockError)
from .graded import (BanachFiber, Grading, ProductSpace, SequenceSpace,
                     TruncatedSequence, certify_grading_equivalence,
                     custom_grading, l1_grading, linf_grading, seminorm_l1)
from .implicit import PointSplit, build_constraint, is_regular_point, \
    solve_implicit
from .manifold import make_sphere, make_sphere_intersection, \
    transitions_csv_rows, verify_transitions
from .maps import build_map, certify_tame
from .probes import GENERATOR_NAME, make_probes, make_product_probes
from .serialize import write_csv, write_json

EXIT_OK = 0
EXIT_CERTIFICATION_FAILED = 2
EXIT_SOLVE_FAILED = 3
EXIT_CONSTRUCTION_FAILED = 4
EXIT_USAGE = 64

COMMANDS = ("certify-gradings", "certify-map", "solve", "atlas")
GRADING_NAMES = ("l1", "linf", "decreasing")


class ConfigError(ValueError):
    """Bad flags, config file, or registry selection."""


@dataclass
class RunConfig:
    command: str = ""
    k: int = 32
    nmax: int = 6
    fiber_dimension: int = 1
    seed: int = 0
    probes: int = 64
    tol: float = 1e-9
    r_max: int = 2
    out: str = "tamef-out"
    g1: str = "l1"
    g2: str = "linf"
    map: str = "identity"
    constraint: str = "sphere:0"
    constraint_params: Optional[dict] = None
    base_point: Optional[list] = None
    x_offsets: List[float] = field(default_factory=list)
    y0: Optional[List[float]] = None
    max_iter: int = 50
    radii: Optional[List[float]] = None

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if not 1 <= self.k <= 4096:
            raise ConfigError(f"truncation degree {self.k} out of range")
        if self.nmax < 0:
            raise ConfigError("nmax must be >= 0")
        if self.fiber_dimension < 1:
            raise ConfigError("fiber dimension must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.probes < 1:
            raise ConfigError("probe count must be >= 1")
        if not (self.tol > 0.0 and math.isfinite(self.tol)):
            raise ConfigError("tolerance must be positive and finite")
        if self.r_max < 0:
            raise ConfigError("r_max must be >= 0")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")
        if self.command == "certify-gradings":
            for name in (self.g1, self.g2):
                if name not in GRADING_NAMES:
                    raise ConfigError(f"unknown grading {name!r}; "
                                      f"known: {', '.join(GRADING_NAMES)}")

    def space(self) -> SequenceSpace:
        try:
            return SequenceSpace(BanachFiber(self.fiber_dimension),
                                 truncation_degree=self.k, n_max=self.nmax)
        except ValueError as err:
            raise ConfigError(str(err)) from err

    def meta(self) -> dict:
        return {
            "generator": GENERATOR_NAME,
            "seed": self.seed,
            "command": self.command,
            "k": self.k,
            "nmax": self.nmax,
            "fiber_dimension": self.fiber_dimension,
            "probes": self.probes,
            "tol": self.tol,
            "r_max": self.r_max,
        }

    def csv_comments(self) -> list:
        return [f"generator={GENERATOR_NAME} seed={self.seed}"]


def _load_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


_CONFIG_KEYS = {
    "command": str, "k": int, "nmax": int, "fiber_dimension": int,
    "seed": int, "probes": int, "tol": float, "r_max": int, "out": str,
    "g1": str, "g2": str, "map": str, "constraint": str,
    "constraint_params": dict, "base_point": list, "x_offsets": list,
    "y0": list, "max_iter": int, "radii": list,
}


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        blob = _load_config_file(args.config)
        for key, value in blob.items():
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            want = _CONFIG_KEYS[key]
            if want is float and isinstance(value, int):
                value = float(value)
            if not isinstance(value, want):
                raise ConfigError(
                    f"config key {key!r} must be {want.__name__}")
            setattr(cfg, key, value)
    for key in ("k", "nmax", "seed", "probes", "tol", "out", "g1", "g2",
                "map", "constraint", "r_max", "max_iter"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    if getattr(args, "command", None):
        cfg.command = args.command
    cfg.validate()
    return cfg


def _sequence_from_list(space: SequenceSpace, data: list,
                        what: str) -> TruncatedSequence:
    block = np.zeros((space.truncation_degree + 1, space.fiber.dimension))
    if len(data) > space.truncation_degree + 1:
        raise ConfigError(f"{what} longer than the truncation")
    for k, entry in enumerate(data):
        row = np.atleast_1d(np.asarray(entry, dtype=np.float64))
        if row.shape != (space.fiber.dimension,):
            raise ConfigError(f"{what}[{k}] does not match the fiber")
        block[k] = row
    return TruncatedSequence(space.fiber, block)


def _grading_by_name(name: str, n_max: int) -> Grading:
    if name == "l1":
        return l1_grading(n_max)
    if name == "linf":
        return linf_grading(n_max)
    # a family that shrinks with the level: violates two-sided tameness
    return custom_grading(
        lambda f, n: math.exp(-float(n)) * seminorm_l1(f, 0),
        n_max, kind="decreasing")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_certify_gradings(cfg: RunConfig) -> int:
    space = cfg.space()
    g1 = _grading_by_name(cfg.g1, cfg.nmax)
    g2 = _grading_by_name(cfg.g2, cfg.nmax)
    probes = make_probes(space, cfg.probes, cfg.seed)
    outcome = certify_grading_equivalence(g1, g2, probes, cfg.r_max)
    table_rows = [("direction", "n", "C", "max_ratio")]
    for direction, cert, path in (
            ("g1<=g2", outcome.forward, "grading_forward.json"),
            ("g2<=g1", outcome.backward, "grading_backward.json")):
        if cert is None:
            continue
        write_json(os.path.join(cfg.out, path), {
            "meta": cfg.meta(),
            "direction": direction,
            "g1": cfg.g1,
            "g2": cfg.g2,
            "certificate": cert.to_json(),
        })
        for n, c_n, ratio in cert.csv_rows():
            table_rows.append((direction, n, c_n, ratio))
    write_csv(os.path.join(cfg.out, "grading_tables.csv"), table_rows,
              cfg.csv_comments())
    if outcome.ok:
        return EXIT_OK
    failure = outcome.failure
    write_json(os.path.join(cfg.out, "witness.json"), {
        "meta": cfg.meta(),
        "direction": failure.direction,
        "g1": cfg.g1,
        "g2": cfg.g2,
        "r": failure.witness.r,
        "level": failure.witness.level,
        "probe_index": failure.witness.probe_index,
        "ratio": failure.witness.ratio,
        "reason": failure.witness.reason,
        "probe": failure.probe.to_json(),
    })
    return EXIT_CERTIFICATION_FAILED


def cmd_certify_map(cfg: RunConfig) -> int:
    space = cfg.space()
    try:
        desc = build_map(cfg.map, space)
    except (ValueError, IndexError) as err:
        raise ConfigError(f"cannot build map {cfg.map!r}: {err}") from err
    if isinstance(desc.domain, ProductSpace):
        probes = make_product_probes(desc.domain.factors, cfg.probes,
                                     cfg.seed)
    else:
        probes = make_probes(desc.domain, cfg.probes, cfg.seed)
    outcome = certify_tame(desc, probes, cfg.r_max)
    if outcome.certificate is not None:
        cert = outcome.certificate
        write_json(os.path.join(cfg.out, "map_certificate.json"), {
            "meta": cfg.meta(),
            "map": cfg.map,
            "certificate": cert.to_json(),
        })
        rows = [("n", "C", "max_ratio")] + list(cert.csv_rows())
        write_csv(os.path.join(cfg.out, "map_table.csv"), rows,
                  cfg.csv_comments())
        return EXIT_OK
    witness = outcome.witness
    write_json(os.path.join(cfg.out, "witness.json"), {
        "meta": cfg.meta(),
        "map": cfg.map,
        "r": witness.r,
        "level": witness.level,
        "probe_index": witness.probe_index,
        "ratio": witness.ratio,
        "reason": witness.reason,
    })
    return EXIT_CERTIFICATION_FAILED


def cmd_solve(cfg: RunConfig) -> int:
    space = cfg.space()
    try:
        constraint = build_constraint(cfg.constraint, space,
                                      cfg.constraint_params)
    except (ValueError, IndexError) as err:
        raise ConfigError(
            f"cannot build constraint {cfg.constraint!r}: {err}") from err
    if cfg.base_point is None:
        base = space.basis(0)
    else:
        base = _sequence_from_list(space, cfg.base_point, "base_point")

    def write_failure(err) -> int:
        history = list(getattr(err, "history", []) or [])
        rows = [("iter", "residual")] + list(enumerate(history))
        write_csv(os.path.join(cfg.out, "history.csv"), rows,
                  cfg.csv_comments())
        write_json(os.path.join(cfg.out, "error.json"), {
            "meta": cfg.meta(),
            "constraint": cfg.constraint,
            "error_type": type(err).__name__,
            "error": str(err),
        })
        return EXIT_SOLVE_FAILED

    try:
        report = is_regular_point(constraint, base)
        if not report.rank_decision:
            raise RegularityError(
                f"base point is not regular "
                f"(singular values {report.singular_values})")
        split = PointSplit(constraint, report)
        x, base_y = split.coords_of(base)
        if len(cfg.x_offsets) > x.size:
            raise ConfigError("more x_offsets than kernel coordinates")
        for i, value in enumerate(cfg.x_offsets):
            x[i] += float(value)
        y0 = np.asarray(cfg.y0, dtype=np.float64) if cfg.y0 is not None \
            else base_y
        if y0.shape != (split.split.y_dim,):
            raise ConfigError("y0 length must equal the codimension")
        result = solve_implicit(split.split, x, y0, tol=cfg.tol,
                                max_iter=cfg.max_iter)
    except (NonConvergenceError, SingularBlockError, RegularityError) as err:
        return write_failure(err)
    point = split.point_of(x, result.y)
    write_json(os.path.join(cfg.out, "solution.json"), {
        "meta": cfg.meta(),
        "constraint": cfg.constraint,
        "converged": result.converged,
        "iterations": result.iterations,
        "x": [float(v) for v in x],
        "y": [float(v) for v in result.y],
        "residual": result.residuals[-1],
        "point": point.to_json(),
    })
    rows = [("iter", "residual")] + list(enumerate(result.residuals))
    write_csv(os.path.join(cfg.out, "history.csv"), rows,
              cfg.csv_comments())
    return EXIT_OK


def cmd_atlas(cfg: RunConfig) -> int:
    space = cfg.space()
    head, _, rest = cfg.constraint.partition(":")
    try:
        if head == "sphere":
            levels = [int(rest) if rest else 0]
        elif head == "spheres":
            levels = [int(s) for s in rest.split(",") if s != ""]
        else:
            raise ConfigError(
                f"atlas supports sphere:<n> and spheres:<n1,...>, "
                f"got {cfg.constraint!r}")
    except ValueError as err:
        raise ConfigError(f"bad constraint levels: {err}") from err
    for n in levels:
        if not 0 <= n <= cfg.nmax:
            raise ConfigError(f"sphere level {n} outside 0..{cfg.nmax}")
    try:
        if head == "sphere":
            manifold = make_sphere(space, levels[0], seed=cfg.seed)
        else:
            manifold = make_sphere_intersection(space, levels,
                                                radii=cfg.radii,
                                                seed=cfg.seed)
    except ConstructionError as err:
        write_json(os.path.join(cfg.out, "evidence.json"), {
            "meta": cfg.meta(),
            "constraint": cfg.constraint,
            "error": str(err),
            "evidence": err.evidence,
        })
        return EXIT_CONSTRUCTION_FAILED
    except ValueError as err:
        raise ConfigError(str(err)) from err
    reports = verify_transitions(manifold, probes_per_pair=cfg.probes,
                                 seed=cfg.seed, r_max=cfg.r_max)
    write_json(os.path.join(cfg.out, "atlas.json"), {
        "meta": cfg.meta(),
        **manifold.to_json(),
    })
    write_csv(os.path.join(cfg.out, "transitions.csv"),
              transitions_csv_rows(reports), cfg.csv_comments())
    if all(r.ok for r in reports):
        return EXIT_OK
    return EXIT_CERTIFICATION_FAILED


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------

def _add_common_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, help="64-bit probe seed")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--k", type=int, help="truncation degree")
    parser.add_argument("--nmax", type=int, help="highest seminorm level")
    parser.add_argument("--tol", type=float, help="solver tolerance")
    parser.add_argument("--probes", type=int, help="probe count")
    parser.add_argument("--r-max", dest="r_max", type=int,
                        help="largest level shift to try")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tamef",
        description="Certification, solving, and atlas runs over truncated "
                    "coefficient sequences.")
    sub = parser.add_subparsers(dest="command")
    p = sub.add_parser("certify-gradings",
                       help="two-sided grading equivalence certificates")
    _add_common_flags(p)
    p.add_argument("--g1", help="first grading (l1|linf|decreasing)")
    p.add_argument("--g2", help="second grading (l1|linf|decreasing)")
    p = sub.add_parser("certify-map", help="tameness certificate for a "
                                           "registry map")
    _add_common_flags(p)
    p.add_argument("--map", help="registry map name")
    p = sub.add_parser("solve", help="implicit solve on a registry "
                                     "constraint")
    _add_common_flags(p)
    p.add_argument("--constraint", help="registry constraint name")
    p.add_argument("--max-iter", dest="max_iter", type=int,
                   help="Newton iteration budget")
    p = sub.add_parser("atlas", help="build a sphere atlas and verify "
                                     "transitions")
    _add_common_flags(p)
    p.add_argument("--constraint", help="sphere:<n> or spheres:<n1,n2,...>")
    return parser


_DISPATCH = {
    "certify-gradings": cmd_certify_gradings,
    "certify-map": cmd_certify_map,
    "solve": cmd_solve,
    "atlas": cmd_atlas,
}


def _check_thread_cap():
    raw = os.environ.get("TAMEF_THREADS")
    if raw is None or raw == "":
        return
    try:
        cap = int(raw)
    except ValueError as err:
        raise ConfigError(f"TAMEF_THREADS must be an integer: {raw!r}") \
            from err
    if cap < 1:
        raise ConfigError("TAMEF_THREADS must be >= 1")


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        _check_thread_cap()
        cfg = build_config(args)
        os.makedirs(cfg.out, exist_ok=True)
        return _DISPATCH[cfg.command](cfg)
    except ConfigError as err:
        print(f"tamef: {err}", file=sys.stderr)
        return EXIT_USAGE


def main() -> int:
    return run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
