"""``szabo-forge`` command line interface.

Usage:
    szabo-forge ricci  --spec wong.json --point 0,0
    szabo-forge check  --spec wong.json [--samples N --tol T --seed S --box lo,hi]
    szabo-forge extend --spec family.json --json --out report.json
    szabo-forge verify --spec wong.json --theorem recurrence
    szabo-forge wong   --phi "u1*u2" --out wong.json

Exit codes: 0 analysis completed (whatever the verdicts), 2 bad input,
3 numerical domain error while evaluating the spec file.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .affine import (AffineConnection, classify_ricci_values, covector_closedness,
                     is_affine_szabo, is_cyclic_parallel, recurrence_covector,
                     ricci_at, ricci_symmetry_classify, szabo_batch, wong_connection)
from .expr import DomainError, ExprSyntaxError, parse
from .extension import deformed_extension
from .manifold_spec import ManifoldSpec, SpecError, spec_from_connection
from .metric import (block_structure_check, christoffel_cross_check, compatibility_residuals,
                     curvature_identity_residuals, is_metric_szabo_nilpotent, unit_lift)
from .smallnum import (DEFAULT_SAMPLES, DEFAULT_SEED, DEFAULT_TOL, SampleDomain, Verdict,
                       sample_points, unit_directions)

THEOREMS = ("surface-szabo", "cyclic-parallel", "extension", "recurrence")
COMPATIBILITY_TOL = 1e-11
ZERO_SECTION_CHECKS = 25
DEFAULT_BOX = (-1.0, 1.0)


@dataclass
class RunOptions:
    samples: int | None = None
    tol: float | None = None
    seed: int | None = None
    box: tuple | None = None
    fiber_box: tuple | None = None


def _domain(spec: ManifoldSpec, opts: RunOptions, extended: bool = False) -> SampleDomain:
    dom = spec.domain
    n = spec.dimension
    box = opts.box or _box_from_spec(dom.get("box"), n, "box")
    fiber = opts.fiber_box or _box_from_spec(dom.get("fiber_box"), n, "fiber_box")
    axes = tuple(box) + (tuple(fiber) if extended else ())
    return SampleDomain(
        box=axes,
        count=opts.samples if opts.samples is not None else dom.get("samples", DEFAULT_SAMPLES),
        seed=opts.seed if opts.seed is not None else dom.get("seed", DEFAULT_SEED),
        tol=opts.tol if opts.tol is not None else dom.get("tol", DEFAULT_TOL))


def _box_from_spec(value, n: int, where: str) -> tuple:
    if value is None:
        return (DEFAULT_BOX,) * n
    if (isinstance(value, list) and len(value) == 2
            and all(isinstance(v, (int, float)) for v in value)):
        return (tuple(value),) * n
    if isinstance(value, list) and len(value) == n and all(
            isinstance(v, list) and len(v) == 2 for v in value):
        return tuple(tuple(v) for v in value)
    raise SpecError(f"domain.{where} must be [lo, hi] or one [lo, hi] per axis")


def _report(command: str, spec: ManifoldSpec, d: SampleDomain, verdicts: list[Verdict],
            notes: list[str], **extra) -> dict:
    out = {
        "version": __version__,
        "command": command,
        "spec_digest": spec.digest(),
        "seed": d.seed,
        "tol": d.tol,
        "samples": d.count,
        "box": [list(axis) for axis in d.box],
        "verdicts": [v.to_dict() for v in verdicts],
        "notes": notes,
    }
    out.update(extra)
    return _json_safe(out)


def _json_safe(value):
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return _json_safe(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def _matrix(m) -> list[list[float]]:
    return [[float(x) for x in row] for row in np.asarray(m)]


# ---------------------------------------------------------------- commands

def cmd_ricci(spec: ManifoldSpec, point, opts: RunOptions = RunOptions()) -> dict:
    c = spec.connection()
    d = _domain(spec, opts)
    point = np.asarray(point, dtype=np.float64)
    if point.shape != (c.dim,):
        raise SpecError(f"--point needs {c.dim} coordinates")
    rho = ricci_at(c, point).values
    cls = classify_ricci_values(rho[None], d.tol)
    return _report("ricci", spec, d, [], [], point=point, ricci=_matrix(rho),
                   ricci_symmetry=cls.to_dict())


def _skew_note(szabo: Verdict, ricci) -> list[str]:
    if szabo.outcome and not (ricci.kind == "skew" and ricci.nonzero):
        return [f"affine Szabó although the Ricci tensor is {ricci.kind}"
                f"{'' if ricci.nonzero else ' and vanishes somewhere'}: "
                "skew-symmetric nonzero Ricci is sufficient for the Szabó property "
                "but this sample shows it is not necessary"]
    return []


def _ricci_verdict(ricci, d: SampleDomain) -> Verdict:
    outcome = ricci.kind == "skew" and ricci.nonzero
    return Verdict(name="ricci_skew_nonzero", outcome=outcome, residual=ricci.skew_residual,
                   samples=ricci.samples, tol=d.tol, seed=d.seed,
                   worst_sample={"min_magnitude": ricci.min_magnitude})


def _equivalence(name: str, a: Verdict, b: Verdict) -> Verdict:
    same = a.outcome == b.outcome
    return Verdict(name=name, outcome=same, residual=0.0 if same else 1.0,
                   samples=a.samples + b.samples, tol=a.tol, seed=a.seed,
                   worst_sample={a.name: a.outcome, b.name: b.outcome})


def cmd_check(spec: ManifoldSpec, opts: RunOptions = RunOptions()) -> dict:
    c = spec.connection()
    d = _domain(spec, opts)
    szabo = is_affine_szabo(c, d)
    cyclic = is_cyclic_parallel(c, d)
    ricci = ricci_symmetry_classify(c, d)
    notes = _skew_note(szabo, ricci)
    if cyclic.outcome != szabo.outcome:
        notes.append("cyclic-parallel and Szabó verdicts disagree")
    verdicts = [szabo, cyclic, _ricci_verdict(ricci, d)]
    return _report("check", spec, d, verdicts, notes, ricci_symmetry=ricci.to_dict())


def _zero_section_checks(metric, c: AffineConnection, d_base: SampleDomain, count: int,
                         off_section: SampleDomain | None = None):
    """Block-structure residuals at zero-section points (and optionally off it)."""
    sub = SampleDomain(box=d_base.box, count=count, seed=d_base.seed, tol=d_base.tol)
    base_pts = sample_points(sub, guard=c.guard_expressions(), stream=2)
    dirs = unit_directions(sub.rng(3), count, c.dim)
    on, off = [], []
    for p, x in zip(base_pts, dirs):
        point = np.concatenate([p, np.zeros(c.dim)])
        on.append(block_structure_check(metric, point, np.concatenate([x, np.zeros(c.dim)])))
        on.append(block_structure_check(metric, point, unit_lift(metric, point, x, 1)))
    if off_section is not None:
        sub4 = SampleDomain(box=off_section.box, count=count, seed=off_section.seed,
                            tol=off_section.tol)
        pts4 = sample_points(sub4, guard=metric.guard_expressions(), stream=4)
        for p, x in zip(pts4, dirs):
            off.append(block_structure_check(metric, p, unit_lift(metric, p, x, 1)))
    return on, off


def _max_blocks(checks) -> dict:
    keys = ("upper_left", "upper_right", "lower_right", "product_identity")
    return {k: max(getattr(b, k) for b in checks) for k in keys} if checks else {}


def cmd_extend(spec: ManifoldSpec, opts: RunOptions = RunOptions()) -> dict:
    c = spec.connection()
    metric = deformed_extension(c, spec.phi_spec(), spec.extension_coordinates())
    d_base = _domain(spec, opts)
    d4 = _domain(spec, opts, extended=True)
    notes: list[str] = []

    nilpotent = is_metric_szabo_nilpotent(metric, d4)
    base = is_affine_szabo(c, d_base)
    count = min(ZERO_SECTION_CHECKS, d4.count)
    on, off = _zero_section_checks(metric, c, d_base, count, off_section=d4)
    blocks = _max_blocks(on)
    block_res = max(blocks["upper_left"], blocks["upper_right"], blocks["lower_right"])
    block_verdict = Verdict(name="zero_section_block_structure", outcome=block_res <= d4.tol,
                            residual=block_res, samples=len(on), tol=d4.tol, seed=d4.seed)
    product_verdict = Verdict(name="zero_section_product_identity",
                              outcome=blocks["product_identity"] <= d4.tol,
                              residual=blocks["product_identity"], samples=len(on),
                              tol=d4.tol, seed=d4.seed)
    check_pts = sample_points(SampleDomain(box=d4.box, count=min(50, d4.count), seed=d4.seed,
                                           tol=d4.tol), guard=metric.guard_expressions(),
                              stream=5)
    compat = compatibility_residuals(metric, check_pts)
    worst = int(np.argmax(compat))
    compat_verdict = Verdict(name="levi_civita_compatibility",
                             outcome=float(compat[worst]) <= COMPATIBILITY_TOL,
                             residual=float(compat[worst]), samples=len(check_pts),
                             tol=COMPATIBILITY_TOL, seed=d4.seed,
                             worst_sample={"point": check_pts[worst]})
    equivalence = _equivalence("szabo_equivalence", base, nilpotent)
    if not equivalence.outcome:
        notes.append("base Szabó verdict and extension nilpotency verdict differ")
    cross = christoffel_cross_check(metric, check_pts)
    for family in ("base_fiber", "fiber"):
        if cross[family] > d4.tol:
            notes.append(f"displayed Christoffel family '{family}' deviates from the "
                         f"metric-derived symbols by up to {cross[family]:.3g}")
    return _report(
        "extend", spec, d4,
        [nilpotent, base, equivalence, block_verdict, product_verdict, compat_verdict],
        notes,
        metric_coordinates=list(metric.coordinates),
        block_structure_zero_section=blocks,
        block_structure_off_zero_section=_max_blocks(off),
        christoffel_cross_check=cross,
        curvature_identities=curvature_identity_residuals(metric, check_pts),
    )


def cmd_verify(spec: ManifoldSpec, theorem: str, opts: RunOptions = RunOptions()) -> dict:
    if theorem not in THEOREMS:
        raise SpecError(f"unknown theorem {theorem!r}; choose from {', '.join(THEOREMS)}")
    c = spec.connection()
    d = _domain(spec, opts)
    notes: list[str] = []
    extra: dict = {"theorem": theorem}

    if theorem == "surface-szabo":
        szabo = is_affine_szabo(c, d)
        pts = sample_points(d, guard=c.guard_expressions())
        mats = szabo_batch(c, pts, unit_directions(d.rng(1), len(pts), c.dim))
        tr = np.abs(np.trace(mats, axis1=1, axis2=2))
        det = np.abs(np.linalg.det(mats))
        scale = np.maximum(1.0, np.linalg.norm(mats, axis=(1, 2)))
        lam = float(np.max(np.maximum(tr / scale, det / scale ** 2)))
        verdicts = [szabo, Verdict(name="trace_and_determinant_vanish", outcome=lam <= d.tol,
                                   residual=lam, samples=len(pts), tol=d.tol, seed=d.seed)]
        if szabo.outcome != verdicts[1].outcome:
            notes.append("characteristic polynomial test and trace/determinant test disagree")
        return _report("verify", spec, d, verdicts, notes, **extra)

    if theorem == "cyclic-parallel":
        szabo = is_affine_szabo(c, d)
        cyclic = is_cyclic_parallel(c, d)
        ricci = ricci_symmetry_classify(c, d)
        notes.extend(_skew_note(szabo, ricci))
        return _report("verify", spec, d,
                       [szabo, cyclic, _equivalence("cyclic_parallel_equivalence", szabo, cyclic)],
                       notes, ricci_symmetry=ricci.to_dict(), **extra)

    if theorem == "extension":
        metric = deformed_extension(c, spec.phi_spec(), spec.extension_coordinates())
        d4 = _domain(spec, opts, extended=True)
        base = is_affine_szabo(c, d)
        nil = is_metric_szabo_nilpotent(metric, d4)
        return _report("verify", spec, d4, [base, nil, _equivalence("szabo_equivalence", base, nil)],
                       notes, **extra)

    # recurrence
    rec = recurrence_covector(c, d)
    rec_verdict = Verdict(name="ricci_recurrent", outcome=rec.recurrent,
                          residual=rec.residual, samples=len(rec.points), tol=d.tol,
                          seed=d.seed)
    verdicts = [rec_verdict]
    extra["recurrence"] = {
        "status": rec.status,
        "skipped_samples": len(rec.skipped),
        "alpha_samples": [{"point": p, "alpha": a}
                          for p, a in zip(rec.points[:5], rec.alphas[:5])],
    }
    if rec.skipped:
        notes.append(f"{len(rec.skipped)} samples skipped: Ricci tensor vanishes there")
    if rec.status == "recurrent":
        norms = np.linalg.norm(np.nan_to_num(rec.alphas), axis=1)
        if np.any(norms >= d.tol):
            cl = covector_closedness(c, d, rec)
            verdicts.append(Verdict(
                name="recurrence_covector_gradient", outcome=not cl.not_gradient,
                residual=cl.min_abs_curl, samples=cl.samples_used, tol=10 * d.tol,
                seed=d.seed))
            extra["closedness"] = {"max_abs_curl": cl.max_abs_curl,
                                   "min_abs_curl": cl.min_abs_curl,
                                   "mean_curl": float(np.mean(cl.curls)),
                                   "gradient": not cl.not_gradient}
        else:
            notes.append("recurrence covector vanishes on the sample; closedness not tested")
    elif rec.status == "zero-nabla-rho":
        notes.append("Ricci tensor is parallel: the recurrence covector is 0 and the "
                     "non-gradient statement is vacuous")
    return _report("verify", spec, d, verdicts, notes, **extra)


def cmd_wong(phi_text: str, box=None) -> ManifoldSpec:
    phi = parse(phi_text, ("u1", "u2"))
    domain = {"box": [list(axis) for axis in box]} if box else None
    return spec_from_connection(wong_connection(phi), name=f"wong phi={phi_text}",
                                domain=domain)


# ---------------------------------------------------------------- plumbing

def _parse_floats(text: str, what: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise SpecError(f"{what} must be comma-separated numbers, got {text!r}") from None


def _parse_box(text: str | None, n: int):
    if text is None:
        return None
    axes = [_parse_floats(part, "--box") for part in text.split(";")]
    if any(len(a) != 2 for a in axes):
        raise SpecError("--box takes 'lo,hi' or 'lo,hi;lo,hi;...'")
    if len(axes) == 1:
        axes = axes * n
    if len(axes) != n:
        raise SpecError(f"--box needs 1 or {n} intervals")
    return tuple(tuple(a) for a in axes)


def render_text(report: dict) -> str:
    lines = [f"szabo-forge {report['version']}  {report['command']}"
             + (f" ({report['theorem']})" if "theorem" in report else "")]
    if "spec_digest" in report:
        lines.append(f"spec {report['spec_digest'][:16]}  seed={report['seed']}  "
                     f"tol={report['tol']:g}  samples={report['samples']}")
    if "ricci" in report:
        lines.append("ricci at point:")
        lines.extend("  " + "  ".join(f"{x: .6g}" for x in row) for row in report["ricci"])
    if "ricci_symmetry" in report:
        rs = report["ricci_symmetry"]
        lines.append(f"ricci symmetry: {rs['kind']} (nonzero everywhere: {rs['nonzero']})")
    for v in report.get("verdicts", []):
        status = "true " if v["outcome"] else "false"
        lines.append(f"  {v['name']:<34} {status} residual={v['residual']:.3g} "
                     f"(tol {v['tol']:g}, n={v['samples']})")
    for key in ("block_structure_zero_section", "block_structure_off_zero_section",
                "christoffel_cross_check", "closedness"):
        if key in report and report[key]:
            items = ", ".join(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}"
                              for k, v in report[key].items())
            lines.append(f"{key}: {items}")
    if "recurrence" in report:
        lines.append(f"recurrence: {report['recurrence']['status']}")
    for note in report.get("notes", []):
        lines.append(f"note: {note}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="szabo-forge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_spec=True):
        if needs_spec:
            p.add_argument("--spec", required=True, help="manifold spec (JSON)")
        p.add_argument("--samples", type=int)
        p.add_argument("--tol", type=float)
        p.add_argument("--seed", type=lambda s: int(s, 0))
        p.add_argument("--box", help="'lo,hi' for every base axis or 'lo,hi;lo,hi'")
        p.add_argument("--fiber-box", help="same format, for the fiber axes")
        p.add_argument("--json", action="store_true", help="print the JSON report")
        p.add_argument("--out", help="write the JSON report (or spec, for wong) here")

    common(sub.add_parser("check", help="affine Szabó, cyclic-parallel and Ricci checks"))
    p = sub.add_parser("ricci", help="Ricci tensor at a point")
    common(p)
    p.add_argument("--point", required=True)
    common(sub.add_parser("extend", help="deformed Riemannian extension checks"))
    p = sub.add_parser("verify", help="run one theorem suite")
    common(p)
    p.add_argument("--theorem", required=True, choices=THEOREMS)
    p = sub.add_parser("wong", help="write a spec file for a Wong connection")
    common(p, needs_spec=False)
    p.add_argument("--phi", required=True, help="potential, e.g. 'u1*u2'")
    return parser


_VALUE_FLAGS = ("--box", "--fiber-box", "--point")


def _attach_negative_values(argv: list[str]) -> list[str]:
    # argparse reads "--box -1,1" as two options; glue such values to their flag
    out: list[str] = []
    i = 0
    while i < len(argv):
        if argv[i] in _VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def run(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_attach_negative_values(argv))
    try:
        if args.command == "wong":
            spec = cmd_wong(args.phi, _parse_box(args.box, 2))
            text = json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n"
            if args.out:
                Path(args.out).write_text(text, encoding="utf-8")
            else:
                sys.stdout.write(text)
            return 0
        spec = ManifoldSpec.load(args.spec)
        opts = RunOptions(samples=args.samples, tol=args.tol, seed=args.seed,
                          box=_parse_box(args.box, spec.dimension),
                          fiber_box=_parse_box(args.fiber_box, spec.dimension))
        if args.command == "ricci":
            report = cmd_ricci(spec, _parse_floats(args.point, "--point"), opts)
        elif args.command == "check":
            report = cmd_check(spec, opts)
        elif args.command == "extend":
            report = cmd_extend(spec, opts)
        else:
            report = cmd_verify(spec, args.theorem, opts)
    except (SpecError, ExprSyntaxError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"numerical domain error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    payload = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
    sys.stdout.write(payload if args.json else render_text(report) + "\n")
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
