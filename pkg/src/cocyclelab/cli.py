"""Command-line pipelines: verify, assemble, realize/retard, trace, project,
fragment, and the end-to-end meridian-steering demo.

Every report embeds the resolved configuration (including the seed), and all
emitted CSV/SVG bytes are deterministic for a fixed configuration.

Exit codes: 0 success, 1 verification failure, 2 parse/usage errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io as fmt
from .cocycle import verify_flexible
from .factory import ScheduleInfeasible, build_flex_witness, plan_schedule
from .manifold import meridians_from_trace, project_to_torus, trace_wss
from .realization import GridSpec, certify_realization
from .retard import check_retard_perturbation_bound, check_retardable, homothetic_region, \
    realize_witness, retard
from .steering import build_transport_flow, fragment, make_finger_targets, \
    make_shift_targets, make_twist_targets, steer_meridians, TorusFlowMap


def _config_lines(args) -> str:
    pairs = sorted(vars(args).items())
    return "\n".join(f"  {k} = {v}" for k, v in pairs if not callable(v))


def _write(out_dir: Path, name: str, text: str):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(text)


def _report(args, title: str, body: str) -> str:
    return f"{title}\n{body}\nconfig:\n{_config_lines(args)}\n"


def _load_witness(args):
    if getattr(args, "witness_file", None):
        return fmt.load_path(Path(args.witness_file).read_text())
    kit, sched_lens = fmt.load_kit(Path(args.kit_file).read_text())
    sched = plan_schedule(kit, args.epsilon)
    return build_flex_witness(kit, sched, args.epsilon)


def cmd_verify_flex(args) -> int:
    path = fmt.load_path(Path(args.path_file).read_text())
    report = verify_flexible(path, args.epsilon)
    _write(Path(args.out), "flex_report.txt",
           _report(args, "verify-flex", report.summary()))
    return 0 if report.passed else 1


def cmd_assemble(args) -> int:
    kit, _ = fmt.load_kit(Path(args.kit_file).read_text())
    try:
        sched = plan_schedule(kit, args.epsilon)
        witness = build_flex_witness(kit, sched, args.epsilon)
    except ScheduleInfeasible as e:
        _write(Path(args.out), "assemble_report.txt",
               _report(args, "assemble (INFEASIBLE)", str(e)))
        return 1
    report = verify_flexible(witness, args.epsilon)
    out = Path(args.out)
    _write(out, "witness.txt", fmt.dump_path(witness))
    body = (f"schedule: l=({sched.l1},{sched.l2},{sched.l3},{sched.l4}) "
            f"i=({sched.i1},{sched.i2},{sched.i3}) mu_L={sched.mu_L!r} "
            f"nu={sched.nu!r} period={sched.period}\n" + report.summary())
    _write(out, "assemble_report.txt", _report(args, "assemble", body))
    return 0 if report.passed else 1


def _realized(args):
    witness = _load_witness(args)
    return realize_witness(witness, args.epsilon), witness


def cmd_retard(args) -> int:
    rw, witness = _realized(args)
    ret = retard(rw.rc, rw.spec, args.m)
    verdict = check_retardable(rw.rc, rw.spec, radii_per_decade=args.grid_radial,
                               angles=args.grid_angular)
    base = witness.at(0.0)
    bound = check_retard_perturbation_bound(ret, base, args.epsilon,
                                            radii_per_decade=args.grid_radial,
                                            angles=args.grid_angular)
    lo, hi = homothetic_region(ret)
    body = "\n".join([
        rw.summary(),
        verdict.summary(),
        f"homothetic region (log radii): [{lo!r}, {hi!r}]",
        f"retard perturbation bound: max dev {bound['max_dev']!r} "
        f"(< {args.epsilon}) -> {'pass' if bound['passed'] else 'FAIL'}",
    ])
    _write(Path(args.out), "retard_report.txt", _report(args, f"retard m={args.m}", body))
    return 0 if verdict.passed and bound["passed"] else 1


def cmd_trace_wss(args) -> int:
    rw, _ = _realized(args)
    ret = retard(rw.rc, rw.spec, args.m)
    chart = ret.chart()
    tr = trace_wss(ret, extent=(chart.anchor_log_r - chart.depth, chart.anchor_log_r))
    meridians = meridians_from_trace(tr, ret)
    out = Path(args.out)
    for k, mer in enumerate(meridians, 1):
        _write(out, f"meridian{k}.csv", fmt.write_curve_csv(mer))
    _write(out, "meridians.svg",
           fmt.torus_svg([(f"meridian {k + 1}", m) for k, m in enumerate(meridians)]))
    body = (f"trace: {tr.iterations} returns, branches "
            f"{[len(s) for s in tr.branches]} segments\n"
            f"meridian homology: {[m.homology for m in meridians]}")
    _write(out, "trace_report.txt", _report(args, f"trace-wss m={args.m}", body))
    return 0


def cmd_project(args) -> int:
    rw, _ = _realized(args)
    ret = retard(rw.rc, rw.spec, args.m)
    rows = [l.split(",") for l in Path(args.points_csv).read_text().splitlines() if l]
    if rows and rows[0][0].strip() == "x":
        rows = rows[1:]
    try:
        pts = np.array([[float(a), float(b)] for a, b in rows])
    except ValueError as e:
        raise fmt.FormatError(f"bad points CSV: {e}") from e
    lines = ["u,v"]
    for p in pts:
        tp = project_to_torus(ret, p)
        lines.append(f"{tp.u!r},{tp.v!r}")
    _write(Path(args.out), "projected.csv", "\n".join(lines) + "\n")
    return 0


def cmd_fragment(args) -> int:
    cur = [fmt.read_curve_csv(Path(p).read_text()) for p in args.curves]
    tgt = [fmt.read_curve_csv(Path(p).read_text()) for p in args.targets]
    flow = build_transport_flow(cur, tgt)
    fac = fragment(flow, args.mu)
    moved = [fac.transport_curve(c) for c in cur]
    from .manifold import curve_hausdorff

    residuals = [curve_hausdorff(m, t) for m, t in zip(moved, tgt)]
    body = (f"factors: {len(fac)} (mu={args.mu})\n"
            f"max factor C1 distance: {fac.max_c1()!r}\n"
            f"transport residuals: {[repr(r) for r in residuals]}")
    _write(Path(args.out), "fragment_report.txt", _report(args, "fragment", body))
    return 0 if fac.max_c1() < args.mu and max(residuals) < 1e-3 else 1


def cmd_demo_theorem1(args) -> int:
    kit, _ = fmt.load_kit(Path(args.kit_file).read_text())
    out = Path(args.out)
    try:
        sched = plan_schedule(kit, args.epsilon)
        witness = build_flex_witness(kit, sched, args.epsilon)
    except ScheduleInfeasible as e:
        _write(out, "demo_report.txt", _report(args, "demo-theorem1 (INFEASIBLE)", str(e)))
        return 1
    flex = verify_flexible(witness, args.epsilon)
    rw = realize_witness(witness, args.epsilon)
    cert = certify_realization(rw.rc, GridSpec(radial_decades=args.grid_radial,
                                               angles=args.grid_angular,
                                               orbits=250, seed=args.seed))
    ret = retard(rw.rc, rw.spec, 3)
    chart = ret.chart()
    tr = trace_wss(ret, extent=(chart.anchor_log_r - chart.depth, chart.anchor_log_r))
    before = meridians_from_trace(tr, ret)

    if args.targets:
        targets = [fmt.read_curve_csv(Path(p).read_text()) for p in args.targets]
    elif args.family == "shift":
        targets = make_shift_targets(before, 0.18)
    elif args.family == "finger":
        targets = make_finger_targets(before)
    else:
        targets = make_twist_targets(before, u_band=(0.15, 0.85))

    try:
        rep = steer_meridians(ret, targets, epsilon0=args.epsilon0)
    except ValueError as e:
        _write(out, "demo_report.txt",
               _report(args, "demo-theorem1 (REJECTED)", f"target validation: {e}"))
        return 1

    total = max(rep.perturbation_size + rw.diameter + rw.epsilon1, rep.perturbation_size)
    for k, (b, a, t) in enumerate(zip(rep.before, rep.after, rep.targets), 1):
        _write(out, f"meridian{k}_before.csv", fmt.write_curve_csv(b))
        _write(out, f"meridian{k}_after.csv", fmt.write_curve_csv(a))
        _write(out, f"meridian{k}_target.csv", fmt.write_curve_csv(t))
    curves = [(f"before {k + 1}", c) for k, c in enumerate(rep.before)]
    curves += [(f"target {k + 1}", c) for k, c in enumerate(rep.targets)]
    curves += [(f"after {k + 1}", c) for k, c in enumerate(rep.after)]
    _write(out, "meridians.svg", fmt.torus_svg(curves))
    body = "\n".join([
        flex.summary(),
        rw.summary(),
        cert.summary(),
        rep.summary(),
        f"total perturbation budget used (diameter + epsilon1 + steering): {total!r} "
        f"(< epsilon={args.epsilon})",
    ])
    _write(out, "demo_report.txt", _report(args, "demo-theorem1", body))
    ok = flex.passed and cert.passed and rep.passed and total < args.epsilon
    return 0 if ok else 1


def _common(p, *, epsilon=True):
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid-radial", type=int, default=12,
                   help="radial decades for certificate grids")
    p.add_argument("--grid-angular", type=int, default=64)
    if epsilon:
        p.add_argument("--epsilon", type=float, default=0.6)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cocyclelab", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("verify-flex", help="check the flexibility conditions of a path file")
    p.add_argument("--path-file", required=True)
    _common(p)
    p.set_defaults(fn=cmd_verify_flex)

    p = sub.add_parser("assemble", help="build and verify a flexibility witness from a kit")
    p.add_argument("--kit-file", required=True)
    _common(p)
    p.set_defaults(fn=cmd_assemble)

    for name, fn in (("retard", cmd_retard), ("trace-wss", cmd_trace_wss),
                     ("project", cmd_project)):
        p = sub.add_parser(name)
        g = p.add_mutually_exclusive_group(required=True)
        g.add_argument("--kit-file")
        g.add_argument("--witness-file")
        p.add_argument("--m", type=int, default=3)
        if name == "project":
            p.add_argument("--points-csv", required=True)
        _common(p)
        p.set_defaults(fn=fn)

    p = sub.add_parser("fragment", help="fragment a meridian-to-target transport flow")
    p.add_argument("--curves", nargs=2, required=True)
    p.add_argument("--targets", nargs=2, required=True)
    p.add_argument("--mu", type=float, default=0.05)
    _common(p, epsilon=False)
    p.set_defaults(fn=cmd_fragment)

    p = sub.add_parser("demo-theorem1", help="factory -> realization -> retard -> steer")
    p.add_argument("--kit-file", required=True)
    p.add_argument("--family", choices=["shift", "finger", "twist"], default="shift")
    p.add_argument("--targets", nargs=2, help="two target curve CSV files")
    p.add_argument("--epsilon0", type=float, default=0.12)
    _common(p)
    p.set_defaults(fn=cmd_demo_theorem1)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        return args.fn(args)
    except (fmt.FormatError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
