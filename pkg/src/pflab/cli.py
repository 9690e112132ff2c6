"""Command line driver: ``pflab run``, ``pflab list-suites``, ``pflab export-operator``."""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

from .assembly import add_zeeman, assemble_free, assemble_interacting, export_matrix_market
from .manifest import ManifestError, build_spec, load_manifest
from .suites import CRITERIA, SUITES, TABLES, SuiteOutput, report_rows, run_suite

REPORT_HEADER = ["suite", "check", "constant", "observed_ratio", "expected_fail", "pass"]


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.10e}"
    if hasattr(x, "item"):
        return _fmt(x.item())
    return str(x)


def _csv_text(header: list[str], rows, sha: str, seed: int) -> str:
    buf = io.StringIO()
    buf.write(f"# manifest_sha256={sha} seed={seed}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _suites_of(value) -> list[str]:
    names = value if isinstance(value, list) else [value]
    bad = [n for n in names if n not in SUITES]
    if bad:
        raise KeyError(f"unknown suite {', '.join(map(repr, bad))}; valid suites: {', '.join(SUITES)}")
    return names


def cmd_run(args) -> int:
    man = load_manifest(args.manifest, overrides={"seed": args.seed, "suite": args.suite,
                                                  "output": args.out})
    names = _suites_of(man.data["suite"])
    out_dir = Path(args.out) if args.out else man.resolve(man.data["output"])
    out_dir.mkdir(parents=True, exist_ok=True)
    total = SuiteOutput()
    rows = []
    for name in names:
        res = run_suite(name, man)
        rows += report_rows(name, res.reports)
        total.extend(res)
    (out_dir / "report.csv").write_text(_csv_text(REPORT_HEADER, rows, man.sha256, man.seed))
    for fname, header in TABLES.items():
        (out_dir / fname).write_text(_csv_text(header, total.tables[fname], man.sha256, man.seed))
    (out_dir / "manifest.lock").write_text(man.lock_text())
    failed = [r for r in rows if not r[-1]]
    for r in rows:
        status = "PASS" if r[-1] else "FAIL"
        tag = " (expected-fail fixture)" if r[4] else ""
        print(f"{status}  {r[0]:15s} {r[1]}: ratio {r[3]:.3e}{tag}")
    print(f"{len(rows) - len(failed)}/{len(rows)} checks passed; outputs in {out_dir}")
    return 1 if failed else 0


def cmd_list(args) -> int:
    for name, (_, desc) in SUITES.items():
        crit = ",".join(str(c) for c in CRITERIA[name])
        print(f"{name:15s} [criteria {crit}] {desc}")
    return 0


def cmd_export(args) -> int:
    man = load_manifest(args.manifest, overrides={"seed": args.seed})
    spec = build_spec(man)
    if args.operator == "free":
        op = assemble_free(spec)
    else:
        op = assemble_interacting(spec)
        if spec.coupling is not None and spec.coupling.node_F is not None and spec.spin >= 2:
            op = add_zeeman(op, spec)
    out = Path(args.out) if args.out else man.resolve(man.data["output"]) / f"{op.label.replace('+', '_')}.mtx"
    out.parent.mkdir(parents=True, exist_ok=True)
    export_matrix_market(out, op, comment=f"manifest_sha256={man.sha256} seed={man.seed} operator={args.operator}")
    print(f"wrote {out} ({op.shape[0]}x{op.shape[1]}, {op.matrix.nnz} nonzeros)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pflab",
                                     description="Lattice Pauli-Fierz Hamiltonians and their verification checks")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run check suites from a manifest")
    run.add_argument("manifest")
    run.add_argument("--suite", default=None, help="override the manifest suite")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", default=None, help="output directory")
    run.set_defaults(func=cmd_run)
    ls = sub.add_parser("list-suites", help="print the suite catalog")
    ls.set_defaults(func=cmd_list)
    ex = sub.add_parser("export-operator", help="write the assembled operator")
    ex.add_argument("manifest")
    ex.add_argument("--format", choices=["matrix-market"], default="matrix-market")
    ex.add_argument("--operator", choices=["interacting", "free"], default="interacting")
    ex.add_argument("--seed", type=int, default=None)
    ex.add_argument("--out", default=None, help="output .mtx path")
    ex.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ManifestError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except KeyError as exc:
        print(exc.args[0], file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
