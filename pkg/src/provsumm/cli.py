"""Command-line entry point: ``python3 -m provsumm``."""
from __future__ import annotations

import argparse
import json
import sys

from .pipeline import FORMATS, MODES, RunConfig, report_to_json, report_to_text, run_summarize


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="provsumm",
        description="Summarize why or why-not provenance of a Datalog query with top-k patterns.",
    )
    p.add_argument("--rules", required=True, help="Datalog program file")
    p.add_argument("--data", required=True, help="directory holding <relation>.csv files")
    p.add_argument("--schema", required=True, help="schema file: relation(col:type, ...) per line")
    p.add_argument("--question", required=True, help="e.g. \"WHYNOT Q(X,4)\"")
    p.add_argument("--k", type=int, default=3, help="maximum number of patterns (default 3)")
    p.add_argument("--sample-size", type=int, default=100, help="target sample size |S| (default 100)")
    p.add_argument("--success-prob", type=float, default=0.999,
                   help="probability that the batch yields |S| derivations (default 0.999)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--mode", choices=MODES, default="sample",
                   help="sample: sampling pipeline; full: exact enumeration (small inputs)")
    p.add_argument("--format", dest="output_format", choices=FORMATS, default="json")
    p.add_argument("--output", help="write the report here instead of stdout")
    p.add_argument("--emit-sql", help="also write the SQL pipeline text to this path")
    p.add_argument("--domains", help="domain override file")
    p.add_argument("--universal-domain", action="store_true",
                   help="use one domain per type across all attributes")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(
            rules_path=args.rules, data_dir=args.data, schema_path=args.schema,
            question_text=args.question, k=args.k, sample_size=args.sample_size,
            success_prob=args.success_prob, seed=args.seed, mode=args.mode,
            output_format=args.output_format, domain_overrides_path=args.domains,
            universal_domain=args.universal_domain, emit_sql=args.emit_sql,
        )
        report = run_summarize(cfg)
    except (ValueError, OSError) as e:
        code = getattr(e, "code", "io_error" if isinstance(e, OSError) else "invalid_input")
        json.dump({"error": {"code": code, "message": str(e)}}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    text = report_to_json(report) if cfg.output_format == "json" else report_to_text(report)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
