"""End-to-end summarization: load inputs, sample, generate, score, report."""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .datalog import ProvenanceQuestion, Query, QuestionType, UnifiedRule, Var, format_constant, \
    parse_program, parse_question, unify_query
from .oracle import SUBSET_CAP, enumerate_provenance, exact_topk
from .patterns import PatternCandidate, estimate_completeness, generate_candidates
from .relstore import Database, DomainOverrides, load_csv, parse_domain_overrides
from .sampler import EmptyProvenanceError, RuleSampleStats, SampleConfig, SampleSet, SamplingPlan
from .sqlgen import emit_sql
from .topk import SummaryResult, best_first_topk

MODES = ("sample", "full")
FORMATS = ("json", "text")


class ConfigError(ValueError):
    code = "bad_config"


@dataclass
class RunConfig:
    rules_path: str
    data_dir: str
    schema_path: str
    question_text: str
    k: int = 3
    sample_size: int = 100
    success_prob: float = 0.999
    seed: int = 0
    mode: str = "sample"
    output_format: str = "json"
    domain_overrides_path: str | None = None
    universal_domain: bool = False
    emit_sql: str | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be at least 1")
        if self.sample_size < 1:
            raise ConfigError("sample size must be at least 1")
        if not 0.0 < self.success_prob < 1.0:
            raise ConfigError("success probability must lie strictly between 0 and 1")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}")
        if self.output_format not in FORMATS:
            raise ConfigError(f"output format must be one of {', '.join(FORMATS)}")


@dataclass
class Inputs:
    query: Query
    db: Database
    question: ProvenanceQuestion
    overrides: DomainOverrides


def load_inputs(cfg: RunConfig) -> Inputs:
    query = parse_program(Path(cfg.rules_path).read_text(encoding="utf-8"))
    db = load_csv(cfg.data_dir, Path(cfg.schema_path).read_text(encoding="utf-8"))
    db.check_query(query)
    if cfg.domain_overrides_path:
        overrides = parse_domain_overrides(Path(cfg.domain_overrides_path).read_text(encoding="utf-8"))
    else:
        overrides = DomainOverrides()
    overrides.universal = overrides.universal or cfg.universal_domain
    return Inputs(query, db, parse_question(cfg.question_text), overrides)


@dataclass
class Summary:
    """Everything a run produced, before rendering."""

    inputs: Inputs
    rules: list[UnifiedRule]
    sample: SampleSet
    candidates: list[PatternCandidate]
    result: SummaryResult
    total_space: int
    timing: dict[str, float] = field(default_factory=dict)
    n_os: dict[str, int] = field(default_factory=dict)


def summarize(inputs: Inputs, k: int = 3, sample_size: int = 100, success_prob: float = 0.999,
              seed: int = 0, mode: str = "sample") -> Summary:
    timing: dict[str, float] = {}
    t0 = time.perf_counter()
    pt = inputs.question.ptuple
    n_os: dict[str, int] = {}
    if mode == "full":
        full = enumerate_provenance(inputs.query, inputs.db, inputs.question, inputs.overrides)
        rules = [r for r in unify_query(inputs.query, pt) if r.rule_id in full.per_rule_space]
        sample = full.as_sample(rules)
        if not sample.derivations():
            raise EmptyProvenanceError("question has empty provenance of requested type")
        for r in rules:
            space = full.per_rule_space[r.rule_id]
            found = len(sample.per_rule.get(r.rule_id, ()))
            sample.stats.append(RuleSampleStats(r.rule_id, space, 0, found / space if space else 0.0,
                                                1.0, found, survivors=found))
        if full.total_space and inputs.question.qtype is QuestionType.WHYNOT:
            sample.p_prov_estimate = sample.achieved_size / full.total_space
        total_space = full.total_space
    else:
        cfg = SampleConfig(sample_size, success_prob, seed)
        plan = SamplingPlan(inputs.query, inputs.db, inputs.question, cfg, inputs.overrides)
        sample = plan.run(seed)
        rules = sample.rules
        total_space = sum(st.total_space for st in sample.stats)
        n_os = {st.rule_id: st.oversample_size for st in sample.stats if st.oversample_size}
    timing["sample"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    patterns = generate_candidates(sample)
    timing["candidates"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    candidates = estimate_completeness(patterns, sample, pt)
    timing["completeness"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    positive = sum(1 for c in candidates if c.match_count > 0)
    subsets = sum(math.comb(positive, j) for j in range(1, min(k, positive) + 1))
    if mode == "full" and subsets <= SUBSET_CAP:
        result = exact_topk(candidates, k)
    else:
        result = best_first_topk(candidates, k)
    timing["topk"] = time.perf_counter() - t0
    return Summary(inputs, rules, sample, candidates, result, total_space, timing, n_os)


# --------------------------------------------------------------------------
# report


def pattern_record(c: PatternCandidate, rule: UnifiedRule, query: Query) -> dict[str, Any]:
    p = c.pattern
    variables = list(rule.variable_order)
    head_vals = dict(zip(variables, p.args))
    head = []
    for a in rule.base.head.args:
        if isinstance(a, Var):
            v = head_vals[a]
            head.append(a.name if v is None else format_constant(v))
        else:
            head.append(format_constant(a))
    return {
        "rule": p.rule_id,
        "pattern": p.format(variables),
        "head": f"{query.head_predicate}({','.join(head)})",
        "variables": [v.name for v in variables],
        "args": list(p.args),
        "goals": list(p.goal_annotations),
        "match_count": c.match_count,
        "cp": c.cp,
        "info": c.info,
    }


def build_report(s: Summary, cfg: RunConfig | None = None, mode: str = "sample",
                 seed: int = 0, k: int = 3, sample_size: int = 0,
                 success_prob: float = 0.999) -> dict[str, Any]:
    if cfg is not None:
        mode, seed, k, sample_size, success_prob = cfg.mode, cfg.seed, cfg.k, cfg.sample_size, cfg.success_prob
    rules = {r.rule_id: r for r in s.rules}
    sample = s.sample
    stats = {st.rule_id: st for st in sample.stats}
    rule_records = []
    for r in s.rules:
        st = stats.get(r.rule_id)
        rule_records.append({
            "id": r.rule_id,
            "rule": str(r.base),
            "unified": str(r),
            "sampled": len(sample.per_rule.get(r.rule_id, ())),
            "total_space": st.total_space if st else None,
            "p_prov": st.p_prov if st else None,
            "oversample_size": st.oversample_size if st else 0,
            "drawn": st.drawn if st else 0,
            "attempts": st.attempts if st else 0,
        })
    res = s.result
    report = {
        "question": str(s.inputs.question),
        "mode": mode,
        "k": k,
        "seed": seed,
        "sample_size_requested": sample_size,
        "success_prob": success_prob,
        "achieved_sample_size": sample.achieved_size,
        "shortfall": sample.shortfall,
        "oversample_size_used": sample.oversample_size_used,
        "p_prov_estimate": sample.p_prov_estimate,
        "total_space": s.total_space,
        "rules": rule_records,
        "candidate_count": len(s.candidates),
        "summary": {
            "score_lb": res.score_lb,
            "score_ub": res.score_ub,
            "cp_lb": res.cp_lb,
            "cp_ub": res.cp_ub,
            "info": res.info,
            "exact": res.exact,
            "method": res.method,
            "nodes": res.nodes,
        },
        "patterns": [pattern_record(c, rules[c.pattern.rule_id], s.inputs.query)
                     for c in res.patterns],
        "timing": {k_: round(v, 6) for k_, v in s.timing.items()},
    }
    return report


def report_to_json(report: dict[str, Any]) -> str:
    return json.dumps(report, indent=2, ensure_ascii=False) + "\n"


def strip_timing(report: dict[str, Any]) -> dict[str, Any]:
    return {k: v for k, v in report.items() if k != "timing"}


def report_to_text(report: dict[str, Any]) -> str:
    lines = [
        f"{report['question']}  (mode {report['mode']}, k={report['k']}, seed {report['seed']})",
        f"derivation space: {report['total_space']}",
        f"sample: {report['achieved_sample_size']} derivations"
        + (" (shortfall)" if report["shortfall"] else "")
        + (f", p_prov {report['p_prov_estimate']:.4g}" if report["p_prov_estimate"] is not None else "")
        + (f", N_os {report['oversample_size_used']}" if report["oversample_size_used"] else ""),
        f"candidates: {report['candidate_count']}",
    ]
    sm = report["summary"]
    lines.append(f"score: [{sm['score_lb']:.4f}, {sm['score_ub']:.4f}]  "
                 f"cp: [{sm['cp_lb']:.4f}, {sm['cp_ub']:.4f}]  info: {sm['info']:.4f}  "
                 f"{'exact' if sm['exact'] else 'heuristic'} ({sm['method']})")
    for i, p in enumerate(report["patterns"], 1):
        lines.append(f"  {i}. {p['pattern']}  head {p['head']}  cp {p['cp']:.4f}  info {p['info']:.4f}")
    return "\n".join(lines) + "\n"


def run_summarize(cfg: RunConfig) -> dict[str, Any]:
    """Run a configured summarization and return the report dictionary.

    When ``cfg.emit_sql`` is set the SQL script is written there too.
    """
    t0 = time.perf_counter()
    inputs = load_inputs(cfg)
    load_time = time.perf_counter() - t0
    s = summarize(inputs, cfg.k, cfg.sample_size, cfg.success_prob, cfg.seed, cfg.mode)
    s.timing = {"load": load_time, **s.timing}
    if cfg.emit_sql:
        sizes = {r: st.quota for r, st in ((st.rule_id, st) for st in s.sample.stats)} \
            if cfg.mode == "sample" else cfg.sample_size
        text = emit_sql(inputs.query, inputs.db, inputs.question, s.n_os or None, sizes,
                        inputs.overrides)
        Path(cfg.emit_sql).write_text(text, encoding="utf-8")
    return build_report(s, cfg)
