"""Batch command-line front end.

Five subcommands: ``score``, ``permtest``, ``stop-sim``, ``rerank`` and
``report``. Inputs are never mutated; every command writes its outputs
into a deterministic run directory derived from its parameters (or into
``--out``). With ``--offline`` and a fixed ``--seed``, output bytes are
identical across executions.

Exit codes: 0 success, 1 validation problem, 2 I/O problem, 3 remote
endpoint failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import os
import sys
from pathlib import Path

from . import drift
from .cache import ResponseCache
from .clients import (
    CachingGenerator,
    EchoGenerator,
    HttpGenerator,
    HttpSimilarityBackend,
    TokenOverlapBackend,
)
from .consistency import ConsistencyProfile, profile_from_record
from .corpus import AnnotatedParagraph, GenerationTrace, ingest_corpus, write_corpus
from .errors import (
    ConfigurationError,
    EndpointError,
    SemdriftError,
    ValidationError,
)
from .rerank import RerankConfig, rerank_generate
from .reporting import (
    RunReport,
    SessionLog,
    build_run_report,
    fact_pr_breakdown,
    flops_estimate,
    fmt,
    load_cost_model,
    report_from_record,
    report_to_record,
    tradeoff_scatter_svg,
    tradeoff_table,
)
from .stopping import StopPolicy, apply_policy, truncate_paragraph

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_ENDPOINT = 3


@dataclasses.dataclass
class RunConfig:
    """Every tunable the commands accept; config-file keys match fields.

    Defaults: sampling temperature 0.6 with top-p 0.9, 500-token budget,
    3 consistency samples, truncation m=0, 1000 shuffles.
    """

    corpus: str | None = None
    traces: str | None = None
    profiles: str | None = None
    topics: str | None = None
    generator_url: str | None = None
    similarity_url: str | None = None
    qa_url: str | None = None
    temperature: float = 0.6
    top_p: float = 0.9
    max_tokens: int = 500
    m: int = 0
    n_samples: int = 3
    seed: int = 0
    n_shuffles: int = 1000
    options_per_sentence: int = 5
    policy: str | None = None
    k: int | None = None
    threshold: float | None = None
    absolute: float | None = None
    first_sentence_mode: str = "keep"
    filter_degenerate: bool = False
    sweep: str | None = None
    svg: bool = False
    offline: bool = False
    cache: str | None = None
    cost_model: str | None = None
    out: str | None = None


CONFIG_KEYS = [f.name for f in dataclasses.fields(RunConfig)]


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    config = RunConfig()
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        unknown = set(loaded) - set(CONFIG_KEYS)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        for key, value in loaded.items():
            setattr(config, key, value)
    for key in CONFIG_KEYS:
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None and value is not False:
            setattr(config, key, value)
    env_urls = {
        "generator_url": "SEMDRIFT_GENERATOR_URL",
        "similarity_url": "SEMDRIFT_SIMILARITY_URL",
        "qa_url": "SEMDRIFT_QA_URL",
    }
    for key, env in env_urls.items():
        if getattr(config, key) is None and os.environ.get(env):
            setattr(config, key, os.environ[env])
    return config


def _out_dir(config: RunConfig, command: str) -> Path:
    if config.out:
        path = Path(config.out)
    else:
        path = Path("runs") / f"{command}-m{config.m}-seed{config.seed}"
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows([[fmt(c) for c in row] for row in rows])
    return buf.getvalue()


def _json_text(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _load_paragraphs(config: RunConfig) -> list[AnnotatedParagraph]:
    if not config.corpus:
        raise ConfigurationError("a corpus file is required (--corpus)")
    result = ingest_corpus(config.corpus, "annotated-jsonl")
    for issue in result.issues:
        print(
            f"corpus line {issue.line_no}: {issue.message}"
            + (f" (field: {issue.field})" if issue.field else ""),
            file=sys.stderr,
        )
    if result.issues:
        raise ValidationError(f"{len(result.issues)} invalid corpus lines")
    return result.records


def histogram_svg(counts, bin_width: float, width: int = 640, height: int = 360) -> str:
    """Deterministic SVG bar chart for fixed-width histogram counts."""
    peak = max(counts) if counts and max(counts) else 1
    margin = 40
    bar_w = (width - 2 * margin) / len(counts)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for i, c in enumerate(counts):
        h = (c / peak) * (height - 2 * margin)
        x = margin + i * bar_w
        y = height - margin - h
        parts.append(
            f'<rect x="{x:.1f}" y="{y:.1f}" width="{bar_w - 1:.1f}" height="{h:.1f}" '
            f'fill="steelblue"/>'
        )
        parts.append(
            f'<text x="{x:.1f}" y="{height - margin + 12}" font-size="8">'
            f"{i * bin_width:.2f}</text>"
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_score(config: RunConfig) -> int:
    paragraphs = _load_paragraphs(config)
    out = _out_dir(config, "score")
    filtered_correct = filtered_incorrect = 0
    if config.filter_degenerate:
        result = drift.filter_degenerate(paragraphs)
        paragraphs = list(result.kept)
        filtered_correct = result.n_all_correct
        filtered_incorrect = result.n_all_incorrect
    report = drift.drift_distribution_report(paragraphs, m=config.m)
    _write(
        out / "scores.csv",
        _csv_text(
            ["topic", "n_facts", "sd_score", "drift_point", "relative_position", "popularity_class"],
            [
                [r.topic, r.n_facts, r.score, r.drift_point, r.relative_position, r.popularity_class]
                for r in report.rows
            ],
        ),
    )
    _write(
        out / "score_histogram.csv",
        _csv_text(
            ["bin_start", "bin_end", "count"],
            [
                [i * drift.SCORE_BIN_WIDTH, (i + 1) * drift.SCORE_BIN_WIDTH, c]
                for i, c in enumerate(report.score_hist)
            ],
        ),
    )
    _write(
        out / "relpos_histogram.csv",
        _csv_text(
            ["bin_start", "bin_end", "count"],
            [
                [i * drift.POSITION_BIN_WIDTH, (i + 1) * drift.POSITION_BIN_WIDTH, c]
                for i, c in enumerate(report.rel_position_hist)
            ],
        ),
    )
    _write(
        out / "class_density.csv",
        _csv_text(
            ["popularity_class", "bin_start", "bin_end", "density"],
            [
                [cls, i * drift.SCORE_BIN_WIDTH, (i + 1) * drift.SCORE_BIN_WIDTH, d]
                for cls, hist in report.class_densities
                for i, d in enumerate(hist)
            ],
        ),
    )
    summary = {
        "command": "score",
        "m": config.m,
        "n_paragraphs": len(report.rows),
        "mean_score": report.mean_score,
        "first_decile_fraction": report.first_decile_fraction,
        "filtered_all_correct": filtered_correct,
        "filtered_all_incorrect": filtered_incorrect,
    }
    _write(out / "summary.json", _json_text(summary))
    if config.sweep:
        m_values = [int(v) for v in str(config.sweep).split(",") if v != ""]
        rows = drift.truncation_sweep([p.labels() for p in paragraphs], m_values)
        _write(
            out / "sweep.csv",
            _csv_text(
                [
                    "m",
                    "n_sequences",
                    "n_with_drift_point",
                    "mean_score",
                    "frac_above_0.75",
                    "mean_drift_point",
                    "mean_relative_position",
                    "score_hist",
                    "relpos_hist",
                ],
                [
                    [
                        r.m,
                        r.n_sequences,
                        r.n_with_drift_point,
                        r.mean_score,
                        r.frac_above_threshold,
                        r.mean_drift_point,
                        r.mean_relative_position,
                        ";".join(str(c) for c in r.score_hist),
                        ";".join(str(c) for c in r.rel_position_hist),
                    ]
                    for r in rows
                ],
            ),
        )
    if config.svg:
        _write(out / "score_histogram.svg", histogram_svg(report.score_hist, drift.SCORE_BIN_WIDTH))
    print(f"score: {len(report.rows)} paragraphs -> {out}")
    return EXIT_OK


def cmd_permtest(config: RunConfig) -> int:
    paragraphs = _load_paragraphs(config)
    out = _out_dir(config, "permtest")
    threshold = 0.05
    rows = []
    below = 0
    for p in paragraphs:
        r = drift.permutation_pvalue(
            p.labels(), m=config.m, n_shuffles=config.n_shuffles, seed=config.seed
        )
        rows.append(
            [p.topic, p.n_facts, r.observed_score, r.p_value, r.raw_proportion,
             r.randomized_p_value]
        )
        if r.p_value < threshold:
            below += 1
    _write(
        out / "permtest.csv",
        _csv_text(
            ["topic", "n_facts", "observed_score", "p_value", "raw_proportion",
             "randomized_p_value"],
            rows,
        ),
    )
    summary = {
        "command": "permtest",
        "m": config.m,
        "n_shuffles": config.n_shuffles,
        "seed": config.seed,
        "threshold": threshold,
        "n_paragraphs": len(paragraphs),
        "frac_below_threshold": below / len(paragraphs) if paragraphs else None,
    }
    _write(out / "permtest_summary.json", _json_text(summary))
    print(f"permtest: {len(paragraphs)} paragraphs -> {out}")
    return EXIT_OK


def _build_policy(config: RunConfig) -> StopPolicy:
    if config.policy in (None, ""):
        raise ConfigurationError("--policy is required for stop-sim")
    if config.policy == "oracle":
        return StopPolicy.oracle(m=config.m)
    if config.policy == "eos":
        if config.k is None:
            raise ConfigurationError("--k is required for the eos policy")
        return StopPolicy.eos_top_k(config.k)
    if config.policy == "sc-relative":
        if config.threshold is None:
            raise ConfigurationError("--threshold is required for sc-relative")
        return StopPolicy.relative_increase(config.threshold)
    if config.policy == "sc-absolute":
        if config.absolute is None:
            raise ConfigurationError("--absolute is required for sc-absolute")
        return StopPolicy.absolute_threshold(config.absolute, config.first_sentence_mode)
    raise ConfigurationError(f"unknown policy {config.policy!r}")


def _load_traces(config: RunConfig, n: int) -> list[GenerationTrace]:
    if not config.traces:
        raise ConfigurationError("--traces is required for the eos policy")
    result = ingest_corpus(config.traces, "trace-jsonl")
    if result.issues:
        for issue in result.issues:
            print(f"traces line {issue.line_no}: {issue.message}", file=sys.stderr)
        raise ValidationError(f"{len(result.issues)} invalid trace lines")
    if len(result.records) != n:
        raise ValidationError(
            f"trace count {len(result.records)} does not match corpus size {n}; "
            "traces pair with paragraphs by line order"
        )
    return result.records


def _load_profiles(config: RunConfig, paragraphs) -> list[ConsistencyProfile]:
    if not config.profiles:
        raise ConfigurationError("--profiles is required for consistency policies")
    profiles = {}
    with open(config.profiles, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                profile = profile_from_record(json.loads(line))
                profiles[profile.passage_id] = profile
    out = []
    for p in paragraphs:
        if p.topic not in profiles:
            raise ValidationError(f"no profile for topic {p.topic!r}")
        out.append(profiles[p.topic])
    return out


def cmd_stop_sim(config: RunConfig) -> int:
    paragraphs = _load_paragraphs(config)
    policy = _build_policy(config)
    out = _out_dir(config, "stop-sim")
    traces = _load_traces(config, len(paragraphs)) if policy.kind == "eos-top-k" else None
    profiles = (
        _load_profiles(config, paragraphs)
        if policy.kind in ("sc-relative-increase", "sc-absolute")
        else None
    )
    session = SessionLog()
    truncated = []
    for i, p in enumerate(paragraphs):
        decision = apply_policy(
            policy,
            paragraph=p,
            trace=traces[i] if traces else None,
            profile=profiles[i] if profiles else None,
        )
        if decision.stop_sentence_index is not None:
            stop = min(decision.stop_sentence_index, len(p.sentences))
            decision = dataclasses.replace(decision, stop_sentence_index=stop)
        truncated.append(truncate_paragraph(p, decision, strategy=policy.label()))
        if traces:
            kept = (
                decision.stop_token_offset
                if decision.stop_token_offset is not None
                else len(traces[i].tokens)
            )
            session.add_generator_pass(kept)
    report = build_run_report(
        policy.label(),
        truncated,
        baseline=paragraphs,
        m=config.m,
        session=session,
        cost_model=load_cost_model(config.cost_model),
    )
    pr = fact_pr_breakdown(truncated, paragraphs)
    write_corpus(truncated, out / "truncated.jsonl")
    _write(out / "report.json", _json_text(report_to_record(report)))
    _write(
        out / "pr_breakdown.csv",
        _csv_text(
            [
                "strategy",
                "incorrect_precision",
                "incorrect_recall",
                "correct_precision",
                "correct_recall",
            ],
            [
                [
                    policy.label(),
                    pr.incorrect_precision,
                    pr.incorrect_recall,
                    pr.correct_precision,
                    pr.correct_recall,
                ]
            ],
        ),
    )
    print(
        f"stop-sim[{policy.label()}]: facts/gen "
        f"{report.facts_per_gen:.2f}, precision {fmt(report.factscore_star)} -> {out}"
    )
    return EXIT_OK


def _generator_from_config(config: RunConfig):
    cache = ResponseCache(Path(config.cache), readonly=config.offline) if config.cache else None
    if config.offline:
        if cache is None:
            raise ConfigurationError("--offline requires --cache")
        return CachingGenerator(cache, inner=None)
    inner = HttpGenerator(config.generator_url) if config.generator_url else EchoGenerator()
    # An empty ResponseCache is falsy (it has __len__), so test identity.
    return CachingGenerator(cache, inner=inner) if cache is not None else inner


def _backend_from_config(config: RunConfig):
    if config.similarity_url and not config.offline:
        return HttpSimilarityBackend(config.similarity_url)
    return TokenOverlapBackend()


def cmd_rerank(config: RunConfig) -> int:
    if not config.topics:
        raise ConfigurationError("a topics file is required (--topics)")
    with open(config.topics, "r", encoding="utf-8") as fh:
        topics = [line.strip() for line in fh if line.strip()]
    out = _out_dir(config, "rerank")
    generator = _generator_from_config(config)
    backend = _backend_from_config(config)
    rerank_config = RerankConfig(
        options_per_sentence=config.options_per_sentence,
        n_reference_samples=config.n_samples,
        max_tokens=config.max_tokens,
        temperature=config.temperature,
        top_p=config.top_p,
        seed=config.seed,
    )
    session = SessionLog()
    records = []
    failures = 0
    for topic in topics:
        result = rerank_generate(topic, generator, backend, rerank_config)
        session = session.merge(result.session)
        if result.error is not None:
            failures += 1
            print(f"rerank[{topic}]: {result.error}", file=sys.stderr)
        records.append(
            {
                "topic": topic,
                "passage": result.passage,
                "sentences": list(result.sentences),
                "scores": [c.score for c in result.choices],
                "seeds": [c.seed for c in result.choices],
                "terminated": result.terminated,
                "error": result.error,
            }
        )
    with open(out / "passages.jsonl", "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    flops = flops_estimate(session, load_cost_model(config.cost_model))
    _write(
        out / "session.json",
        _json_text(
            {
                "command": "rerank",
                "topics": len(topics),
                "generator_passes": len(session.generator_pass_tokens),
                "generated_tokens": sum(session.generator_pass_tokens),
                "scorer_pairs": session.scorer_pairs,
                "flops_internal": flops.internal,
                "flops_external": flops.external,
            }
        ),
    )
    print(f"rerank: {len(topics)} topics ({failures} failed) -> {out}")
    return EXIT_ENDPOINT if failures else EXIT_OK


def cmd_report(config: RunConfig, inputs: list[str]) -> int:
    if not inputs:
        raise ConfigurationError("at least one report.json input is required")
    reports: list[RunReport] = []
    for path in inputs:
        with open(path, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        records = loaded if isinstance(loaded, list) else [loaded]
        reports.extend(report_from_record(r) for r in records)
    out = _out_dir(config, "report")
    _write(out / "tradeoff.csv", tradeoff_table(reports))
    if config.svg:
        _write(out / "tradeoff.svg", tradeoff_scatter_svg(reports))
    print(f"report: {len(reports)} strategies -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--seed", type=int, help="master random seed")
    parser.add_argument("--m", type=int, help="min facts required on each side of a split")
    parser.add_argument("--out", help="output directory (default: runs/<command>-...)")
    parser.add_argument("--offline", action="store_true", help="cache-only mode, no network")
    parser.add_argument("--svg", action="store_true", help="also emit SVG plots")


def build_parser() -> argparse.ArgumentParser:
    epilog = "config keys: " + ", ".join(CONFIG_KEYS)
    parser = argparse.ArgumentParser(
        prog="semdrift",
        description="Measure semantic drift in fact-labeled generations and "
        "simulate mitigation strategies.",
        epilog=epilog,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="drift scores and distribution reports", epilog=epilog)
    p.add_argument("--corpus", help="annotated-jsonl corpus path")
    p.add_argument("--filter-degenerate", action="store_true", dest="filter_degenerate",
                   help="drop all-correct/all-incorrect paragraphs first")
    p.add_argument("--sweep", help="comma-separated m values for a truncation sweep")
    _add_common(p)

    p = sub.add_parser("permtest", help="per-paragraph shuffle significance", epilog=epilog)
    p.add_argument("--corpus", help="annotated-jsonl corpus path")
    p.add_argument("--n-shuffles", type=int, dest="n_shuffles", help="shuffles per paragraph")
    _add_common(p)

    p = sub.add_parser("stop-sim", help="apply a stop policy offline", epilog=epilog)
    p.add_argument("--corpus", help="annotated-jsonl corpus path (also the baseline)")
    p.add_argument("--policy", choices=["oracle", "eos", "sc-relative", "sc-absolute"])
    p.add_argument("--k", type=int, help="top-k for the eos policy")
    p.add_argument("--threshold", type=float, help="relative-increase threshold")
    p.add_argument("--absolute", type=float, help="absolute score threshold")
    p.add_argument("--first-sentence-mode", choices=["keep", "delete"],
                   dest="first_sentence_mode", help="handling when the opener exceeds the bar")
    p.add_argument("--traces", help="trace-jsonl path, line-aligned with the corpus")
    p.add_argument("--profiles", help="profiles jsonl keyed by topic")
    p.add_argument("--cost-model", dest="cost_model", help="cost model JSON path")
    _add_common(p)

    p = sub.add_parser("rerank", help="resample-then-rerank generation", epilog=epilog)
    p.add_argument("--topics", help="file with one topic per line")
    p.add_argument("--generator-url", dest="generator_url", help="completion endpoint")
    p.add_argument("--similarity-url", dest="similarity_url", help="similarity endpoint")
    p.add_argument("--cache", help="response cache path")
    p.add_argument("--options-per-sentence", type=int, dest="options_per_sentence")
    p.add_argument("--n-samples", type=int, dest="n_samples", help="reference sample count")
    p.add_argument("--max-tokens", type=int, dest="max_tokens")
    p.add_argument("--temperature", type=float)
    p.add_argument("--top-p", type=float, dest="top_p")
    p.add_argument("--cost-model", dest="cost_model", help="cost model JSON path")
    _add_common(p)

    p = sub.add_parser("report", help="merge run reports into the trade-off table", epilog=epilog)
    p.add_argument("inputs", nargs="*", help="report.json files")
    _add_common(p)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _config_from_args(args)
        if args.command == "score":
            return cmd_score(config)
        if args.command == "permtest":
            return cmd_permtest(config)
        if args.command == "stop-sim":
            return cmd_stop_sim(config)
        if args.command == "rerank":
            return cmd_rerank(config)
        if args.command == "report":
            return cmd_report(config, args.inputs)
        parser.error(f"unknown command {args.command!r}")
    except EndpointError as e:
        print(f"endpoint error: {e}", file=sys.stderr)
        return EXIT_ENDPOINT
    except (ValidationError, ConfigurationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO
    except SemdriftError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
