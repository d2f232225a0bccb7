"""Command-line interface.

Subcommands: ingest, ask, run, eval, report.  Settings come from an optional
JSON config file (``--config``, default ``./docqa.json`` when present),
overridable by flags; credentials and endpoint only ever come from the
environment.  ``--replay``/``--capture`` switch any LLM-using subcommand
between a scripted backend and live recording.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .agent import AgentConfig, episode_to_dict, run_agent
from .corpus import corpus_metadata, load_corpus
from .harness import (
    Backends,
    RunnerConfig,
    compare_runs,
    evaluate_run,
    load_artifact,
    load_dataset,
    load_scores,
    render_report_markdown,
    run_dataset,
    save_artifact,
    save_report,
    save_scores,
)
from .llm import (
    CaptureBackend,
    ChatBackend,
    HttpChatBackend,
    HttpConfig,
    ScriptedBackend,
    load_script,
)
from .rag import (
    LocalHashEmbedder,
    RagConfig,
    build_index,
    chunk_document,
    rag_answer,
    retrieve,
)

DEFAULT_CONFIG_PATH = "docqa.json"

CONFIG_KEYS = (
    "corpus",
    "t_max",
    "max_parse_retries",
    "max_matches",
    "k",
    "chunk_tokens",
    "overlap_fraction",
    "embed_dim",
    "temperature",
    "max_tokens",
    "sample",
    "seed",
    "workers",
)


class CliError(Exception):
    pass


def load_config_file(path: str | None) -> dict:
    candidate = Path(path) if path else Path(DEFAULT_CONFIG_PATH)
    if not candidate.exists():
        if path:
            raise CliError(f"config file {candidate} does not exist")
        return {}
    try:
        config = json.loads(candidate.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise CliError(f"config file {candidate} is not valid JSON: {exc}") from exc
    unknown = set(config) - set(CONFIG_KEYS)
    if unknown:
        raise CliError(f"unknown config keys: {sorted(unknown)}")
    return config


def _setting(args: argparse.Namespace, config: dict, key: str, default):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    return config.get(key, default)


def make_chat_backend(args: argparse.Namespace) -> ChatBackend:
    if getattr(args, "replay", None):
        return ScriptedBackend(load_script(args.replay))
    backend = HttpChatBackend(HttpConfig.from_env())
    if getattr(args, "capture", None):
        return CaptureBackend(backend, args.capture)
    return backend


def _agent_config(args: argparse.Namespace, config: dict) -> AgentConfig:
    return AgentConfig(
        t_max=int(_setting(args, config, "t_max", AgentConfig.t_max)),
        max_parse_retries=int(
            _setting(args, config, "max_parse_retries", AgentConfig.max_parse_retries)
        ),
        max_matches=int(_setting(args, config, "max_matches", AgentConfig.max_matches)),
        temperature=float(_setting(args, config, "temperature", AgentConfig.temperature)),
        max_tokens=int(_setting(args, config, "max_tokens", AgentConfig.max_tokens)),
    )


def _rag_config(args: argparse.Namespace, config: dict) -> RagConfig:
    return RagConfig(
        chunk_tokens=int(_setting(args, config, "chunk_tokens", RagConfig.chunk_tokens)),
        overlap_fraction=float(
            _setting(args, config, "overlap_fraction", RagConfig.overlap_fraction)
        ),
        embed_dim=int(_setting(args, config, "embed_dim", RagConfig.embed_dim)),
        top_k=int(_setting(args, config, "k", RagConfig.top_k)),
        temperature=float(_setting(args, config, "temperature", RagConfig.temperature)),
        max_tokens=int(_setting(args, config, "max_tokens", RagConfig.max_tokens)),
    )


def _require_corpus(args: argparse.Namespace, config: dict) -> str:
    corpus = _setting(args, config, "corpus", None)
    if not corpus:
        raise CliError("no corpus directory given (flag --corpus or config key 'corpus')")
    return corpus


def cmd_ingest(args: argparse.Namespace, config: dict) -> int:
    collection = load_corpus(args.directory)
    print(corpus_metadata(collection).rendered)
    print(f"\n{len(collection)} document(s) loaded from {args.directory}")
    return 0


def cmd_ask(args: argparse.Namespace, config: dict) -> int:
    collection = load_corpus(_require_corpus(args, config))
    backend = make_chat_backend(args)
    if args.mode == "agent":
        episode = run_agent(args.question, collection, backend, _agent_config(args, config))
        print(json.dumps(episode_to_dict(episode), indent=2, sort_keys=True))
    else:
        rag_config = _rag_config(args, config)
        embedder = LocalHashEmbedder(rag_config.embed_dim)
        chunks = []
        for doc in collection.documents:
            chunks.extend(
                chunk_document(doc, rag_config.chunk_tokens, rag_config.overlap_fraction)
            )
        index = build_index(chunks, embedder)
        retrieved = retrieve(index, args.question, embedder, k=rag_config.top_k)
        record = rag_answer(
            args.question,
            retrieved,
            backend,
            temperature=rag_config.temperature,
            max_tokens=rag_config.max_tokens,
        )
        print(
            json.dumps(
                {"answer": record.answer, "contexts": list(record.contexts)},
                indent=2,
                sort_keys=True,
            )
        )
    return 0


def cmd_run(args: argparse.Namespace, config: dict) -> int:
    dataset = load_dataset(args.dataset)
    collection = load_corpus(_require_corpus(args, config))
    backend = make_chat_backend(args)
    runner = RunnerConfig(
        sample_size=_setting(args, config, "sample", None),
        seed=int(_setting(args, config, "seed", 0)),
        workers=int(_setting(args, config, "workers", 1)),
        agent=_agent_config(args, config),
        rag=_rag_config(args, config),
    )
    embedder = LocalHashEmbedder(runner.rag.embed_dim)
    artifact = run_dataset(
        dataset, args.mode, runner, collection, Backends(llm=backend, embedder=embedder)
    )
    save_artifact(artifact, args.out)
    failures = sum(1 for e in artifact.entries if e.error)
    print(f"ran {len(artifact.entries)} question(s), {failures} failure(s) -> {args.out}")
    return 0


def cmd_eval(args: argparse.Namespace, config: dict) -> int:
    artifact = load_artifact(args.artifact)
    dataset = load_dataset(args.dataset)
    judge = make_chat_backend(args)
    embedder = LocalHashEmbedder(int(_setting(args, config, "embed_dim", 1024)))
    scores = evaluate_run(
        artifact,
        dataset,
        judge,
        embedder,
        correctness_only=args.correctness_only,
        workers=int(_setting(args, config, "workers", 1)),
    )
    save_scores(scores, args.out)
    shown = {name: scores.means[name] for name in scores.metrics}
    print(f"means: {json.dumps(shown, sort_keys=True)} -> {args.out}")
    return 0


def cmd_report(args: argparse.Namespace, config: dict) -> int:
    agent_scores = [load_scores(path) for path in args.agent]
    rag_scores = [load_scores(path) for path in args.rag]
    report = compare_runs(agent_scores, rag_scores)
    md_path, json_path = save_report(report, args.out)
    print(render_report_markdown(report))
    print(f"wrote {md_path} and {json_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="docqa",
        description="Document question answering: keyword-search agent vs RAG baseline",
    )
    parser.add_argument("--config", help="JSON config file (default ./docqa.json)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="load a corpus directory and print its metadata")
    p_ingest.add_argument("directory")
    p_ingest.set_defaults(func=cmd_ingest)

    def add_backend_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--replay", metavar="SCRIPT", help="serve LLM replies from a script file")
        p.add_argument("--capture", metavar="SCRIPT", help="record live replies to a script file")

    p_ask = sub.add_parser("ask", help="answer one question")
    p_ask.add_argument("--mode", choices=("agent", "rag"), required=True)
    p_ask.add_argument("--question", required=True)
    p_ask.add_argument("--corpus")
    p_ask.add_argument("--t-max", dest="t_max", type=int)
    p_ask.add_argument("--k", dest="k", type=int)
    add_backend_flags(p_ask)
    p_ask.set_defaults(func=cmd_ask)

    p_run = sub.add_parser("run", help="run a dataset and persist the artifact")
    p_run.add_argument("--dataset", required=True)
    p_run.add_argument("--mode", choices=("agent", "rag"), required=True)
    p_run.add_argument("--corpus")
    p_run.add_argument("--sample", dest="sample", type=int)
    p_run.add_argument("--seed", dest="seed", type=int)
    p_run.add_argument("--t-max", dest="t_max", type=int)
    p_run.add_argument("--k", dest="k", type=int)
    p_run.add_argument("--out", required=True)
    add_backend_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_eval = sub.add_parser("eval", help="judge a persisted artifact")
    p_eval.add_argument("--artifact", required=True)
    p_eval.add_argument("--dataset", required=True)
    p_eval.add_argument("--correctness-only", action="store_true")
    p_eval.add_argument("--out", required=True)
    add_backend_flags(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_report = sub.add_parser("report", help="compare agent and RAG score files")
    p_report.add_argument("--agent", action="append", required=True, metavar="SCORES")
    p_report.add_argument("--rag", action="append", required=True, metavar="SCORES")
    p_report.add_argument("--out", required=True, help="base path for the .md/.json pair")
    p_report.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config_file(args.config)
        return args.func(args, config)
    except Exception as exc:  # single reporting point for all domain errors
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
