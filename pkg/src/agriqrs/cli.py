"""Command-line interface.

Exit codes: 0 success, 2 usage problems, 3 data or contract errors,
4 unexpected runtime faults.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from importlib import resources

import numpy as np

from .corpus import CropLexicon
from .errors import AgriQRSError, ConfigurationError, DataError, UsageError
from .evalharness import classification_report, evaluate_retrieval, load_scored_queries
from .mapper import predict_proba, split_dataset, train_mapper
from .pipeline import PipelineArtifact, PipelineConfig, fit, rebuild_query_views
from .simcluster import (
    benchmark_clustering,
    calinski_harabasz,
    davies_bouldin,
    kmeans_baseline,
    silhouette_score,
)


def _default_crops_path() -> str:
    return str(resources.files("agriqrs.data").joinpath("crops_default.txt"))


def _load_config(args) -> PipelineConfig:
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config file {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config file is not valid JSON: {exc}") from exc
        config = PipelineConfig.from_dict(data)
    else:
        config = PipelineConfig()

    cluster = config.cluster
    if getattr(args, "lam", None) is not None:
        cluster = replace(cluster, lam=args.lam)
    if getattr(args, "thresh", None) is not None:
        cluster = replace(cluster, thresh=args.thresh)
    if getattr(args, "min_size", None) is not None:
        cluster = replace(cluster, min_size=args.min_size)
    embedder = config.embedder
    if getattr(args, "embedder", None) is not None:
        embedder = replace(embedder, kind=args.embedder)
    if getattr(args, "dimension", None) is not None:
        embedder = replace(embedder, dim=args.dimension)
    if getattr(args, "embed_seed", None) is not None:
        embedder = replace(embedder, seed=args.embed_seed)
    if getattr(args, "embed_path", None) is not None:
        embedder = replace(embedder, path=args.embed_path)
    if getattr(args, "endpoint", None) is not None:
        embedder = replace(embedder, endpoint=args.endpoint)
    train = config.train
    if getattr(args, "seed", None) is not None:
        train = replace(train, seed=args.seed)
    return replace(config, cluster=cluster, embedder=embedder, train=train)


def _render(result, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(result.to_dict(), indent=2, ensure_ascii=False)
    lines = [
        f"query: {result.query}",
        f"crop: {result.crop or '-'}   cluster: {result.cluster_id}"
        + ("   (crop filter relaxed)" if result.fallback_unfiltered else ""),
    ]
    if not result.answers:
        lines.append("no answers")
    for ans in result.answers:
        lines.append(
            f"{ans.rank:>3}. [{ans.crop or '-'} | group of {ans.cluster_size}] {ans.answer}"
        )
        lines.append(f"     from: {ans.source_query}")
    return "\n".join(lines)


def _parse_bind(value: str) -> tuple[str, int]:
    host, sep, port = value.rpartition(":")
    if not sep or not port.isdigit():
        raise UsageError(f"--bind expects host:port, got {value!r}")
    return host or "127.0.0.1", int(port)


def _parse_int_list(value: str, flag: str) -> list[int]:
    try:
        items = [int(part) for part in value.split(",") if part.strip()]
    except ValueError as exc:
        raise UsageError(f"{flag} expects a comma-separated integer list") from exc
    if not items:
        raise UsageError(f"{flag} is empty")
    return items


# -- subcommands ---------------------------------------------------------


def _cmd_fit(args) -> int:
    config = _load_config(args)
    lexicon = CropLexicon.from_file(args.crops)
    artifact = fit(args.corpus, lexicon, config, dump_sim_path=args.dump_sim)
    artifact.save(args.out)
    c = artifact.counts
    print(f"records: {c['records']} (read {c['rows_read']} rows)")
    print(
        f"dropped: {c['dropped_empty_rows']} empty rows, "
        f"{c['dropped_duplicate_rows']} duplicates, {c['dropped_realtime']} realtime, "
        f"{c['dropped_empty_queries']} empty queries, {c['dropped_small']} below min size"
    )
    print(f"clusters: {c['clusters']} covering {c['clustered_queries']} queries")
    print(f"saved: {args.out}")
    return 0


def _cmd_query(args) -> int:
    artifact = PipelineArtifact.load(args.artifact)
    result = artifact.query(" ".join(args.text), k=args.k)
    print(_render(result, args.format))
    return 0


def _cmd_repl(args) -> int:
    artifact = PipelineArtifact.load(args.artifact)
    while True:
        try:
            line = input("query> ")
        except EOFError:
            print()
            return 0
        except KeyboardInterrupt:
            print()
            return 0
        line = line.strip()
        if not line:
            continue
        try:
            print(_render(artifact.query(line, k=args.k), args.format))
        except AgriQRSError as exc:
            print(f"error: {exc}", file=sys.stderr)


def _cmd_serve(args) -> int:
    from .server import serve_forever

    artifact = PipelineArtifact.load(args.artifact)
    host, port = _parse_bind(args.bind)
    serve_forever(artifact, host, port)
    return 0


def _cmd_eval_cluster(args) -> int:
    from .report import write_cluster_eval

    artifact = PipelineArtifact.load(args.artifact)
    views, embeddings, pos_of = rebuild_query_views(artifact)
    clusters_pos = [
        [pos_of[idx] for idx in members] for members in artifact.clusters
    ]
    metrics = {}
    if len(clusters_pos) < 2:
        raise DataError("need at least 2 clusters to score; refit with lower thresh")
    metrics["threshold"] = {
        "silhouette": silhouette_score(embeddings, clusters_pos),
        "ch_index": calinski_harabasz(embeddings, clusters_pos),
        "db_index": davies_bouldin(embeddings, clusters_pos),
        "clusters": len(clusters_pos),
        "points": sum(len(c) for c in clusters_pos),
    }
    km = kmeans_baseline(embeddings, k=len(clusters_pos), seed=args.kmeans_seed)
    metrics["kmeans"] = {
        "silhouette": silhouette_score(embeddings, km.clusters),
        "ch_index": calinski_harabasz(embeddings, km.clusters),
        "db_index": davies_bouldin(embeddings, km.clusters),
        "clusters": len(km.clusters),
        "points": km.n_items,
    }
    csv_path, fig_path = write_cluster_eval(metrics, args.out)
    for method, m in metrics.items():
        print(
            f"{method}: silhouette {m['silhouette']:.4f}, CH {m['ch_index']:.4f}, "
            f"DB {m['db_index']:.4f} over {m['points']} points in {m['clusters']} clusters"
        )
    print(f"wrote {csv_path} and {fig_path}")
    return 0


def _cmd_eval_mapper(args) -> int:
    from .report import write_mapper_eval

    artifact = PipelineArtifact.load(args.artifact)
    _, embeddings, pos_of = rebuild_query_views(artifact)
    positions = []
    labels = []
    for cid, members in enumerate(artifact.clusters):
        for idx in members:
            positions.append(pos_of[idx])
            labels.append(cid)
    x = embeddings[positions]
    y = np.asarray(labels, dtype=np.int64)
    fraction = args.fraction or artifact.config.train.train_fraction
    train_idx, test_idx = split_dataset(y, train_fraction=fraction, seed=args.seed)
    config = replace(artifact.config.train, train_fraction=fraction)
    model = train_mapper(x[train_idx], y[train_idx], config, n_classes=len(artifact.clusters))
    preds = np.argmax(predict_proba(model, x[test_idx]), axis=1)
    report = classification_report(y[test_idx], preds, labels=range(len(artifact.clusters)))
    csv_path, fig_path = write_mapper_eval(report, args.out, model.train_losses)
    print(
        f"held-out accuracy {report.accuracy:.4f} on {report.n_examples} queries "
        f"({len(train_idx)} trained)"
    )
    print(f"wrote {csv_path} and {fig_path}")
    return 0


def _cmd_eval_retrieval(args) -> int:
    from .report import write_retrieval_eval

    artifact = PipelineArtifact.load(args.artifact)
    scored = load_scored_queries(args.scored)
    ks = _parse_int_list(args.k, "--k")

    def answer_fn(text, k):
        return [a.answer for a in artifact.query(text, k=k).answers]

    rows = evaluate_retrieval(answer_fn, scored, ks)
    csv_path, fig_path = write_retrieval_eval(rows, args.out)
    for row in rows:
        print(
            f"k={row.k}: mean NDCG {row.mean_ndcg:.4f} over {row.queries_evaluated} "
            f"queries ({row.queries_skipped} skipped)"
        )
    print(f"wrote {csv_path} and {fig_path}")
    return 0


def _cmd_bench(args) -> int:
    from .report import write_bench_outputs

    config = _load_config(args)
    sizes = _parse_int_list(args.sizes, "--sizes")
    rows = benchmark_clustering(
        sizes, config.cluster, seed=args.data_seed, kmeans_seed=args.kmeans_seed
    )
    csv_path, fig_path = write_bench_outputs(rows, args.out)
    for row in rows:
        print(f"{row.method:>10} n={row.n:<7} {row.seconds:.4f}s")
    print(f"wrote {csv_path} and {fig_path}")
    return 0


# -- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agriqrs",
        description="query-response engine for agricultural call-centre corpora",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_cluster_flags(p):
        p.add_argument("--lambda", dest="lam", type=float, help="embedding weight in [0,1]")
        p.add_argument("--thresh", type=float, help="similarity threshold in (0,1]")
        p.add_argument("--min-size", dest="min_size", type=int, help="smallest kept cluster")

    p_fit = sub.add_parser("fit", help="build a pipeline artifact from a corpus")
    p_fit.add_argument("--corpus", required=True, help="delimited corpus file")
    p_fit.add_argument("--crops", default=_default_crops_path(), help="crop lexicon file")
    p_fit.add_argument("--out", required=True, help="artifact directory to write")
    p_fit.add_argument("--config", help="JSON config file")
    add_cluster_flags(p_fit)
    p_fit.add_argument("--embedder", choices=["hashed", "file", "service"])
    p_fit.add_argument("--dimension", type=int, help="embedding dimension")
    p_fit.add_argument("--embed-seed", dest="embed_seed", type=int)
    p_fit.add_argument("--embed-path", dest="embed_path", help="JSONL file for --embedder file")
    p_fit.add_argument("--endpoint", help="URL for --embedder service")
    p_fit.add_argument("--seed", type=int, help="training seed")
    p_fit.add_argument("--dump-sim", dest="dump_sim", help="write the similarity matrix here")
    p_fit.set_defaults(func=_cmd_fit)

    p_query = sub.add_parser("query", help="answer one query from an artifact")
    p_query.add_argument("--artifact", required=True)
    p_query.add_argument("--k", type=int, default=5)
    p_query.add_argument("--format", choices=["json", "table"], default="json")
    p_query.add_argument("text", nargs="+", help="the query text")
    p_query.set_defaults(func=_cmd_query)

    p_repl = sub.add_parser("repl", help="interactive query loop")
    p_repl.add_argument("--artifact", required=True)
    p_repl.add_argument("--k", type=int, default=5)
    p_repl.add_argument("--format", choices=["json", "table"], default="table")
    p_repl.set_defaults(func=_cmd_repl)

    p_serve = sub.add_parser("serve", help="HTTP server over an artifact")
    p_serve.add_argument("--artifact", required=True)
    p_serve.add_argument("--bind", default="127.0.0.1:8080", help="host:port")
    p_serve.set_defaults(func=_cmd_serve)

    p_ec = sub.add_parser("eval-cluster", help="cluster quality vs a K-Means baseline")
    p_ec.add_argument("--artifact", required=True)
    p_ec.add_argument("--out", required=True, help="report directory")
    p_ec.add_argument("--kmeans-seed", dest="kmeans_seed", type=int, default=0)
    p_ec.set_defaults(func=_cmd_eval_cluster)

    p_em = sub.add_parser("eval-mapper", help="held-out mapper accuracy report")
    p_em.add_argument("--artifact", required=True)
    p_em.add_argument("--out", required=True, help="report directory")
    p_em.add_argument("--fraction", type=float, help="train fraction (default: artifact's)")
    p_em.add_argument("--seed", type=int, default=0, help="split seed")
    p_em.set_defaults(func=_cmd_eval_mapper)

    p_er = sub.add_parser("eval-retrieval", help="NDCG against scored answers")
    p_er.add_argument("--artifact", required=True)
    p_er.add_argument("--scored", required=True, help="JSONL of scored queries")
    p_er.add_argument("--k", default="1,3,5", help="comma-separated k values")
    p_er.add_argument("--out", required=True, help="report directory")
    p_er.set_defaults(func=_cmd_eval_retrieval)

    p_bench = sub.add_parser("bench", help="timing and quality on synthetic corpora")
    p_bench.add_argument("--sizes", default="500,1000,2000", help="comma-separated sizes")
    p_bench.add_argument("--out", required=True, help="report directory")
    p_bench.add_argument("--config", help="JSON config file")
    add_cluster_flags(p_bench)
    p_bench.add_argument("--data-seed", dest="data_seed", type=int, default=0)
    p_bench.add_argument("--kmeans-seed", dest="kmeans_seed", type=int, default=0)
    p_bench.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AgriQRSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except KeyboardInterrupt:
        return 130
    except Exception as exc:  # noqa: BLE001 - fault barrier for exit code 4
        print(f"unexpected error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
