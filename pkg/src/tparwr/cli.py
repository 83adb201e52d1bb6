# Copyright (c) NXAI GmbH.

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd

from .analysis import block_structure_comparison, block_structure_stat, column_difference_profile
from .config import Settings
from .cpi import CpiParams, SeedSet, cpi_segments, exact_rwr
from .graph import DanglingPolicy, Graph, NodeIdMap, ScoreVector, generate_random_graph, load_edge_list
from .metrics import ErrorReport, bound_report, format_error_table, l1_error, summarize_reports, top_k
from .persistence import (
    RunConfig,
    artifact_size,
    load_artifact,
    load_run_config,
    run_config_path,
    save_artifact,
    save_run_config,
)
from .tpa import StrangerArtifact, TpaModel, TpaParams, neighbor_scale_factor, preprocess
from .util import measure_time, sample_seeds, setup_logging

logger = logging.getLogger(__name__)


class UsageError(ValueError):
    """A flag combination that parses but cannot be run."""


def _timings_path(out: Path) -> Path:
    return out.with_name(f"{out.stem}_timings.csv")


def _load(args: argparse.Namespace) -> tuple[Graph, NodeIdMap]:
    return load_edge_list(args.graph, dangling_policy=args.dangling)


def _tpa_params(family_end: int, stranger_start: int, c: float, tolerance: float) -> TpaParams:
    try:
        return TpaParams(family_end=family_end, stranger_start=stranger_start, restart_prob=c, tolerance=tolerance)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _write_run_config(out: Path, command: str, graph: Graph, args: argparse.Namespace, **params) -> None:
    config = RunConfig(
        command=command,
        graph=str(args.graph),
        graph_fingerprint=graph.fingerprint,
        dangling_policy=graph.dangling_policy.value,
        threads=args.threads,
        backend=args.backend,
        params=params,
    )
    save_run_config(run_config_path(out), config)


def _parse_range(text: str) -> list[int]:
    try:
        lo, hi = (int(part) for part in text.split(".."))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a range 'A..B', got {text!r}") from None
    if lo > hi:
        raise argparse.ArgumentTypeError(f"range start {lo} is after its end {hi}")
    return list(range(lo, hi + 1))


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from None


def cmd_preprocess(args: argparse.Namespace) -> int:
    graph, _ = _load(args)
    artifact, runtime = measure_time(
        lambda: preprocess(graph, args.c, args.epsilon, args.T, threads=args.threads, backend=args.backend),
        name="preprocess",
    )
    out = Path(args.out)
    save_artifact(artifact, out)
    _write_run_config(out, "preprocess", graph, args, c=args.c, epsilon=args.epsilon, T=args.T)

    print(f"preprocessing time: {runtime:.3f} ms")
    print(f"artifact size: {artifact_size(artifact.node_count)} bytes")
    return 0


def _check_artifact_policy(artifact_path: Path, dangling: str) -> None:
    config_path = run_config_path(artifact_path)
    if not config_path.exists():
        return
    recorded = load_run_config(config_path).dangling_policy
    if recorded is not None and recorded != dangling:
        raise UsageError(f"{artifact_path} was preprocessed with --dangling {recorded}, got --dangling {dangling}")


def cmd_query(args: argparse.Namespace) -> int:
    _check_artifact_policy(Path(args.artifact), args.dangling)
    graph, id_map = _load(args)
    artifact = load_artifact(args.artifact, graph=graph)
    params = _tpa_params(args.S, artifact.stranger_start, artifact.restart_prob, artifact.tolerance)
    seed = id_map.to_internal(args.seed)

    model = TpaModel(graph, params, threads=args.threads, backend=args.backend)
    model.artifact = artifact
    run = model.query_na if args.na else model.query
    scores, runtime = measure_time(lambda: run(seed), name="query")

    k = graph.node_count if args.top_k is None else min(args.top_k, graph.node_count)
    ranked = top_k(scores, k)
    ranking = pd.DataFrame(
        {"rank": np.arange(1, k + 1), "node": id_map.to_external(ranked), "score": scores[ranked]}
    )
    print(ranking.to_string(index=False, float_format=lambda v: f"{v:.6e}"))
    print(f"online time: {runtime:.3f} ms")

    if args.exact:
        _, exact_runtime = measure_time(
            lambda: exact_rwr(graph, seed, artifact.restart_prob, artifact.tolerance, args.threads, args.backend),
            name="exact",
        )
        report = bound_report(
            graph,
            seed,
            params.family_end,
            params.stranger_start,
            params.restart_prob,
            params.tolerance,
            artifact=artifact,
            ks=args.top_k_eval,
            threads=args.threads,
            backend=args.backend,
        )
        print(format_error_table([report]))
        print(f"exact time: {exact_runtime:.3f} ms")

    if args.out is not None:
        out = Path(args.out)
        ranking.to_csv(out, index=False)
        _write_run_config(out, "query", graph, args, seed=args.seed, S=args.S, na=args.na, top_k=args.top_k)
    return 0


def _evaluate_graph(
    graph: Graph, id_map: NodeIdMap, label: str, args: argparse.Namespace
) -> tuple[list[ErrorReport], pd.DataFrame]:
    params = _tpa_params(args.S, args.T, args.c, args.epsilon)
    seeds = sample_seeds(graph, args.num_seeds, args.rng_seed)
    artifact, preprocess_ms = measure_time(
        lambda: preprocess(graph, args.c, args.epsilon, args.T, threads=args.threads, backend=args.backend),
        name=f"{label} preprocess",
    )
    artifact_bytes = artifact_size(artifact.node_count)
    model = TpaModel(graph, params, threads=args.threads, backend=args.backend)
    model.artifact = artifact

    reports, timings = [], []
    for seed in seeds:
        seed = int(seed)
        report = bound_report(
            graph,
            seed,
            args.S,
            args.T,
            args.c,
            args.epsilon,
            artifact=artifact,
            ks=args.top_k_eval,
            threads=args.threads,
            backend=args.backend,
        )
        _, online_ms = measure_time(lambda: model.query(seed), name="query")
        _, exact_ms = measure_time(
            lambda: exact_rwr(graph, seed, args.c, args.epsilon, args.threads, args.backend), name="exact"
        )
        reports.append(report)
        timings.append(
            {
                "graph_label": label,
                "seed": int(id_map.to_external([seed])[0]),
                "online_ms": online_ms,
                "exact_ms": exact_ms,
                "preprocess_ms": preprocess_ms,
                "artifact_bytes": artifact_bytes,
            }
        )
        logger.info("Seed %d: total error %.6f (%.2f%% of bound)", seed, report.l1_error, 100 * report.bound_ratio)
    return reports, pd.DataFrame(timings)


def cmd_evaluate(args: argparse.Namespace) -> int:
    graph, id_map = _load(args)
    _tpa_params(args.S, args.T, args.c, args.epsilon)
    runs = [(Path(args.graph).stem, graph, id_map)]
    if args.random_counterpart:
        n = graph.node_count
        random = generate_random_graph(
            n, min(graph.edge_count, n * (n - 1)), args.rng_seed, dangling_policy=graph.dangling_policy
        )
        runs.append(("random", random, NodeIdMap.identity(n)))

    summaries, per_seed, timings = [], [], []
    for label, run_graph, run_ids in runs:
        reports, timing_frame = _evaluate_graph(run_graph, run_ids, label, args)
        summary = summarize_reports(reports)
        summary.insert(0, "graph_label", label)
        summaries.append(summary)
        rows = pd.DataFrame([report.to_row() for report in reports])
        rows["seed"] = run_ids.to_external(rows["seed"].to_numpy())
        rows.insert(0, "graph_label", label)
        per_seed.append(rows)
        timings.append(timing_frame)

        print(f"[{label}]")
        print(format_error_table(reports))
        print(f"mean online time: {timing_frame['online_ms'].mean():.3f} ms")
        print(f"mean exact time: {timing_frame['exact_ms'].mean():.3f} ms")
        print(f"preprocessing time: {timing_frame['preprocess_ms'].iloc[0]:.3f} ms")
        print(f"artifact size: {timing_frame['artifact_bytes'].iloc[0]} bytes")

    out = Path(args.out)
    pd.concat(summaries, ignore_index=True).to_csv(out, index=False)
    if args.per_seed is not None:
        pd.concat(per_seed, ignore_index=True).to_csv(args.per_seed, index=False)
    pd.concat(timings, ignore_index=True).to_csv(_timings_path(out), index=False)
    _write_run_config(
        out,
        "evaluate",
        graph,
        args,
        S=args.S,
        T=args.T,
        c=args.c,
        epsilon=args.epsilon,
        num_seeds=args.num_seeds,
        rng_seed=args.rng_seed,
        top_k=list(args.top_k_eval),
        random_counterpart=args.random_counterpart,
    )
    return 0


def _window_sums(
    graph: Graph, seeds: SeedSet, boundaries: list[int], args: argparse.Namespace
) -> tuple[dict[int, ScoreVector], ScoreVector]:
    """Prefix sums over ``[0, b-1]`` for every boundary b, and the full sum, from a single CPI pass."""
    segments = cpi_segments(
        graph, seeds, CpiParams(restart_prob=args.c, tolerance=args.epsilon), boundaries, args.threads, args.backend
    )
    prefix, running = {}, np.zeros(graph.node_count)
    for boundary, segment in zip(boundaries, segments):
        running = running + segment
        prefix[boundary] = running
    return prefix, running + segments[-1]


def cmd_sweep(args: argparse.Namespace) -> int:
    graph, _ = _load(args)
    values = args.range
    if args.vary == "S":
        pairs = [(s, args.fixed) for s in values]
    else:
        pairs = [(args.fixed, t) for t in values]
    for family_end, stranger_start in pairs:
        _tpa_params(family_end, stranger_start, args.c, args.epsilon)

    stranger_starts = sorted({t for _, t in pairs})
    boundaries = sorted({b for pair in pairs for b in pair})
    seeds = [int(s) for s in sample_seeds(graph, args.num_seeds, args.rng_seed)]

    # one PageRank pass yields every tail [T, inf)
    pr_prefix, pr_total = _window_sums(graph, SeedSet.all_nodes(graph.node_count), stranger_starts, args)
    artifacts = {
        t: StrangerArtifact(
            stranger_scores=pr_total - pr_prefix[t],
            graph_fingerprint=graph.fingerprint,
            restart_prob=args.c,
            tolerance=args.epsilon,
            stranger_start=t,
        )
        for t in stranger_starts
    }

    errors: dict[tuple[int, int], list[tuple[float, float, float]]] = {pair: [] for pair in pairs}
    online: dict[tuple[int, int], list[float]] = {pair: [] for pair in pairs}
    for seed in seeds:
        prefix, total = _window_sums(graph, SeedSet.single(seed, graph.node_count), boundaries, args)
        for family_end, stranger_start in pairs:
            family = prefix[family_end]
            neighbor = prefix[stranger_start] - family
            stranger = total - prefix[stranger_start]
            approx_neighbor = neighbor_scale_factor(args.c, family_end, stranger_start) * family
            approx_stranger = artifacts[stranger_start].stranger_scores
            errors[(family_end, stranger_start)].append(
                (
                    l1_error(total, family + approx_neighbor + approx_stranger),
                    l1_error(neighbor, approx_neighbor),
                    l1_error(stranger, approx_stranger),
                )
            )

            params = _tpa_params(family_end, stranger_start, args.c, args.epsilon)
            model = TpaModel(graph, params, threads=args.threads, backend=args.backend)
            model.artifact = artifacts[stranger_start]
            _, runtime = measure_time(lambda: model.query(seed), name="query")
            online[(family_end, stranger_start)].append(runtime)

    rows, timing_rows = [], []
    for value, pair in zip(values, pairs):
        mean_total, mean_na, mean_sa = np.mean(errors[pair], axis=0)
        rows.append({"param_value": value, "mean_l1_error": mean_total, "na_error": mean_na, "sa_error": mean_sa})
        timing_rows.append({"param_value": value, "mean_online_time_ms": float(np.mean(online[pair]))})
        logger.info("%s=%d: l1=%.6f neighbor=%.6f stranger=%.6f", args.vary, value, mean_total, mean_na, mean_sa)

    out = Path(args.out)
    pd.DataFrame(rows).to_csv(out, index=False)
    pd.DataFrame(timing_rows).to_csv(_timings_path(out), index=False)
    _write_run_config(
        out,
        "sweep",
        graph,
        args,
        vary=args.vary,
        range=[values[0], values[-1]],
        fixed=args.fixed,
        c=args.c,
        epsilon=args.epsilon,
        num_seeds=args.num_seeds,
        rng_seed=args.rng_seed,
    )
    print(pd.DataFrame(rows).to_string(index=False))
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    graph, _ = _load(args)
    seeds = [int(s) for s in sample_seeds(graph, args.num_seeds, args.rng_seed)]
    out = Path(args.out)

    if args.mode == "ci":
        profiles = [
            column_difference_profile(
                graph, seed, args.iterations, args.sample_size, args.rng_seed, args.threads, args.backend
            )
            for seed in seeds
        ]
        rows = [
            {
                "i": entries[0].iteration,
                "C_i": float(np.mean([e.c_i for e in entries])),
                "mean_nnz": float(np.mean([e.mean_nnz for e in entries])),
                "sampled": entries[0].sampled,
            }
            for entries in zip(*profiles)
        ]
        params = {"iterations": args.iterations, "sample_size": args.sample_size}
    else:
        if args.S < 1:
            raise UsageError(f"--S must be >= 1, got {args.S}")
        label = Path(args.graph).stem
        if args.random_counterpart:
            comparison = block_structure_comparison(
                graph, seeds, args.S, args.c, args.epsilon, args.rng_seed, args.threads, args.backend
            )
            rows = [
                {"graph_label": label, "S": args.S, "stat": comparison.graph_stat},
                {"graph_label": "random", "S": args.S, "stat": comparison.random_stat},
            ]
        else:
            stat = np.mean(
                [
                    block_structure_stat(graph, seed, args.S, args.c, args.epsilon, args.threads, args.backend)
                    for seed in seeds
                ]
            )
            rows = [{"graph_label": label, "S": args.S, "stat": float(stat)}]
        params = {"S": args.S, "c": args.c, "epsilon": args.epsilon, "random_counterpart": args.random_counterpart}

    frame = pd.DataFrame(rows)
    frame.to_csv(out, index=False)
    _write_run_config(
        out, "analyze", graph, args, mode=args.mode, num_seeds=args.num_seeds, rng_seed=args.rng_seed, **params
    )
    print(frame.to_string(index=False))
    return 0


def build_parser(settings: Settings | None = None) -> argparse.ArgumentParser:
    settings = settings if settings is not None else Settings()

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=settings.threads, help="Sweep parallelism; 1 is deterministic")
    common.add_argument("--backend", choices=["numpy", "torch"], default=settings.backend)
    common.add_argument("--log-level", default=settings.log_level)
    common.add_argument("--dangling", choices=[p.value for p in DanglingPolicy], default=settings.dangling_policy)

    graph_args = argparse.ArgumentParser(add_help=False)
    graph_args.add_argument("--graph", required=True, help="Whitespace separated edge list")
    graph_args.add_argument("--c", type=float, default=settings.restart_prob, help="Restart probability")
    graph_args.add_argument("--epsilon", type=float, default=settings.tolerance, help="CPI tolerance")

    seed_args = argparse.ArgumentParser(add_help=False)
    seed_args.add_argument("--num-seeds", type=int, default=settings.num_seeds)
    seed_args.add_argument("--rng-seed", type=int, default=settings.rng_seed)

    parser = argparse.ArgumentParser(prog="tparwr", description="Exact and two-phase approximate RWR")
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("preprocess", parents=[common, graph_args], help="Compute the stranger artifact")
    sub.add_argument("--T", type=int, default=settings.stranger_start)
    sub.add_argument("--out", required=True)
    sub.set_defaults(func=cmd_preprocess)

    sub = commands.add_parser("query", parents=[common], help="Approximate RWR scores for one seed")
    sub.add_argument("--graph", required=True)
    sub.add_argument("--artifact", required=True)
    sub.add_argument("--seed", type=int, required=True, help="Seed node label as it appears in the edge list")
    sub.add_argument("--S", type=int, default=settings.family_end)
    sub.add_argument("--top-k", type=int, default=None)
    sub.add_argument("--exact", action="store_true", help="Also compute exact RWR and print the error report")
    sub.add_argument("--na", action="store_true", help="Omit the stranger approximation")
    sub.add_argument("--out", default=None)
    sub.set_defaults(func=cmd_query, top_k_eval=settings.top_k)

    sub = commands.add_parser("evaluate", parents=[common, graph_args, seed_args], help="Error statistics vs exact")
    sub.add_argument("--S", type=int, default=settings.family_end)
    sub.add_argument("--T", type=int, default=settings.stranger_start)
    sub.add_argument("--top-k", dest="top_k_eval", type=_parse_int_list, default=list(settings.top_k))
    sub.add_argument("--out", required=True)
    sub.add_argument("--per-seed", default=None)
    sub.add_argument("--random-counterpart", action="store_true", help="Repeat on a random graph with the same n, m")
    sub.set_defaults(func=cmd_evaluate)

    sub = commands.add_parser("sweep", parents=[common, graph_args, seed_args], help="Vary S or T")
    sub.add_argument("--vary", choices=["S", "T"], required=True)
    sub.add_argument("--range", type=_parse_range, required=True, help="Inclusive range A..B")
    sub.add_argument("--fixed", type=int, required=True, help="Value of the parameter not varied")
    sub.add_argument("--out", required=True)
    sub.set_defaults(func=cmd_sweep)

    sub = commands.add_parser("analyze", parents=[common, graph_args, seed_args], help="Structural statistics")
    sub.add_argument("--mode", choices=["ci", "block"], required=True)
    sub.add_argument("--iterations", type=_parse_int_list, default=[1, 3, 5, 7])
    sub.add_argument("--sample-size", type=int, default=settings.sample_size)
    sub.add_argument("--S", type=int, default=settings.family_end)
    sub.add_argument("--random-counterpart", action="store_true")
    sub.add_argument("--out", required=True)
    sub.set_defaults(func=cmd_analyze)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level.upper())

    try:
        return args.func(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog} {args.command}: error: {e}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as e:
        logger.error("%s", e)
        return 1
    except ImportError as e:
        logger.error("Backend %s is not available: %s", args.backend, e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
