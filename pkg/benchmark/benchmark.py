import argparse
import copy
import os
from datetime import date

import numpy as np

from tparwr import exact_rwr, generate_random_graph, load_edge_list, preprocess, query
from tparwr.persistence import artifact_size
from tparwr.util import log_result, measure_time, sample_seeds, setup_logging


def benchmark(args):
    print(args)
    if args.graph is not None:
        graph, _ = load_edge_list(args.graph)
        graphs = [(os.path.basename(args.graph), graph)]
    else:
        graphs = [
            (f"random-{n}", generate_random_graph(n, n * args.avg_degree, rng_seed=args.seed)) for n in args.node_counts
        ]

    today = f"{date.today().year}-{date.today().month}-{date.today().day}"
    name = f"tparwr-{args.backend}-t{args.threads}-{args.hardware}-{today}".lower()
    os.makedirs(args.result_base_dir, exist_ok=True)
    out_path = f"{args.result_base_dir}/{name}.csv"

    if os.path.exists(out_path):
        os.remove(out_path)

    for graph_name, graph in graphs:
        seeds = sample_seeds(graph, args.num_seeds, args.seed)
        artifact, preprocess_time = measure_time(
            lambda: preprocess(graph, stranger_start=args.T, threads=args.threads, backend=args.backend),
            name=f"{graph_name} preprocess",
        )
        for S in args.family_ends:
            _ = query(graph, artifact, int(seeds[0]), S, threads=args.threads, backend=args.backend)  # warmup

            online, exact = [], []
            for seed in seeds:
                seed = int(seed)
                _, runtime = measure_time(
                    lambda: query(graph, artifact, seed, S, threads=args.threads, backend=args.backend),
                    name=f"{graph_name}-S{S}-{seed}",
                    repeats=args.num_repeats,
                )
                online.append(runtime)
                _, runtime = measure_time(
                    lambda: exact_rwr(graph, seed, threads=args.threads, backend=args.backend),
                    name=f"{graph_name}-exact-{seed}",
                    repeats=args.num_repeats,
                )
                exact.append(runtime)

            online_ms, exact_ms = float(np.mean(online)), float(np.mean(exact))
            print(f"{graph_name} S={S}: online {online_ms:.3f} ms, exact {exact_ms:.3f} ms")
            log_result(
                out_path,
                {
                    "date": today,
                    "graph": graph_name,
                    "nodes": graph.node_count,
                    "edges": graph.edge_count,
                    "backend": args.backend,
                    "threads": args.threads,
                    "hardware": args.hardware,
                    "S": S,
                    "T": args.T,
                    "preprocess_ms": round(preprocess_time, 3),
                    "artifact_bytes": artifact_size(artifact.node_count),
                    "online_ms": round(online_ms, 3),
                    "exact_ms": round(exact_ms, 3),
                    "speedup": round(exact_ms / online_ms, 3),
                },
            )


def benchmark_all(args):
    def override_args(backend, threads):
        argx = copy.copy(args)
        argx.backend = backend
        argx.threads = threads
        return argx

    backends = ["numpy"]
    try:
        import torch  # noqa: F401

        backends.append("torch")
    except ImportError:
        pass

    for backend in backends:
        for threads in [1, 2, os.cpu_count() or 1]:
            if backend == "torch" and threads > 1:
                continue
            try:
                benchmark(override_args(backend=backend, threads=threads))
            except Exception as e:
                print(f"An unexpected error occurred for {backend} threads={threads}: {e}")


def main():
    parser = argparse.ArgumentParser(prog="tparwr benchmarker")
    parser.add_argument("--all", action="store_true", help="Run all backends and thread counts with default config")
    parser.add_argument("--seed", default=0, type=int)
    parser.add_argument("--graph", default=None, help="Edge list; random graphs are generated when omitted")
    parser.add_argument("--hardware", required=True, type=str)
    parser.add_argument("--backend", default="numpy", choices=["numpy", "torch"])
    parser.add_argument("--threads", default=1, type=int)
    parser.add_argument("--num_repeats", default=3, type=int)
    parser.add_argument("--num_seeds", default=10, type=int)
    parser.add_argument("--node_counts", default=[10_000, 100_000], type=int, nargs="+")
    parser.add_argument("--avg_degree", default=10, type=int)
    parser.add_argument("--family_ends", default=[2, 5, 7], type=int, nargs="+")
    parser.add_argument("--T", default=10, type=int)
    parser.add_argument("--result_base_dir", default="./result/")

    args = parser.parse_args()
    setup_logging("WARNING")
    if not args.all:
        benchmark(args)
    else:
        benchmark_all(args)


if __name__ == "__main__":
    main()
