"""leanstack command-line interface.

Every streaming operation is a subcommand reading stdin (or file
arguments) and writing stdout, so commands compose with shell pipes:

    leanstack tokenize < corpus.txt | leanstack msort --key key=1 |
    leanstack count 1 1 | leanstack sm2 1 1 2 2 > wordcounts.txt

Flags can be defaulted through LEANSTACK_* environment variables
(LEANSTACK_MEM_BUDGET, LEANSTACK_TMPDIR, LEANSTACK_CLUSTER,
LEANSTACK_SEED, LEANSTACK_OUT).
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from pathlib import Path

from . import datagen, tukubai
from .bench import plots, report as report_mod
from .bench.stats import validate
from .bench.workloads import Workload, run_workload
from .cluster import Cluster, load_cluster_config
from .cluster.worker import serve
from .errors import BenchError, LeanstackError
from .records import parse_key_spec


def _env(name: str, default=None):
    return os.environ.get(f"LEANSTACK_{name}", default)


def _in_lines(args):
    if getattr(args, "files", None):
        return (l for f in args.files for l in tukubai.read_lines(f))
    return tukubai.read_lines(sys.stdin)


def _in_chunks(args, size=1 << 20):
    def gen():
        if getattr(args, "files", None):
            for path in args.files:
                with open(path, "r", encoding="utf-8", newline="\n") as f:
                    while True:
                        chunk = f.read(size)
                        if not chunk:
                            break
                        yield chunk
        else:
            while True:
                chunk = sys.stdin.read(size)
                if not chunk:
                    break
                yield chunk

    return gen()


def _emit(lines) -> int:
    out = sys.stdout
    for line in lines:
        out.write(line)
        out.write("\n")
    return 0


def _key(text: str):
    return parse_key_spec(text if text.startswith("key=") else f"key={text}")


def _span_key(frm: str, to: str):
    return parse_key_spec(f"key={frm}/{to}")


def _default_leader_root() -> str:
    return _env("LEADER_ROOT", os.path.join(tempfile.gettempdir(), "leanstack-leader"))


def _cluster(args) -> Cluster:
    config = args.cluster or _env("CLUSTER")
    if not config:
        raise LeanstackError("no cluster config (use --cluster or LEANSTACK_CLUSTER)")
    topo = load_cluster_config(config)
    return Cluster(topo, job_id=args.job, leader_root=_default_leader_root())


# -- command handlers ---------------------------------------------------------


def cmd_tokenize(args):
    return _emit(tukubai.tokenize(_in_chunks(args)))


def cmd_msort(args):
    budget = int(args.mem_budget) if args.mem_budget else None
    return _emit(tukubai.msort(_in_lines(args), _key(args.key), budget, args.tmpdir))


def cmd_lcnt(args):
    return _emit([str(tukubai.lcnt(_in_lines(args)))])


def cmd_count(args):
    return _emit(tukubai.count_by_key(_in_lines(args), _span_key(args.k1, args.k2)))


def cmd_sm2(args):
    return _emit(
        tukubai.sm2(
            _in_lines(args), _span_key(args.k1, args.k2), _span_key(args.d1, args.d2)
        )
    )


def cmd_dmerge(args):
    streams = [tukubai.read_lines(p) for p in args.files]
    return _emit(tukubai.dmerge(streams, _key(args.key)))


def cmd_grep(args):
    return _emit([str(tukubai.grep_count(_in_lines(args), args.needle))])


def cmd_select(args):
    return _emit(tukubai.select_rows(_in_lines(args), args.column, args.threshold))


def cmd_join(args):
    return _emit(
        tukubai.merge_join(
            tukubai.read_lines(args.left),
            tukubai.read_lines(args.right),
            _key(args.key_left),
            _key(args.key_right),
        )
    )


def cmd_worker(args):
    host, _, port = args.listen.rpartition(":")
    if not host or not port.isdigit():
        raise LeanstackError(f"bad --listen endpoint {args.listen!r}")
    serve(host, int(port), args.root)
    return 0


def cmd_distr_distr(args):
    cluster = _cluster(args)
    try:
        manifest = cluster.distr_distr(args.file, args.dest)
    finally:
        cluster.close(delete_jobs=False)
    return _emit(f"{m['node']} {m['bytes']}" for m in manifest)


def cmd_distr_dmerge(args):
    cluster = _cluster(args)
    try:
        return _emit(cluster.distr_dmerge(_key(args.key), args.remote))
    finally:
        cluster.close(delete_jobs=False)


def cmd_shuffle(args):
    cluster = _cluster(args)
    try:
        cluster.shuffle_by_key(args.remote, _key(args.key), dest=args.dest)
    finally:
        cluster.close(delete_jobs=False)
    return 0


def cmd_gather(args):
    cluster = _cluster(args)
    try:
        nbytes = cluster.gather(args.remote, args.local)
    finally:
        cluster.close(delete_jobs=False)
    return _emit([f"{args.local} {nbytes}"])


def cmd_distr_clean(args):
    cluster = _cluster(args)
    cluster.close(delete_jobs=True)
    return 0


def cmd_gen(args):
    out_dir = Path(args.out)
    if args.shape == "text":
        spec = datagen.TextCorpusSpec(
            total_bytes=args.bytes,
            target_file_bytes=args.file_bytes,
            seed=args.seed,
        )
        manifest = datagen.gen_text(spec, out_dir)
    else:
        spec = datagen.TableSpec(
            total_bytes=args.bytes,
            files_per_table=args.files_per_table,
            seed=args.seed,
        )
        manifest = datagen.gen_tables(spec, out_dir)
    datagen.write_manifest(out_dir / "manifest.txt", manifest)
    return _emit(
        f"{e['path']} {e['bytes']} {e['records']}" for e in manifest
    )


def cmd_bench_run(args):
    workload = Workload(
        args.workload,
        needle=args.needle,
        select_column=args.column,
        threshold=args.threshold,
    )
    manifest = datagen.read_manifest(args.data)
    topo = None
    if args.engine == "distributed":
        config = args.cluster or _env("CLUSTER")
        if not config:
            raise BenchError("distributed engine needs --cluster")
        topo = load_cluster_config(config)
    workdir = args.workdir or tempfile.mkdtemp(prefix="leanstack-bench-")
    budget = int(args.mem_budget) if args.mem_budget else None
    rep = run_workload(
        workload,
        manifest,
        args.engine,
        workdir,
        topology=topo,
        reps=args.reps,
        mem_budget=budget,
    )
    report_mod.write_report(args.out, [rep])
    if args.plot:
        plots.plot_rates([args.out], str(args.out) + ".png")
    print(
        f"{rep.workload} {rep.engine}: {rep.wall_time:.3f}s, "
        f"{rep.rate / 1e6:.1f} MB/s, digest {rep.output_digest}",
        file=sys.stderr,
    )
    return 0


def cmd_bench_verify(args):
    by_workload: dict[str, dict[str, str]] = {}
    for path in args.reports:
        for row in report_mod.read_report(path):
            by_workload.setdefault(row["workload"], {})[row["engine"]] = row["digest"]
    status = 0
    for workload, digests in sorted(by_workload.items()):
        if len(digests) < 2:
            print(f"{workload}: only one engine, nothing to compare")
            continue
        agree = len(set(digests.values())) == 1
        detail = ", ".join(f"{e}={d}" for e, d in sorted(digests.items()))
        print(f"{workload}: {'agree' if agree else 'DISAGREE'} ({detail})")
        if not agree:
            status = 1
    return status


def cmd_bench_validate(args):
    rows = report_mod.read_report(args.report)
    groups: dict[tuple[str, str], list[float]] = {}
    for row in rows:
        groups.setdefault((row["workload"], row["engine"]), []).append(row["seconds"])
    for (workload, engine), samples in sorted(groups.items()):
        summary = validate(samples, args.confidence)
        print(
            f"{workload} {engine}: mean {summary.mean:.4f}s, "
            f"{int(summary.confidence * 100)}% CI "
            f"[{summary.ci_low:.4f}, {summary.ci_high:.4f}] (n={summary.n})"
        )
    return 0


def cmd_bench_plot(args):
    out = args.out or str(Path(args.reports[0]).with_suffix(".png"))
    print(plots.plot_rates(args.reports, out))
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leanstack", description="lean distributed text-record toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, handler, **kw):
        sp = sub.add_parser(name, **kw)
        sp.set_defaults(handler=handler)
        return sp

    def add_files(sp):
        sp.add_argument("files", nargs="*", help="input files (default: stdin)")

    sp = add("tokenize", cmd_tokenize, help="split text into one word per record")
    add_files(sp)

    sp = add("msort", cmd_msort, help="stable sort on key columns, spilling if needed")
    sp.add_argument("--key", required=True, help="key=FROM[/TO][@num][@desc]")
    sp.add_argument("--mem-budget", default=_env("MEM_BUDGET"), help="bytes in memory")
    sp.add_argument("--tmpdir", default=_env("TMPDIR"), help="scratch dir for spills")
    add_files(sp)

    sp = add("lcnt", cmd_lcnt, help="count records")
    add_files(sp)

    sp = add("count", cmd_count, help="per-key record counts (input sorted)")
    sp.add_argument("k1", help="first key column")
    sp.add_argument("k2", help="last key column")
    add_files(sp)

    sp = add("sm2", cmd_sm2, help="per-key numeric sums (input sorted)")
    sp.add_argument("k1")
    sp.add_argument("k2")
    sp.add_argument("d1", help="first sum column")
    sp.add_argument("d2", help="last sum column")
    add_files(sp)

    sp = add("dmerge", cmd_dmerge, help="k-way merge of sorted files")
    sp.add_argument("--key", required=True)
    sp.add_argument("files", nargs="+")

    sp = add("grep", cmd_grep, help="count substring occurrences")
    sp.add_argument("needle")
    add_files(sp)

    sp = add("select", cmd_select, help="rows whose numeric column exceeds a value")
    sp.add_argument("--column", type=int, required=True)
    sp.add_argument("--threshold", required=True)
    add_files(sp)

    sp = add("join", cmd_join, help="inner sort-merge join of two sorted files")
    sp.add_argument("left")
    sp.add_argument("right")
    sp.add_argument("--key-left", default="key=1")
    sp.add_argument("--key-right", default="key=1")

    sp = add("worker", cmd_worker, help="run a worker daemon")
    sp.add_argument("--listen", required=True, metavar="HOST:PORT")
    sp.add_argument("--root", required=True, help="data root directory")

    for name, handler, extra in (
        ("distr-distr", cmd_distr_distr, "scatter a file across workers"),
        ("distr-dmerge", cmd_distr_dmerge, "gather-merge sorted worker files"),
        ("shuffle", cmd_shuffle, "repartition worker files by key hash"),
        ("gather", cmd_gather, "concatenate worker files to the leader"),
        ("distr-clean", cmd_distr_clean, "delete a job's remote artifacts"),
    ):
        sp = add(name, handler, help=extra)
        sp.add_argument("--cluster", default=_env("CLUSTER"), help="cluster config file")
        sp.add_argument("--job", default="cli", help="job id scoping remote artifacts")
        if name == "distr-distr":
            sp.add_argument("file", help="local file to scatter")
            sp.add_argument("dest", help="job-relative destination path")
        elif name == "distr-dmerge":
            sp.add_argument("--key", required=True)
            sp.add_argument("remote", help="job-relative sorted file")
        elif name == "shuffle":
            sp.add_argument("--key", required=True)
            sp.add_argument("--dest", default=None, help="output path (default: in place)")
            sp.add_argument("remote")
        elif name == "gather":
            sp.add_argument("remote")
            sp.add_argument("local")

    sp = add("gen", cmd_gen, help="generate benchmark datasets")
    sp.add_argument("shape", choices=("text", "tables"))
    sp.add_argument("--bytes", type=int, required=True)
    sp.add_argument("--seed", type=int, default=int(_env("SEED", "0")))
    sp.add_argument("--out", default=_env("OUT"), required=_env("OUT") is None)
    sp.add_argument("--file-bytes", type=int, default=5_000_000, dest="file_bytes")
    sp.add_argument("--files-per-table", type=int, default=4, dest="files_per_table")

    bench = sub.add_parser("bench", help="benchmark harness")
    bsub = bench.add_subparsers(dest="bench_command", required=True)

    sp = bsub.add_parser("run", help="run one workload and write a report")
    sp.set_defaults(handler=cmd_bench_run)
    sp.add_argument("--workload", required=True)
    sp.add_argument("--data", required=True, help="dataset manifest file")
    sp.add_argument("--engine", choices=("oracle", "distributed"), required=True)
    sp.add_argument("--cluster", default=_env("CLUSTER"))
    sp.add_argument("--reps", type=int, default=3)
    sp.add_argument("--out", default=_env("OUT"), required=_env("OUT") is None)
    sp.add_argument("--workdir", default=None)
    sp.add_argument("--mem-budget", default=_env("MEM_BUDGET"))
    sp.add_argument("--needle", default="ab")
    sp.add_argument("--column", type=int, default=3)
    sp.add_argument("--threshold", default="50")
    sp.add_argument("--plot", action="store_true", help="render a rate figure too")

    sp = bsub.add_parser("verify", help="compare report digests across engines")
    sp.set_defaults(handler=cmd_bench_verify)
    sp.add_argument("--reports", nargs="+", required=True)

    sp = bsub.add_parser("validate", help="mean and confidence interval of repetitions")
    sp.set_defaults(handler=cmd_bench_validate)
    sp.add_argument("--report", required=True)
    sp.add_argument("--confidence", type=float, default=0.95)

    sp = bsub.add_parser("plot", help="render rate figures from reports")
    sp.set_defaults(handler=cmd_bench_plot)
    sp.add_argument("--reports", nargs="+", required=True)
    sp.add_argument("--out", default=None)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except LeanstackError as exc:
        print(f"leanstack: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        # Downstream pipe closed early (e.g. head); not our error.
        try:
            sys.stdout.close()
        except OSError:
            pass
        return 0
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
