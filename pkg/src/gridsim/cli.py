"""Command-line entry point: ``gridsim <subcommand> [options]``.

Exit codes: 0 success, 2 invalid configuration or input, 3 data lost at run time.
"""

import argparse
import csv
import io
import logging
import sys
import time

from .config import Config, parse_config
from .datagrid import Cluster, ConfigurationError, DataUnavailableError
from .scaling.health import TraceError

log = logging.getLogger("gridsim")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_DATA_LOSS = 3

_run_counter = 0


def _fresh_name(base):
    # each run gets its own cluster so repeated runs in one process never share state
    global _run_counter
    _run_counter += 1
    return f"{base}#{_run_counter}"


def build_cluster(cfg: Config, members, tcp=None, name=None):
    """Master joins in-process; the rest join in-process or, with ``tcp``, as remote processes."""
    if name is None:
        # remote members check the cluster name on join, so tcp runs keep the configured one
        name = cfg.main_cluster if tcp else _fresh_name(cfg.main_cluster)
    cluster = Cluster(name, backup_count=cfg.backup_count)
    cluster.join(label="master")
    if tcp:
        from .datagrid.tcp import join_tcp, parse_endpoints
        endpoints = parse_endpoints(tcp)
        if 1 + len(endpoints) < members:
            raise ConfigurationError(
                f"noOfExecutions={members} needs {members - 1} member endpoint(s), got {len(endpoints)}")
        join_tcp(cluster, endpoints)
    else:
        for i in range(1, members):
            cluster.join(label=f"member{i}")
    log.info("cluster %s ready with %d members", cluster.name, len(cluster.member_ids))
    return cluster


def _close(cluster):
    cluster.shutdown()


def _write(path, text, stdout):
    if path in (None, "-"):
        stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _apply_globals(cfg, args):
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


# -- subcommands -----------------------------------------------------------------


def cmd_run_cloud(cfg: Config, args, stdout):
    from .simcore import run_simulation

    cfg.validate_cloud()
    members = cfg.members()
    cluster = build_cluster(cfg, members, args.tcp)
    try:
        report = run_simulation(cluster, cfg.simulation_config())
    finally:
        _close(cluster)
    _write(args.out, report.to_csv(), stdout)
    print(report.summary_line(), file=stdout if args.out not in (None, "-") else sys.stderr)
    return EXIT_OK


def cmd_run_mapreduce(cfg: Config, args, stdout):
    from .mapreduce import run_map_reduce

    cfg.validate_mapreduce()
    spec = cfg.job_spec()
    cluster = build_cluster(cfg, cfg.members(), args.tcp)
    try:
        result = run_map_reduce(spec, cluster)
    finally:
        _close(cluster)
    if args.out not in (None, "-"):
        _write(args.out, result.to_csv(), stdout)
    print(result.counters_line(), file=stdout)
    return EXIT_OK


def cmd_run_scaling_demo(cfg: Config, args, stdout):
    from .scaling import load_trace, run_scaling_demo

    policy = cfg.scaling_policy()
    trace = load_trace(args.trace) if args.trace else []
    result = run_scaling_demo(policy, trace, tenant=cfg.main_cluster, terminate=args.terminate,
                              backup_count=cfg.backup_count)
    _write(args.out, result.event_log.to_csv(), stdout)
    line = (f"spawns={result.spawn_events} shutdowns={result.event_log.count('shutdown')} "
            f"workers={result.workers} members={result.members}")
    print(line, file=stdout if args.out not in (None, "-") else sys.stderr)
    return EXIT_OK


def bench_rows(cfg: Config, max_members, tcp=None):
    """Wall clock of the cloud run on 1..max_members members."""
    from .simcore import run_simulation

    rows = []
    sim_cfg = cfg.simulation_config()
    if sim_cfg.with_workload:
        from .simcore.workload import warm_up
        warm_up()
    for n in range(1, max_members + 1):
        cluster = build_cluster(cfg, n, tcp)
        try:
            began = time.perf_counter()
            run_simulation(cluster, sim_cfg)
            rows.append((n, time.perf_counter() - began))
        finally:
            _close(cluster)
    return rows


def cmd_bench(cfg: Config, args, stdout):
    from .perfmodel import classify_scalability, fit_params

    cfg.validate_cloud()
    max_members = args.max_members or cfg.bench_members
    if max_members < 1:
        raise ConfigurationError("bench needs at least one member")
    rows = bench_rows(cfg, max_members, args.tcp)
    out = io.StringIO(newline="")
    out.write("n,wall_clock_s\n")
    for n, t in rows:
        out.write(f"{n},{t:.6f}\n")
    _write(args.out, out.getvalue(), stdout)
    label = classify_scalability(rows)
    print(f"classification={label.value}", file=stdout)
    fit = fit_params(rows)
    print(f"fitted={_params_line(fit.params)} residual_norm={fit.residual_norm:.6g} "
          f"degenerate={str(fit.degenerate).lower()}", file=stdout)
    return EXIT_OK


def _params_line(p):
    return (f"k={p.k:.6g} T1={p.T1:.6g} sigma={p.sigma:.6g} c1={p.c1:.6g} g={p.g:.6g} "
            f"theta1={p.theta1:.6g} F={p.F:.6g}")


def cmd_predict(cfg: Config, args, stdout):
    from .perfmodel import prediction_table

    params = cfg.cost_params()
    ns = cfg.instance_counts() if not args.instances else Config(predict_instances=args.instances).instance_counts()
    rows, best = prediction_table(params, ns)
    out = io.StringIO(newline="")
    out.write("n,Tn,Sn,En,P\n")
    for r in rows:
        out.write(f"{r.n},{r.Tn:.6f},{r.Sn:.6f},{r.En:.6f},{r.P:.6f}\n")
    stdout.write(out.getvalue())
    print(f"best_efficiency_n={best}", file=stdout)
    return EXIT_OK


def read_measurements(path):
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header[:2]] != ["n", "Tn"]:
                raise ConfigurationError(f"{path}: expected a header line 'n,Tn'")
            points = []
            for lineno, row in enumerate(reader, 2):
                if not row or not "".join(row).strip():
                    continue
                try:
                    points.append((int(row[0]), float(row[1])))
                except (ValueError, IndexError) as exc:
                    raise ConfigurationError(f"{path}: line {lineno}: bad row {row!r}") from exc
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc}") from exc
    return points


def cmd_fit(cfg: Config, args, stdout):
    from .perfmodel import classify_scalability, fit_params

    points = read_measurements(args.measurements)
    fit = fit_params(points, T1=cfg.model_t1, s=cfg.model_s or 1.0, d=cfg.model_d or 1.0,
                     w=cfg.model_w, N=cfg.model_n, F=cfg.model_f)
    print(_params_line(fit.params), file=stdout)
    print("n,Tn,predicted,relative_residual", file=stdout)
    for (n, t), pred, rel in zip(sorted(points), fit.predicted, fit.relative_residuals):
        print(f"{n},{t:.6f},{pred:.6f},{rel:.6f}", file=stdout)
    print(f"residual_norm={fit.residual_norm:.6g} rank={fit.rank} degenerate={str(fit.degenerate).lower()}",
          file=stdout)
    if len(points) >= 3:
        print(f"classification={classify_scalability(sorted(points)).value}", file=stdout)
    return EXIT_OK


COMMANDS = {
    "run-cloud": cmd_run_cloud,
    "run-mapreduce": cmd_run_mapreduce,
    "run-scaling-demo": cmd_run_scaling_demo,
    "bench": cmd_bench,
    "predict": cmd_predict,
    "fit": cmd_fit,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="properties file (key=value lines)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration key; repeatable")
    common.add_argument("--tcp", metavar="HOST:PORT,...",
                        help="attach member processes at these endpoints instead of in-process members")
    common.add_argument("--seed", type=int, help="workload seed (unsigned 64-bit)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="gridsim", description="Distributed cloud and MapReduce simulation on a data grid.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run-cloud", parents=[common], help="run the cloud simulation and write its report CSV")
    p.add_argument("--out", help="report CSV path (default: stdout)")

    p = sub.add_parser("run-mapreduce", parents=[common], help="run the word-count job")
    p.add_argument("--out", help="counts CSV path")

    p = sub.add_parser("run-scaling-demo", parents=[common], help="replay a health trace through the scaling loops")
    p.add_argument("--trace", help="trace file: one load value per line, or CSV with a metric header")
    p.add_argument("--out", help="event log CSV path (default: stdout)")
    p.add_argument("--terminate", action="store_true", help="tear the tenant down when the trace ends")

    p = sub.add_parser("bench", parents=[common], help="time the cloud run on 1..M members and classify the trend")
    p.add_argument("--max-members", type=int, help="largest member count (default: benchMembers)")
    p.add_argument("--out", help="n,wall_clock_s CSV path (default: stdout)")

    p = sub.add_parser("predict", parents=[common], help="tabulate the cost model from model* keys")
    p.add_argument("--instances", help="comma list of instance counts")

    p = sub.add_parser("fit", parents=[common], help="fit the cost model to an n,Tn CSV")
    p.add_argument("measurements", help="CSV with header n,Tn")
    return parser


def main(argv=None, stdout=None):
    stdout = stdout or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from .mapreduce import JobFailed
    from .perfmodel import ModelDomainError
    from .simcore import DataLossError

    try:
        cfg = _apply_globals(parse_config(args.config, args.set), args)
        return COMMANDS[args.command](cfg, args, stdout)
    except (ConfigurationError, ModelDomainError, TraceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (DataLossError, DataUnavailableError, JobFailed) as exc:
        print(f"data loss: {exc}", file=sys.stderr)
        return EXIT_DATA_LOSS


if __name__ == "__main__":
    sys.exit(main())
