"""Numbered acceptance criteria; a PASS/FAIL/SKIP line for each is printed after the run.

Run alone with ``python3 -m pytest tests/test_acceptance.py`` (or execute this file).
Every criterion also checks its own runtime budget.
"""

import math
import os
import shutil
import time
from contextlib import contextmanager

import pytest

from gridsim.datagrid import Cluster
from gridsim.mapreduce import MRJobSpec, run_map_reduce
from gridsim.partition import partition_final, partition_init
from gridsim.perfmodel import (
    CostParams,
    Scalability,
    classify_scalability,
    fit_params,
    percent_improvement,
    percent_improvement_expanded,
    predict_time,
    raw_time,
    speedup,
)
from gridsim.scaling import RandomChooser, ScalingPolicy, explore, run_scaling_demo
from gridsim.scaling.eventlog import SPAWN
from gridsim.simcore import MATCHMAKING, ROUND_ROBIN, SimulationConfig, run_simulation
from gridsim.simcore.workload import warm_up

from oracles import word_counts
from scaling_world import check_single, one_decision_world

LOADED = [(1, 1259.743), (2, 120.009), (3, 96.053), (6, 104.440)]
UNLOADED = [(1, 20.914), (2, 16.726), (3, 14.432), (6, 20.307)]


@contextmanager
def within(budget):
    began = time.perf_counter()
    yield
    elapsed = time.perf_counter() - began
    assert elapsed < budget, f"took {elapsed:.1f} s, budget {budget} s"


def cluster_of(n, name, backup_count=0):
    c = Cluster(name, backup_count=backup_count)
    for _ in range(n):
        c.join()
    return c


def report_csv(n, cfg, name, hook=None, backup_count=0):
    c = cluster_of(n, name, backup_count)
    try:
        csv = run_simulation(c, cfg, hook=hook).to_csv()
        return csv, c.data_lost
    finally:
        c.shutdown()


@pytest.mark.criterion(1, "scheduling reports identical on 1-4 members", 60)
def test_criterion_1_scheduling_oracle_equivalence():
    warm_up()
    with within(60):
        for vms, cloudlets in [(100, 200), (200, 400)]:
            for workload in (False, True):
                for scheduler in (ROUND_ROBIN, MATCHMAKING):
                    cfg = SimulationConfig(num_users=200, num_vms=vms, num_cloudlets=cloudlets,
                                           with_workload=workload, scheduler=scheduler)
                    tag = f"acc1-{vms}-{workload}-{scheduler}"
                    baseline, _ = report_csv(1, cfg, tag)
                    for n in (2, 3, 4):
                        assert report_csv(n, cfg, f"{tag}-{n}")[0] == baseline, (vms, workload, scheduler, n)


@pytest.mark.criterion(2, "partition ranges tile [0, N) exactly", 10)
def test_criterion_2_partition_tiling():
    with within(10):
        for parallel in range(1, 33):
            for total in range(1, 10001):
                covered = 0
                for o in range(parallel):
                    lo, hi = partition_init(total, o, parallel), partition_final(total, o, parallel)
                    assert lo == covered or lo == hi == total
                    covered = hi
                assert covered == total


@pytest.mark.criterion(3, "exactly one node acts per scaling decision", 30)
def test_criterion_3_single_actor_scaling():
    with within(30):
        for n in range(1, 5):
            explore(one_decision_world(n), check_single(SPAWN))
        for trial in range(1000):
            sched, world = one_decision_world(1 + trial % 16)(RandomChooser(trial))
            sched.run()
            sched.close()
            check_single(SPAWN)(world)
        policy = ScalingPolicy()
        for seed in range(20):
            trace = [0.20] * 30 + [0.01] * 20 + [0.9] * 30
            log = run_scaling_demo(policy, trace, chooser=RandomChooser(seed)).event_log
            assert all(e.member_count_after - 1 <= policy.max_instances for e in log.events)
            assert log.min_gap() >= policy.time_between_scaling_decisions


@pytest.mark.criterion(4, "constant 0.20 load scales to exactly 3 workers", 5)
def test_criterion_4_scaling_demo_reproduction():
    with within(5):
        result = run_scaling_demo(ScalingPolicy(max_threshold=0.15, min_threshold=0.02), [0.20] * 100)
        assert result.spawn_events == 3
        assert result.workers == 3 and result.max_workers == 3


@pytest.mark.criterion(5, "word counts match the sequential oracle", 20)
def test_criterion_5_mapreduce_oracle(tmp_path, corpus_dir):
    with within(20):
        folder = tmp_path / "corpus"
        shutil.copytree(corpus_dir, folder)
        files = sorted(folder.iterdir())
        expected = word_counts([p.read_text(encoding="utf-8") for p in files])
        for n in range(1, 5):
            c = cluster_of(n, f"acc5-{n}")
            try:
                res = run_map_reduce(MRJobSpec(str(folder)), c)
            finally:
                c.shutdown()
            assert res.counts == expected
            assert res.map_invocations == len(files) >= 3
        for p in files:
            shutil.copy(p, folder / f"dup-{p.name}")
        c = cluster_of(2, "acc5-dup")
        try:
            doubled = run_map_reduce(MRJobSpec(str(folder)), c)
        finally:
            c.shutdown()
        assert doubled.map_invocations == 2 * len(files)
        assert doubled.reduce_invocations == res.reduce_invocations


@pytest.mark.criterion(6, "cost model fitted to the published loaded column", 1)
def test_criterion_6_perfmodel_reproduction():
    with within(1):
        sn = speedup(1247.400, 120.009)
        assert sn == pytest.approx(10.39, abs=0.01)
        assert percent_improvement(sn) == pytest.approx(90.4, abs=0.1)
        fit = fit_params(LOADED)
        worst = fit.max_relative_residual
        assert worst < 0.25, f"largest per-point relative residual {worst:.1%}"


@pytest.mark.criterion(7, "scalability patterns classified", 1)
def test_criterion_7_classifier():
    with within(1):
        assert classify_scalability(LOADED) == Scalability.POSITIVE_THEN_NEGATIVE
        assert classify_scalability(UNLOADED) == Scalability.POSITIVE_THEN_NEGATIVE
        assert classify_scalability([(n, 100.0 / n) for n in range(1, 7)]) == Scalability.POSITIVE
        assert classify_scalability([(n, 10.0 * n) for n in range(1, 7)]) == Scalability.NEGATIVE


@pytest.mark.criterion(8, "loaded run on 4 members at most 0.7x the 1-member wall clock", 180)
def test_criterion_8_speedup_trend():
    cores = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count()
    if (cores or 1) < 4:
        pytest.skip(f"needs >= 4 cores, host has {cores}")
    warm_up()
    cfg = SimulationConfig(num_users=200, num_vms=200, num_cloudlets=400, with_workload=True)
    with within(180):
        times = {}
        for n in (1, 4):
            c = cluster_of(n, f"acc8-{n}")
            try:
                began = time.perf_counter()
                run_simulation(c, cfg)
                times[n] = time.perf_counter() - began
            finally:
                c.shutdown()
        assert times[4] <= 0.7 * times[1], times


@pytest.mark.criterion(9, "Amdahl bound, identity and improvement consistency", 1)
def test_criterion_9_model_properties():
    with within(1):
        for k in (0.0, 0.5, 0.9, 1.0):
            p = CostParams(k=k, T1=100.0)
            assert predict_time(p, 1) == 100.0
            bound = math.inf if k == 1 else 1 / (1 - k)
            for n in (1, 2, 16, 1000, 10**6):
                assert speedup(p.T1, predict_time(p, n)) <= bound * (1 + 1e-12)
        for k in (0.1, 0.6, 0.95):
            for n in (1, 2, 3, 7, 64):
                p = CostParams(k=k, T1=50.0, s=2.0, d=1.5, w=4.0, F=0.3, sigma=0.2, c1=0.01, g=0.02, theta1=0.01)
                assert raw_time(p, n) > 0
                direct = percent_improvement(speedup(p.T1, predict_time(p, n)))
                assert direct == pytest.approx(percent_improvement_expanded(p, n), rel=1e-9, abs=1e-12)


@pytest.mark.criterion(10, "member killed mid-run with a backup changes nothing", 30)
def test_criterion_10_fault_tolerance():
    warm_up()
    cfg = SimulationConfig(num_users=200, num_vms=100, num_cloudlets=200, with_workload=True)

    def kill(stage, ctx):
        if stage == "workload":
            ctx.cluster.remove(ctx.cluster.member_ids[-1])

    with within(30):
        baseline, _ = report_csv(1, cfg, "acc10-base")
        killed, lost = report_csv(3, cfg, "acc10-kill", hook=kill, backup_count=1)
        assert not lost
        assert killed == baseline


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
