import os

import pytest

from gridsim.datagrid import Cluster

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")
CORPUS = os.path.join(FIXTURES, "corpus")


@pytest.fixture
def make_cluster():
    """Factory for in-process clusters, all shut down at teardown."""
    made = []
    counter = [0]

    def make(members=1, backup_count=0, partition_count=271, name=None):
        counter[0] += 1
        cluster = Cluster(name or f"test-{counter[0]}", partition_count=partition_count,
                          backup_count=backup_count)
        for _ in range(members):
            cluster.join()
        made.append(cluster)
        return cluster

    yield make
    for cluster in made:
        cluster.shutdown()


@pytest.fixture
def corpus_dir():
    return CORPUS


# -- acceptance report ------------------------------------------------------------------

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title, budget): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title, budget = mark.args
    if rep.when == "call" or rep.outcome != "passed":
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[rep.outcome]
        reason = ""
        if rep.skipped and isinstance(rep.longrepr, tuple):
            reason = rep.longrepr[2]
        elif rep.failed:
            crash = getattr(rep.longrepr, "reprcrash", None)
            reason = crash.message.splitlines()[0] if crash else ""
        _criteria[number] = (status, title, rep.duration, budget, reason)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        status, title, duration, budget, reason = _criteria[number]
        line = f"criterion {number:>2}: {status}  {title}  ({duration:.2f} s, budget {budget:g} s)"
        if reason:
            line += f"  -- {reason}"
        terminalreporter.write_line(line)
