import logging
import re
import shutil

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridsim.datagrid import Cluster, ConfigurationError
from gridsim.mapreduce import (
    Document,
    JobFailed,
    MRJobSpec,
    invocation_curve,
    load_corpus,
    run_map_reduce,
)

from oracles import word_counts


def corpus_texts(folder):
    return [p.read_text(encoding="utf-8") for p in sorted(folder.iterdir())]


@pytest.fixture
def corpus(tmp_path, corpus_dir):
    dest = tmp_path / "corpus"
    shutil.copytree(corpus_dir, dest)
    return dest


def test_single_document_example(make_cluster):
    res = run_map_reduce([Document("d", "a b a")], make_cluster(2))
    assert res.counts == {"a": 2, "b": 1}
    assert (res.map_invocations, res.reduce_invocations) == (1, 2)


@pytest.mark.parametrize("members", [1, 2, 3, 4, 5, 6])
def test_fixture_matches_oracle_on_any_member_count(make_cluster, corpus, members):
    res = run_map_reduce(MRJobSpec(str(corpus)), make_cluster(members))
    assert res.counts == word_counts(corpus_texts(corpus))
    assert res.map_invocations == 3
    assert res.reduce_invocations == len(res.counts)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.text(alphabet="abcAB1 .,;'-_\n\t", max_size=60), max_size=8), st.integers(1, 6))
def test_random_corpora_match_oracle(texts, members):
    c = Cluster("mr-prop", partition_count=31)
    for _ in range(members):
        c.join()
    try:
        res = run_map_reduce([Document(str(i), t) for i, t in enumerate(texts)], c)
        assert res.counts == word_counts(texts)
        assert res.map_invocations == len(texts)
        assert sum(res.maps_per_member.values()) == len(texts)
    finally:
        c.shutdown()


def test_duplicate_files_double_maps_not_reduces(make_cluster, corpus):
    base = run_map_reduce(MRJobSpec(str(corpus)), make_cluster(3))
    for p in list(corpus.iterdir()):
        shutil.copy(p, corpus / ("copy-" + p.name))
    doubled = run_map_reduce(MRJobSpec(str(corpus)), make_cluster(3))
    assert doubled.map_invocations == 2 * base.map_invocations
    assert doubled.reduce_invocations == base.reduce_invocations
    assert doubled.counts == {w: 2 * n for w, n in base.counts.items()}


def test_files_read_takes_lexicographic_prefix(corpus):
    docs = load_corpus(MRJobSpec(str(corpus), files_read=2))
    assert [d.name for d in docs] == ["alpha.txt", "beta.txt"]
    assert len(load_corpus(MRJobSpec(str(corpus)))) == 3


def test_line_limit_truncates(tmp_path):
    (tmp_path / "long.txt").write_text("".join(f"line{i}\n" for i in range(100)))
    (doc,) = load_corpus(MRJobSpec(str(tmp_path), map_reduce_size=10))
    assert doc.text.splitlines() == [f"line{i}" for i in range(10)]


def test_missing_folder_is_configuration_error(tmp_path):
    with pytest.raises(ConfigurationError):
        load_corpus(MRJobSpec(str(tmp_path / "nope")))


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        MRJobSpec("x", files_read=-1)
    with pytest.raises(ConfigurationError):
        MRJobSpec("x", map_reduce_size=0)


def test_unreadable_file_is_skipped(tmp_path, caplog):
    (tmp_path / "a.txt").write_text("ok ok\n")
    (tmp_path / "b.bin").write_bytes(b"\xff\xfe\x00bad")
    with caplog.at_level(logging.WARNING):
        docs = load_corpus(MRJobSpec(str(tmp_path)))
    assert [d.name for d in docs] == ["a.txt"]
    assert "skipping" in caplog.text


def test_empty_corpus(tmp_path, make_cluster):
    res = run_map_reduce(MRJobSpec(str(tmp_path)), make_cluster(2))
    assert (res.counts, res.map_invocations, res.reduce_invocations) == ({}, 0, 0)


def test_late_joiner_does_not_disturb_the_job(make_cluster, corpus):
    c = make_cluster(2, backup_count=1)
    res = run_map_reduce(MRJobSpec(str(corpus)), c, hook=lambda stage, cl: cl.join())
    assert res.counts == word_counts(corpus_texts(corpus))
    assert len(c.member_ids) == 4


def test_member_loss_with_backup_still_completes(make_cluster, corpus):
    c = make_cluster(3, backup_count=1)

    def kill(stage, cl):
        if stage == "map":
            cl.remove(cl.member_ids[-1])
    res = run_map_reduce(MRJobSpec(str(corpus)), c, hook=kill)
    assert res.counts == word_counts(corpus_texts(corpus))


def test_member_loss_without_backup_fails_the_job(make_cluster, corpus):
    c = make_cluster(3, backup_count=0)

    def kill(stage, cl):
        if stage == "map":
            cl.remove(cl.member_ids[-1])
    with pytest.raises(JobFailed):
        run_map_reduce(MRJobSpec(str(corpus)), c, hook=kill)


def test_verbose_does_not_change_results(make_cluster, corpus, caplog):
    quiet = run_map_reduce(MRJobSpec(str(corpus)), make_cluster(3))
    with caplog.at_level(logging.INFO, logger="gridsim.mapreduce"):
        loud = run_map_reduce(MRJobSpec(str(corpus), verbose=True), make_cluster(3))
    assert loud.counts == quiet.counts
    assert (loud.map_invocations, loud.reduce_invocations) == (quiet.map_invocations, quiet.reduce_invocations)
    assert "mapped document" in caplog.text


@pytest.mark.parametrize("docs, members", [(7, 3), (3, 4), (12, 5)])
def test_map_tasks_spread_uniformly(make_cluster, docs, members):
    res = run_map_reduce([Document(str(i), f"w{i}") for i in range(docs)], make_cluster(members))
    per = list(res.maps_per_member.values())
    per += [0] * (members - len(per))  # members with no task never report
    assert max(per) - min(per) <= 1


def test_invocation_curve_is_monotone(make_cluster, corpus):
    rows = invocation_curve(MRJobSpec(str(corpus)), [1, 2, 3, 100], make_cluster(2))
    reduces = [r for _, r, _ in rows]
    assert reduces == sorted(reduces)
    assert reduces[-1] == len(word_counts(corpus_texts(corpus)))
    with pytest.raises(ValueError):
        invocation_curve(MRJobSpec(str(corpus)), [3, 1], make_cluster(1))


def test_csv_and_counters_format(make_cluster):
    res = run_map_reduce([Document("d", "b a b")], make_cluster(1))
    assert res.to_csv() == "word,count\na,1\nb,2\n"
    assert re.fullmatch(r"map_invocations=1 reduce_invocations=2 elapsed_s=\d+\.\d{6}", res.counters_line())
