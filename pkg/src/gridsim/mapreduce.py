"""Word-count MapReduce over the data grid.

One map task per document, with documents dealt round-robin over the
members; each member pre-aggregates its map output (combiner).  The driver
then routes every partial count to the member owning that word's partition,
where one reduce runs per distinct word.
"""

import io
import logging
import os
import time
from collections import Counter, defaultdict
from dataclasses import dataclass, field

from .datagrid import (
    ConfigurationError,
    DataUnavailableError,
    GridError,
    MemberLeftError,
    TaskEnvelope,
    ToMember,
    gather,
    task,
)

log = logging.getLogger(__name__)

DOCS = "mr.docs"
COUNTS = "mr.counts"


class JobFailed(GridError):
    pass


@dataclass(frozen=True)
class MRJobSpec:
    load_folder: str
    files_read: int = 0
    map_reduce_size: int = 100000
    verbose: bool = False

    def __post_init__(self):
        if self.files_read < 0:
            raise ConfigurationError("filesRead must be non-negative")
        if self.map_reduce_size < 1:
            raise ConfigurationError("mapReduceSize must be at least 1")


@dataclass(frozen=True)
class Document:
    name: str
    text: str


@dataclass
class MRResult:
    counts: dict
    map_invocations: int
    reduce_invocations: int
    elapsed: float = 0.0
    maps_per_member: dict = field(default_factory=dict)

    def to_csv(self):
        out = io.StringIO(newline="")
        out.write("word,count\n")
        for word in sorted(self.counts):
            out.write(f"{word},{self.counts[word]}\n")
        return out.getvalue()

    def counters_line(self):
        return (f"map_invocations={self.map_invocations} reduce_invocations={self.reduce_invocations} "
                f"elapsed_s={self.elapsed:.6f}")


def _strip_edges(token):
    start, end = 0, len(token)
    while start < end and not token[start].isalnum():
        start += 1
    while end > start and not token[end - 1].isalnum():
        end -= 1
    return token[start:end]


def tokenize(text):
    """Whitespace split, lowercase, trim non-alphanumeric characters at both ends."""
    words = []
    for raw in text.split():
        word = _strip_edges(raw.lower())
        if word:
            words.append(word)
    return words


def load_corpus(spec: MRJobSpec):
    if not os.path.isdir(spec.load_folder):
        raise ConfigurationError(f"load folder {spec.load_folder!r} does not exist")
    names = sorted(n for n in os.listdir(spec.load_folder)
                   if os.path.isfile(os.path.join(spec.load_folder, n)))
    if spec.files_read:
        names = names[:spec.files_read]
    docs = []
    for name in names:
        path = os.path.join(spec.load_folder, name)
        try:
            with open(path, encoding="utf-8") as fh:
                lines = []
                for i, line in enumerate(fh):
                    if i >= spec.map_reduce_size:
                        break
                    lines.append(line)
        except (OSError, UnicodeDecodeError) as exc:
            log.warning("skipping unreadable file %s: %s", path, exc)
            continue
        docs.append(Document(name, "".join(lines)))
    return docs


def word_count_oracle(documents):
    """Single-pass sequential reference count."""
    counts = Counter()
    for doc in documents:
        counts.update(tokenize(doc.text))
    return dict(counts)


@task("mapreduce.map")
def map_documents(ctx, doc_keys, verbose=False):
    """Map each document and combine locally; returns ``[partials, map_calls]``."""
    docs = ctx.grid.get_map(DOCS)
    combined = Counter()
    for key in doc_keys:
        if not getattr(ctx.member, "alive", True):
            raise MemberLeftError(str(ctx.member_id))
        text = docs.get(key)
        if text is None:
            raise DataUnavailableError(f"document {key!r} is missing from the grid")
        combined.update(tokenize(text))
        if verbose:
            log.info("member %s mapped document %s", ctx.member_id, key)
    return [dict(combined), len(doc_keys)]


@task("mapreduce.reduce")
def reduce_words(ctx, partials, verbose=False):
    """One reduce per word: sum the partial counts routed to this key owner."""
    counts = ctx.grid.get_map(COUNTS)
    totals = {}
    for word, values in partials.items():
        totals[word] = sum(values)
        counts.put(word, totals[word])
    if verbose:
        log.info("member %s reduced %d words", ctx.member_id, len(totals))
    return totals


def _collect(cluster, jobs, task_name, verbose):
    """Gather ``[(args, (member, future))]``; re-run lost tasks on the master."""
    values = []
    pending = list(zip([a for a, _ in jobs], gather([j for _, j in jobs])))
    while pending:
        args, res = pending.pop(0)
        if res.ok:
            values.append((res.member, res.value))
            continue
        if isinstance(res.error, DataUnavailableError) or cluster.data_lost:
            raise JobFailed(f"job lost data: {res.error}") from res.error
        if not isinstance(res.error, MemberLeftError):
            raise res.error
        if cluster.backup_count == 0:
            raise JobFailed(f"member {res.member} left mid-job and there are no backups")
        master = cluster.master
        if master is None:
            raise JobFailed("every member left")
        env = TaskEnvelope.of(task_name, ToMember(master.id), verbose=verbose, **args)
        pending.append((args, gather(cluster.submit(env))[0]))
    return values


def _check_losses(cluster, started_with):
    if cluster.data_lost:
        raise JobFailed(f"cluster {cluster.name!r} lost partitions mid-job")
    left = set(started_with) - set(cluster.member_ids)
    if left and cluster.backup_count == 0:
        raise JobFailed(f"{len(left)} member(s) left mid-job and there are no backups")


def run_map_reduce(spec_or_docs, cluster, hook=None) -> MRResult:
    """Run the job on ``cluster``; ``hook(stage, cluster)`` fires after each phase is shipped."""
    began = time.perf_counter()
    verbose = False
    if isinstance(spec_or_docs, MRJobSpec):
        verbose = spec_or_docs.verbose
        documents = load_corpus(spec_or_docs)
    else:
        documents = list(spec_or_docs)
    members = cluster.member_ids
    if not members:
        raise ConfigurationError("the cluster has no members")
    for name in (DOCS, COUNTS):
        cluster.map_clear(name)
    try:
        docs = cluster.get_map(DOCS)
        for i, doc in enumerate(documents):
            docs.put(i, doc.text)

        assigned = defaultdict(list)
        for i in range(len(documents)):
            assigned[members[i % len(members)]].append(i)
        jobs = []
        for member_id in members:
            if assigned[member_id]:
                args = {"doc_keys": assigned[member_id]}
                env = TaskEnvelope.of("mapreduce.map", ToMember(member_id), verbose=verbose, **args)
                jobs.append((args, cluster.submit(env)[0]))
        if hook is not None:
            hook("map", cluster)
        mapped = _collect(cluster, jobs, "mapreduce.map", verbose)
        _check_losses(cluster, members)
        map_calls = sum(calls for _, (_, calls) in mapped)
        per_member = Counter()
        for member_id, (_, calls) in mapped:
            per_member[member_id] += calls

        by_owner = defaultdict(lambda: defaultdict(list))
        for _, (partials, _) in mapped:
            for word, n in partials.items():
                by_owner[cluster.partition_owner(word)][word].append(n)
        jobs = []
        for owner in sorted(by_owner):
            args = {"partials": {w: v for w, v in by_owner[owner].items()}}
            env = TaskEnvelope.of("mapreduce.reduce", ToMember(owner), verbose=verbose, **args)
            jobs.append((args, cluster.submit(env)[0]))
        if hook is not None:
            hook("reduce", cluster)
        counts = {}
        for _, totals in _collect(cluster, jobs, "mapreduce.reduce", verbose):
            counts.update(totals)
        _check_losses(cluster, members)
    finally:
        cluster.map_clear(DOCS)
        cluster.map_clear(COUNTS)
    return MRResult(counts, map_calls, len(counts), time.perf_counter() - began, dict(per_member))


def invocation_curve(spec: MRJobSpec, sizes, cluster):
    """``[(size, reduce_invocations, elapsed)]`` for growing line limits."""
    sizes = list(sizes)
    if any(b < a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("sizes must be nondecreasing")
    rows = []
    for size in sizes:
        run_spec = MRJobSpec(spec.load_folder, spec.files_read, size, spec.verbose)
        res = run_map_reduce(run_spec, cluster)
        rows.append((size, res.reduce_invocations, res.elapsed))
    return rows
