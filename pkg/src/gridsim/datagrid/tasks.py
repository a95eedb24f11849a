"""Named remote tasks and their routing envelopes.

A task is a plain function ``fn(ctx, **args)`` registered under a name.  The
envelope carries only the name and encoded arguments, so the same task can
run on an in-process member or on a member in another process.
"""

import itertools
from dataclasses import dataclass, field

from . import codec
from .errors import UnknownTaskError
from .partitions import MemberId

_registry = {}
_ids = itertools.count()


def task(name):
    def wrap(fn):
        _registry[name] = fn
        return fn
    return wrap


def lookup(name):
    try:
        return _registry[name]
    except KeyError:
        raise UnknownTaskError(name) from None


@dataclass(frozen=True)
class KeyOwner:
    key: object


@dataclass(frozen=True)
class ToMember:
    member: MemberId


@dataclass(frozen=True)
class AllMembers:
    pass


@dataclass(frozen=True)
class TaskEnvelope:
    payload: bytes
    routing: object = AllMembers()
    task_id: int = field(default_factory=lambda: next(_ids))

    @classmethod
    def of(cls, name, routing=AllMembers(), **args):
        return cls(codec.encode({"task": name, "args": args}), routing)

    def unpack(self):
        body = codec.decode(self.payload)
        return body["task"], body["args"]


@dataclass
class TaskContext:
    """What a running task sees: the member it runs on and a grid handle."""

    member: object
    grid: object

    @property
    def member_id(self) -> MemberId:
        return self.member.id


@dataclass
class TaskResult:
    member: MemberId
    value: object = None
    error: BaseException = None

    @property
    def ok(self):
        return self.error is None


def run_payload(payload: bytes, ctx: TaskContext):
    body = codec.decode(payload)
    fn = lookup(body["task"])
    return fn(ctx, **body["args"])
