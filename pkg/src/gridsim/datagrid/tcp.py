"""Static-endpoint TCP transport.

Frames are a 4-byte big-endian length followed by one codec record.  A
member process runs :class:`MemberServer`; the driving process attaches it to
a :class:`~gridsim.datagrid.cluster.Cluster` with :func:`join_tcp`, which
also starts a :class:`GridServer` so tasks running remotely can reach the
grid.  The first frame on every connection is a handshake carrying the
cluster name; a mismatch is rejected.
"""

import argparse
import importlib
import logging
import socket
import socketserver
import struct
import threading
from concurrent.futures import Future, ThreadPoolExecutor

from . import codec, errors
from .cluster import AtomicCell, GridMap
from .partitions import MemberId, partition_id
from .store import LocalStore
from .tasks import TaskContext, run_payload

log = logging.getLogger(__name__)

_LEN = struct.Struct(">I")
MAX_FRAME = 256 * 1024 * 1024

TASK_MODULES = ("gridsim.simcore.tasks", "gridsim.mapreduce")


class RemoteError(errors.GridError):
    pass


def parse_endpoint(text):
    host, sep, port = text.strip().rpartition(":")
    if not sep or not host or not port.isdigit():
        raise errors.ConfigurationError(f"bad endpoint {text!r}, expected host:port")
    return host, int(port)


def parse_endpoints(text):
    endpoints = [parse_endpoint(part) for part in text.split(",") if part.strip()]
    if not endpoints:
        raise errors.ConfigurationError("endpoint list is empty")
    if len(set(endpoints)) != len(endpoints):
        raise errors.ConfigurationError("duplicate endpoint in list")
    return endpoints


def send_frame(sock, obj):
    body = codec.encode(obj)
    sock.sendall(_LEN.pack(len(body)) + body)


def _recv_exact(sock, n):
    chunks = bytearray()
    while len(chunks) < n:
        chunk = sock.recv(n - len(chunks))
        if not chunk:
            raise ConnectionError("connection closed")
        chunks += chunk
    return bytes(chunks)


def recv_frame(sock):
    (n,) = _LEN.unpack(_recv_exact(sock, 4))
    if n > MAX_FRAME:
        raise ConnectionError(f"frame of {n} bytes exceeds limit")
    return codec.decode(_recv_exact(sock, n))


def _error_reply(exc):
    return {"ok": False, "error": type(exc).__name__, "message": str(exc)}


def _raise_remote(reply):
    cls = getattr(errors, reply.get("error", ""), None)
    if isinstance(cls, type) and issubclass(cls, errors.GridError):
        raise cls(reply.get("message", ""))
    raise RemoteError(f"{reply.get('error')}: {reply.get('message')}")


class _Connection:
    """One request/response socket; calls are serialized by a lock."""

    def __init__(self, endpoint, hello, timeout=10.0):
        try:
            self.sock = socket.create_connection(endpoint, timeout=timeout)
        except OSError as exc:
            raise errors.JoinError(f"cannot reach {endpoint[0]}:{endpoint[1]}: {exc}") from exc
        self.sock.settimeout(None)
        self._lock = threading.Lock()
        reply = self.call(hello)
        self.hello_reply = reply

    def call(self, request):
        with self._lock:
            send_frame(self.sock, request)
            reply = recv_frame(self.sock)
        if not reply.get("ok"):
            if reply.get("error") == "ClusterMismatch":
                raise errors.JoinError(reply.get("message", "cluster mismatch"))
            _raise_remote(reply)
        return reply.get("value")

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass


# -- member process side ---------------------------------------------------


class _RemoteSelf:
    """The ``ctx.member`` seen by tasks running inside a member process."""

    def __init__(self, server):
        self._server = server

    @property
    def id(self):
        return self._server.member_id

    def local_get(self, map_name, key):
        p = partition_id(key, self._server.partition_count)
        raw = self._server.store.get(p, map_name, codec.encode(key))
        return None if raw is None else codec.decode(raw)

    def local_entries(self, map_name):
        raw = self._server.store.entries(map_name)
        return {codec.decode(k): codec.decode(v) for k, v in raw.items()}


class RemoteGrid:
    """Grid operations issued from a member process back to the driver."""

    def __init__(self, endpoint, cluster_name):
        self._conn = _Connection(endpoint, {"op": "hello", "cluster": cluster_name})

    def get_map(self, name):
        return GridMap(self, name)

    def get_atomic(self, name):
        return AtomicCell(self, name)

    def _call(self, op, *args):
        return self._conn.call({"op": op, "args": list(args)})

    def map_put(self, name, key, value):
        return self._call("map_put", name, key, value)

    def map_put_if_absent(self, name, key, value):
        return self._call("map_put_if_absent", name, key, value)

    def map_get(self, name, key):
        return self._call("map_get", name, key)

    def map_remove(self, name, key):
        return self._call("map_remove", name, key)

    def map_items(self, name):
        return [tuple(item) for item in self._call("map_items", name)]

    def map_clear(self, name):
        return self._call("map_clear", name)

    def atomic_get(self, name):
        return self._call("atomic_get", name)

    def atomic_set(self, name, value):
        return self._call("atomic_set", name, value)

    def atomic_cas(self, name, expected, new):
        from .cluster import CasResult
        return CasResult(*self._call("atomic_cas", name, expected, new))

    def atomic_get_and_set(self, name, value):
        return self._call("atomic_get_and_set", name, value)

    def atomic_add(self, name, delta):
        return self._call("atomic_add", name, delta)

    def close(self):
        self._conn.close()


_STORE_OPS = ("get", "put", "remove", "export", "install", "drop", "entries", "clear_map", "clear")


class MemberServer:
    """Hosts one member's partitions and executes its tasks."""

    def __init__(self, cluster_name, host="127.0.0.1", port=0):
        self.cluster_name = cluster_name
        self.store = LocalStore()
        self.member_id = None
        self.partition_count = None
        self.grid = None
        self._pool = ThreadPoolExecutor(max_workers=1, thread_name_prefix="member")
        self._server = _ThreadingServer((host, port), _make_handler(self._handle))
        self.address = self._server.server_address

    def serve_forever(self):
        self._server.serve_forever(poll_interval=0.1)

    def start(self):
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread

    def close(self):
        self._server.shutdown()
        self._server.server_close()
        self._pool.shutdown(wait=False, cancel_futures=True)
        if self.grid is not None:
            self.grid.close()

    def _handle(self, request, state):
        op = request.get("op")
        if not state.get("greeted"):
            if request.get("cluster") != self.cluster_name:
                return {"ok": False, "error": "ClusterMismatch",
                        "message": f"member belongs to cluster {self.cluster_name!r}, "
                                   f"not {request.get('cluster')!r}"}
            state["greeted"] = True
            if op == "join":
                self.member_id = MemberId(request["ordinal"], request["label"])
                self.partition_count = request["partition_count"]
                if self.grid is not None:
                    self.grid.close()
                self.grid = RemoteGrid(tuple(request["callback"]), self.cluster_name)
            return {"ok": True, "value": None}
        if op == "store":
            method = request["method"]
            if method not in _STORE_OPS:
                return {"ok": False, "error": "GridError", "message": f"bad store op {method}"}
            return {"ok": True, "value": getattr(self.store, method)(*request["args"])}
        if op == "exec":
            ctx = TaskContext(_RemoteSelf(self), self.grid)
            value = self._pool.submit(run_payload, request["payload"], ctx).result()
            return {"ok": True, "value": value}
        if op == "ping":
            return {"ok": True, "value": str(self.member_id)}
        return {"ok": False, "error": "GridError", "message": f"unknown op {op!r}"}


class _ThreadingServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


def _make_handler(dispatch):
    class Handler(socketserver.BaseRequestHandler):
        def handle(self):
            state = {}
            while True:
                try:
                    request = recv_frame(self.request)
                except (ConnectionError, OSError):
                    return
                try:
                    reply = dispatch(request, state)
                except Exception as exc:
                    log.debug("request %r failed", request.get("op"), exc_info=True)
                    reply = _error_reply(exc)
                try:
                    send_frame(self.request, reply)
                except OSError:
                    return
    return Handler


# -- driver side -----------------------------------------------------------


class RemoteStore:
    def __init__(self, conn):
        self._conn = conn

    def __getattr__(self, method):
        if method not in _STORE_OPS:
            raise AttributeError(method)

        def call(*args, **kwargs):
            if kwargs:
                args = args + tuple(kwargs.values())
            return self._conn.call({"op": "store", "method": method, "args": list(args)})
        return call


class RemoteMember:
    """Driver-side proxy for a member running in another process."""

    lite = False

    def __init__(self, cluster, member_id, endpoint, callback):
        self.cluster = cluster
        self.id = member_id
        self.endpoint = endpoint
        self.alive = True
        self._hello = {"op": "join", "cluster": cluster.name, "ordinal": member_id.ordinal,
                       "label": member_id.label, "partition_count": cluster.partition_count,
                       "callback": list(callback)}
        self._control = _Connection(endpoint, self._hello)
        self.store = RemoteStore(self._control)
        self.store.clear()
        self._exec_pool = ThreadPoolExecutor(max_workers=4, thread_name_prefix=f"rpc-{member_id}")
        self._listeners = []

    def on_membership_change(self, callback):
        self._listeners.append(callback)

    def _notify(self, event, member_id):
        for cb in list(self._listeners):
            cb(event, member_id)

    def run_task(self, payload):
        def call():
            conn = _Connection(self.endpoint, {"op": "hello", "cluster": self.cluster.name})
            try:
                value = conn.call({"op": "exec", "payload": payload})
            except (ConnectionError, OSError) as exc:
                raise errors.MemberLeftError(str(self.id)) from exc
            finally:
                conn.close()
            if not self.alive:
                raise errors.MemberLeftError(str(self.id))
            return value

        try:
            return self._exec_pool.submit(call)
        except RuntimeError:
            fut = Future()
            fut.set_exception(errors.MemberLeftError(str(self.id)))
            return fut

    def local_get(self, map_name, key):
        p = partition_id(key, self.cluster.partition_count)
        raw = self.store.get(p, map_name, codec.encode(key))
        return None if raw is None else codec.decode(raw)

    def local_entries(self, map_name):
        raw = self.store.entries(map_name)
        return {codec.decode(k): codec.decode(v) for k, v in raw.items()}

    def shutdown(self):
        self.alive = False
        self._exec_pool.shutdown(wait=False, cancel_futures=True)
        self._control.close()


_GRID_OPS = ("map_put", "map_put_if_absent", "map_get", "map_remove", "map_items", "map_clear",
             "atomic_get", "atomic_set", "atomic_cas", "atomic_get_and_set", "atomic_add")


class GridServer:
    """Serves grid operations of one cluster to tasks in member processes."""

    def __init__(self, cluster, host="127.0.0.1", port=0):
        self.cluster = cluster
        self._server = _ThreadingServer((host, port), _make_handler(self._handle))
        self.address = self._server.server_address
        threading.Thread(target=self._server.serve_forever, kwargs={"poll_interval": 0.1},
                         daemon=True).start()

    def _handle(self, request, state):
        if not state.get("greeted"):
            if request.get("cluster") != self.cluster.name:
                return {"ok": False, "error": "ClusterMismatch",
                        "message": f"grid server belongs to cluster {self.cluster.name!r}"}
            state["greeted"] = True
            return {"ok": True, "value": None}
        op = request.get("op")
        if op not in _GRID_OPS:
            return {"ok": False, "error": "GridError", "message": f"unknown op {op!r}"}
        value = getattr(self.cluster, op)(*request["args"])
        if op == "atomic_cas":
            value = list(value)
        elif op == "map_items":
            value = [list(item) for item in value]
        return {"ok": True, "value": value}

    def close(self):
        self._server.shutdown()
        self._server.server_close()


def join_tcp(cluster, endpoints, callback_host="127.0.0.1"):
    """Attach member processes at ``endpoints`` (``"h:p,h:p"`` or a list) to ``cluster``."""
    if isinstance(endpoints, str):
        endpoints = parse_endpoints(endpoints)
    else:
        endpoints = [parse_endpoint(e) if isinstance(e, str) else tuple(e) for e in endpoints]
        if not endpoints:
            raise errors.ConfigurationError("endpoint list is empty")
        if len(set(endpoints)) != len(endpoints):
            raise errors.ConfigurationError("duplicate endpoint in list")
    server = getattr(cluster, "_grid_server", None)
    if server is None:
        server = cluster._grid_server = GridServer(cluster, host=callback_host)
    joined = []
    for endpoint in endpoints:
        with cluster._lock:
            member_id = cluster._next_id()
        member = RemoteMember(cluster, member_id, endpoint, server.address)
        cluster._attach(member)
        joined.append(member)
    return joined


def main(argv=None):
    parser = argparse.ArgumentParser(description="Run one data-grid member process.")
    parser.add_argument("--listen", required=True, help="host:port to listen on")
    parser.add_argument("--cluster", default="main")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO)
    for name in TASK_MODULES:
        importlib.import_module(name)
    host, port = parse_endpoint(args.listen)
    server = MemberServer(args.cluster, host, port)
    log.info("member of cluster %r listening on %s:%d", args.cluster, *server.address)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.close()


if __name__ == "__main__":
    main()
