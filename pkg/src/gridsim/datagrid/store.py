"""Per-member partition storage.

Entries are held as encoded bytes, keyed ``partition -> map name -> key``.
Primary and backup copies live in separate tables so a member can be the
owner of one partition and the replica holder of another.
"""

import threading


class LocalStore:
    def __init__(self):
        self._tables = {False: {}, True: {}}
        self._lock = threading.Lock()

    def _part(self, partition, backup, create=False):
        table = self._tables[backup]
        part = table.get(partition)
        if part is None and create:
            part = table[partition] = {}
        return part

    def get(self, partition, name, key, backup=False):
        with self._lock:
            part = self._part(partition, backup)
            if part is None:
                return None
            return part.get(name, {}).get(key)

    def put(self, partition, name, key, value, backup=False):
        with self._lock:
            entries = self._part(partition, backup, create=True).setdefault(name, {})
            previous = entries.get(key)
            entries[key] = value
            return previous

    def remove(self, partition, name, key, backup=False):
        with self._lock:
            part = self._part(partition, backup)
            if part is None or name not in part:
                return None
            return part[name].pop(key, None)

    def export(self, partition, backup=False):
        with self._lock:
            part = self._part(partition, backup)
            if part is None:
                return {}
            return {name: dict(entries) for name, entries in part.items()}

    def install(self, partition, data, backup=False):
        with self._lock:
            self._tables[backup][partition] = {
                name: dict(entries) for name, entries in data.items()
            }

    def drop(self, partition, backup=False):
        with self._lock:
            self._tables[backup].pop(partition, None)

    def entries(self, name, partitions=None):
        """Primary entries of one map, optionally limited to ``partitions``."""
        with self._lock:
            out = {}
            for p, part in self._tables[False].items():
                if partitions is not None and p not in partitions:
                    continue
                out.update(part.get(name, {}))
            return out

    def clear_map(self, name):
        with self._lock:
            for table in self._tables.values():
                for part in table.values():
                    part.pop(name, None)

    def clear(self):
        with self._lock:
            self._tables = {False: {}, True: {}}
