"""Distributed cloud and MapReduce simulation on a small in-memory data grid.

Subpackages: ``datagrid`` (membership, partitioned maps, atomics, tasks),
``simcore`` (cloud simulation), ``scaling`` (elastic control plane),
plus ``partition``, ``mapreduce``, ``perfmodel``, ``config`` and ``cli``.
"""

__version__ = "0.1.0"
