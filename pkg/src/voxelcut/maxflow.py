"""Exact max-flow / min-cut on an implicit 6-connected voxel grid.

Push-relabel with periodic global relabeling, vectorized over the whole
grid with numpy. The adjacency is never materialized: terminal arcs live
in per-voxel arrays and lattice arcs in three per-axis arrays, so memory
stays linear in the voxel count and every pulse is a handful of
whole-array operations.

Two phases: phase 1 routes the maximum preflow into the sink, phase 2
cancels the preflow backward so it becomes a genuine maximum flow. The
labeling is then the canonical one: a voxel is object iff it is reachable
from the source in the final residual graph, which is the unique
source-minimal minimum cut and therefore independent of the augmentation
order.

All arithmetic is int64. Capacities are audited up front so no residual
or excess can overflow; graphs beyond that headroom are rejected rather
than allowed to wrap.
"""

from __future__ import annotations

import numpy as np

from .errors import CapacityError

# Saturation bound for quantized capacities and energy accumulation.
CAP_MAX = 2**62

_GLOBAL_RELABEL_EVERY = 4


def _check_headroom(cap_src, cap_snk, caps):
    """Reject graphs whose worst-case sums could overflow int64.

    Conservative exact audit in Python ints: with every capacity below
    ``m`` and ``n`` voxels, no excess, residual or accumulated total can
    exceed n * m, and per-arc residuals stay below 2 * m.
    """
    n = int(cap_src.size)
    m = 0
    for arr in (cap_src, cap_snk, *caps):
        if arr.size:
            if int(arr.min()) < 0:
                raise ValueError("capacities must be nonnegative")
            m = max(m, int(arr.max()))
    if m > CAP_MAX:
        raise CapacityError(f"capacity {m} exceeds CAP_MAX = {CAP_MAX}")
    if n * m >= 2**62:
        raise CapacityError(
            "total capacity headroom exceeded "
            f"({n} voxels with max arc capacity {m}); lower capacity_scale"
        )


class _Grid:
    """Mutable solver state over one grid graph."""

    def __init__(self, cap_src, cap_snk, caps):
        self.shape = cap_src.shape
        self.n = int(cap_src.size)
        # Saturate every source arc, then send what can go straight to the
        # sink. fsrc is the flow on source->v (its residual toward the
        # source is fsrc itself), rsnk the remaining v->sink capacity.
        prepush = np.minimum(cap_src, cap_snk)
        self.exc = cap_src - prepush
        self.fsrc = cap_src.copy()
        self.cap_src = cap_src
        self.cap_snk = cap_snk
        self.rsnk = cap_snk - prepush
        self.caps = caps
        self.flows = [np.zeros_like(c) for c in caps]
        self.hgt = np.zeros(self.shape, dtype=np.int64)

    # -- residual helpers ---------------------------------------------------
    # Axis arc a (along +axis): forward residual cap - flow, backward
    # residual cap + flow. Slices written out per axis to keep the hot
    # loop free of fancy indexing.

    def _axis_slices(self, axis):
        src = [slice(None)] * 3
        dst = [slice(None)] * 3
        src[axis] = slice(None, -1)
        dst[axis] = slice(1, None)
        return tuple(src), tuple(dst)

    # -- global relabeling ----------------------------------------------------
    # Height conventions: h(t) = 0 and h(s) = n + 1. A simple residual path
    # from a voxel to the sink has at most n arcs, so any voxel at height
    # n + 1 or above can never reach the sink again.

    @property
    def h_source(self):
        return self.n + 1

    def bfs_heights_to_sink(self):
        """Exact residual BFS distance to the sink; unreachable voxels get n+1."""
        hgt = np.full(self.shape, self.n + 1, dtype=np.int64)
        reached = self.rsnk > 0
        hgt[reached] = 1
        self._bfs_expand(hgt, reached, start=1, toward_node=True)
        return hgt

    def _bfs_expand(self, hgt, reached, start, toward_node):
        """Flood ``reached`` along residual arcs, writing BFS levels into hgt.

        toward_node=True expands the set of voxels that can still reach the
        seeded set (arc direction voxel -> seeded); the labeling BFS uses
        the mirrored direction.
        """
        d = start
        while True:
            nxt = np.zeros(self.shape, dtype=bool)
            for axis in range(3):
                lo, hi = self._axis_slices(axis)
                fwd = (self.caps[axis] - self.flows[axis]) > 0
                bwd = (self.caps[axis] + self.flows[axis]) > 0
                if toward_node:
                    # voxel u reaches via residual u->w into the reached set
                    nxt[lo] |= reached[hi] & fwd
                    nxt[hi] |= reached[lo] & bwd
                else:
                    # reached set expands outward along residual arcs
                    nxt[hi] |= reached[lo] & fwd
                    nxt[lo] |= reached[hi] & bwd
            nxt &= ~reached
            if not nxt.any():
                return reached
            d += 1
            hgt[nxt] = d
            reached |= nxt

    # -- pulses ---------------------------------------------------------------

    def _push_axis(self, axis, active_bound):
        lo, hi = self._axis_slices(axis)
        cap, flow = self.caps[axis], self.flows[axis]
        exc, hgt = self.exc, self.hgt

        res = cap - flow
        m = (exc[lo] > 0) & (hgt[lo] < active_bound) & (hgt[lo] == hgt[hi] + 1) & (res > 0)
        if m.any():
            amt = np.where(m, np.minimum(exc[lo], res), 0)
            exc[lo] -= amt
            exc[hi] += amt
            flow += amt

        res = cap + flow
        m = (exc[hi] > 0) & (hgt[hi] < active_bound) & (hgt[hi] == hgt[lo] + 1) & (res > 0)
        if m.any():
            amt = np.where(m, np.minimum(exc[hi], res), 0)
            exc[hi] -= amt
            exc[lo] += amt
            flow -= amt

    def _push_sink(self):
        m = (self.exc > 0) & (self.hgt == 1) & (self.rsnk > 0)
        if m.any():
            amt = np.where(m, np.minimum(self.exc, self.rsnk), 0)
            self.exc -= amt
            self.rsnk -= amt

    def _push_source(self):
        m = (self.exc > 0) & (self.hgt == self.h_source + 1) & (self.fsrc > 0)
        if m.any():
            amt = np.where(m, np.minimum(self.exc, self.fsrc), 0)
            self.exc -= amt
            self.fsrc -= amt

    def _relabel(self, active, with_sink):
        big = 4 * self.n + 8
        minh = np.full(self.shape, big, dtype=np.int64)
        if with_sink:
            minh[self.rsnk > 0] = 0
        for axis in range(3):
            lo, hi = self._axis_slices(axis)
            fwd = (self.caps[axis] - self.flows[axis]) > 0
            bwd = (self.caps[axis] + self.flows[axis]) > 0
            minh[lo] = np.minimum(minh[lo], np.where(fwd, self.hgt[hi], big))
            minh[hi] = np.minimum(minh[hi], np.where(bwd, self.hgt[lo], big))
        # Return arcs toward the source exist wherever flow was injected;
        # they cap heights at h(s) + 1 and must stay in the relabel minimum
        # for the labeling to remain valid.
        has_return = self.fsrc > 0
        minh[has_return] = np.minimum(minh[has_return], self.h_source)
        # 1 + min over residual targets never decreases a valid height, so a
        # blanket maximum is a correct simultaneous relabel.
        np.maximum(self.hgt, np.where(active, minh + 1, self.hgt), out=self.hgt)

    def run_preflow(self):
        """Phase 1: route the maximum preflow into the sink."""
        self.hgt = self.bfs_heights_to_sink()
        active_bound = self.n + 1

        pulses_since_relabel = 0
        # Generic push-relabel termination bounds the total work; the cap
        # below only guards against an implementation bug looping forever.
        max_pulses = 24 * (self.n + 4) * 6
        for _ in range(max_pulses):
            active = (self.exc > 0) & (self.hgt < active_bound)
            if not active.any():
                return
            if pulses_since_relabel >= _GLOBAL_RELABEL_EVERY:
                self.hgt = self.bfs_heights_to_sink()
                pulses_since_relabel = 0
            self._push_sink()
            self._push_source()
            for axis in range(3):
                self._push_axis(axis, active_bound)
            active = (self.exc > 0) & (self.hgt < active_bound)
            if active.any():
                self._relabel(active, with_sink=True)
            pulses_since_relabel += 1
        raise RuntimeError("push-relabel failed to converge; this is a bug")

    def drain_excess(self):
        """Phase 2: convert the max preflow into a max flow.

        Trapped excess is returned to the source by cancelling the preflow
        backward: first each voxel settles against its own injection, then
        lattice flow entering an excess voxel is cancelled, handing the
        excess to the upstream voxel. Flow into the sink is never touched,
        so the flow value is preserved. Every sweep either settles excess
        at the source or strictly reduces total lattice flow, which bounds
        the loop; in practice a handful of sweeps suffice because excess
        retraces the (short) paths it arrived on.
        """
        while True:
            settled = moved = False
            ret = np.minimum(self.exc, self.fsrc)
            if ret.any():
                self.exc -= ret
                self.fsrc -= ret
                settled = True
            if not self.exc.any():
                return
            for axis in range(3):
                lo, hi = self._axis_slices(axis)
                flow = self.flows[axis]
                # cancel lo->hi flow against excess at hi
                amt = np.minimum(self.exc[hi], np.maximum(flow, 0))
                if amt.any():
                    flow -= amt
                    self.exc[hi] -= amt
                    self.exc[lo] += amt
                    moved = True
                # cancel hi->lo flow against excess at lo
                amt = np.minimum(self.exc[lo], np.maximum(-flow, 0))
                if amt.any():
                    flow += amt
                    self.exc[lo] -= amt
                    self.exc[hi] += amt
                    moved = True
            if not (settled or moved):
                raise RuntimeError("preflow cancellation stalled; this is a bug")

    def source_reachable(self):
        reached = (self.cap_src - self.fsrc) > 0
        self._bfs_expand(
            np.zeros(self.shape, dtype=np.int64), reached, start=0, toward_node=False
        )
        return reached


def solve_grid_maxflow(cap_src, cap_snk, caps):
    """Solve the s-t min cut of a 6-connected grid graph.

    Args:
        cap_src: (nx, ny, nz) int64 source->voxel capacities.
        cap_snk: (nx, ny, nz) int64 voxel->sink capacities.
        caps: three arrays of symmetric lattice capacities along +x, +y, +z,
            with shapes (nx-1, ny, nz), (nx, ny-1, nz), (nx, ny, nz-1).

    Returns:
        (labels, flow): labels is a bool array marking the source side of
        the canonical (source-minimal) minimum cut; flow is the exact
        max-flow value as a Python int.
    """
    cap_src = np.ascontiguousarray(cap_src, dtype=np.int64)
    cap_snk = np.ascontiguousarray(cap_snk, dtype=np.int64)
    caps = [np.ascontiguousarray(c, dtype=np.int64) for c in caps]
    if cap_src.shape != cap_snk.shape:
        raise ValueError("terminal capacity shapes differ")
    for axis, c in enumerate(caps):
        want = list(cap_src.shape)
        want[axis] = max(want[axis] - 1, 0)
        if list(c.shape) != want:
            raise ValueError(
                f"axis-{axis} capacity shape {c.shape} does not match grid {cap_src.shape}"
            )
    _check_headroom(cap_src, cap_snk, caps)

    grid = _Grid(cap_src, cap_snk, caps)
    grid.run_preflow()
    if grid.exc.any():
        grid.drain_excess()

    flow_out = int(grid.fsrc.sum(dtype=np.int64))
    flow_in = int(cap_snk.sum(dtype=np.int64) - grid.rsnk.sum(dtype=np.int64))
    if flow_out != flow_in or grid.exc.any():
        raise RuntimeError("flow conservation violated; this is a bug")

    labels = grid.source_reachable()
    return labels, flow_in
