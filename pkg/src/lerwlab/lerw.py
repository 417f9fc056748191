"""Chronological loop erasure and LERW excursion assembly."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels, rng as _rng
from .graph import GridDomain
from .walk import WalkError, _conditioned, sample_excursion


@dataclass
class SimplePath:
    """Self-avoiding vertex sequence traced from source to sink."""
    vertices: np.ndarray
    source: int
    sink: int

    def __len__(self) -> int:
        return len(self.vertices)

    def points(self, graph) -> np.ndarray:
        return graph.points[self.vertices]

    def is_self_avoiding(self) -> bool:
        return len(set(map(int, self.vertices))) == len(self.vertices)


def loop_erase(w) -> np.ndarray:
    """Erase loops in chronological order.

    Follows the last-visit recursion: starting from w[0], repeatedly jump
    to the entry after the final occurrence of the current vertex.  The
    output is self-avoiding and every consecutive pair is a consecutive
    pair of the input.
    """
    w = np.asarray(w, dtype=np.int64)
    if len(w) == 0:
        raise WalkError("cannot loop-erase an empty sequence")
    last = {}
    for i, v in enumerate(w):
        last[int(v)] = i
    out = [int(w[0])]
    n = len(w) - 1
    while True:
        s = last[out[-1]]
        if s >= n:
            break
        out.append(int(w[s + 1]))
    return np.asarray(out, dtype=np.int64)


def reverse(w) -> np.ndarray:
    """Time reversal of a vertex sequence."""
    return np.asarray(w, dtype=np.int64)[::-1].copy()


def lerw_excursion(d: GridDomain, rng=0, v0=None, ve=None,
                   order: str = "anti") -> SimplePath:
    """LERW between the marked boundary vertices.

    order='anti' (default) erases loops of the time-reversed excursion and
    returns the simple path from ve to v0, the curve whose driving function
    is studied; order='chrono' erases forward and returns the path from v0
    to ve (used by the reversal-identity test).
    """
    path = sample_excursion(d, rng, v0=v0, ve=ve)
    if order == "anti":
        seq = loop_erase(reverse(path.vertices))
    elif order == "chrono":
        seq = loop_erase(path.vertices)
    else:
        raise ValueError("order must be 'anti' or 'chrono'")
    return SimplePath(seq, int(seq[0]), int(seq[-1]))


def lerw_batch(d: GridDomain, n_samples: int, rng=0, v0=None, ve=None,
               order: str = "anti", reverse_output: bool = False,
               chunk: int = 100_000) -> list[bytes]:
    """Sample many LERW excursions and return each erased path encoded as
    bytes of its int32 vertex ids (compact keys for distribution tests)."""
    ck = _conditioned(d, ve)
    v0_sector = d.v0_sector if v0 is None else d.resolve_sector(v0)
    gen = _rng.generator(rng)
    nbd, w = ck.start_distribution(("sector", v0_sector))
    g = d.graph
    v0_vertex = d.sector_vertex(v0_sector)
    pos = np.full(g.n_vertices, -1, dtype=np.int64)

    out: list[bytes] = []
    remaining = n_samples
    while remaining > 0:
        nc = min(chunk, remaining)
        remaining -= nc
        firsts = gen.choice(nbd, size=nc, p=w).astype(np.int64)
        seed = int(gen.integers(0, 2**32 - 1))
        raw_cap, flat_cap = 1 << 16, nc * 64
        while True:
            raw_buf = np.empty(raw_cap, dtype=np.int64)
            erase_buf = np.empty(raw_cap, dtype=np.int64)
            out_flat = np.empty(flat_cap, dtype=np.int64)
            out_offsets = np.zeros(nc + 1, dtype=np.int64)
            total = _kernels.lerw_batch(g.indptr, g.targets, ck.cdf, ck.absorbing,
                                        firsts, seed, nc,
                                        order == "anti", pos, out_flat, out_offsets,
                                        raw_buf, erase_buf)
            if total >= 0:
                break
            raw_cap *= 4
            flat_cap *= 4
        for i in range(nc):
            seq = out_flat[out_offsets[i]:out_offsets[i + 1]]
            if order == "anti":
                full = np.concatenate([seq, [v0_vertex]])
            else:
                full = np.concatenate([[v0_vertex], seq])
            if reverse_output:
                full = full[::-1]
            out.append(full.astype(np.int32).tobytes())
    return out


def simple_path_to_csv(path: SimplePath, graph, fname) -> None:
    pts = path.points(graph)
    with open(fname, "w") as f:
        f.write("index,x,y\n")
        for k, z in enumerate(pts):
            f.write(f"{k},{z.real:.17g},{z.imag:.17g}\n")
