"""Set operations and exact volume on unions of convex polyhedra."""
from __future__ import annotations

import numpy as np

from .poly import (
    TAU_GEOM,
    ConvexPolyhedron,
    GeometryError,
    PolyUnion,
    boxes_disjoint,
)


def bool_intersect(a: PolyUnion, b: PolyUnion, tol: float = TAU_GEOM) -> PolyUnion:
    """Pairwise intersection of union members; empty results are valid."""
    out = []
    for p in a:
        for q in b:
            if boxes_disjoint(p.bbox, q.bbox, tol):
                continue
            r = p.intersect(q, tol)
            if r is not None:
                out.append(r)
    return PolyUnion(out)


def bool_union(unions) -> PolyUnion:
    """Union of unions: plain member concatenation (set semantics)."""
    out = []
    for u in unions:
        out.extend(u.polys)
    return PolyUnion(out)


def poly_diff(
    a: ConvexPolyhedron, b: ConvexPolyhedron, shift: float, tol: float = TAU_GEOM
) -> list[ConvexPolyhedron]:
    """Fan decomposition of closure(a minus b) into disjoint convex pieces.

    Each facet of b contributes the piece of `a` beyond that facet and inside
    all previously-processed facets.  `shift` moves the complement planes:
    positive keeps the result strictly outside b (under convention), negative
    lets it overlap the boundary band (over convention).
    """
    slack = a.vertices @ b.halfspaces[:, :3].T - b.halfspaces[:, 3]
    beyond = slack > tol
    if np.any(np.all(beyond, axis=0)):
        return [a]  # some facet of b separates it from a entirely
    pieces: list[ConvexPolyhedron] = []
    prev: list[np.ndarray] = []
    for i, row in enumerate(b.halfspaces):
        if not beyond[:, i].any():
            # a is entirely on the inner side: no piece, constraint redundant
            continue
        n, off = row[:3], row[3]
        piece = a.clip(-n, -(off + shift), tol)
        if piece is not None:
            piece = piece.clip_many(np.array(prev), tol) if prev else piece
        if piece is not None:
            pieces.append(piece)
        prev.append(row)
    return pieces


def bool_diff(
    a: PolyUnion, b: PolyUnion, mode: str = "under", tol: float = TAU_GEOM
) -> PolyUnion:
    """Closed difference a minus b with a declared closure convention.

    mode="under": pieces are kept strictly outside b (complement planes shifted
    by +tau), so the result is a subset of the exact difference.
    mode="over": planes shifted by -tau, so the result covers the closure.
    """
    if mode not in ("under", "over"):
        raise GeometryError(f"unknown diff mode {mode!r}")
    shift = tol if mode == "under" else -tol
    current = list(a.polys)
    for q in b:
        nxt: list[ConvexPolyhedron] = []
        for p in current:
            if boxes_disjoint(p.bbox, q.bbox, tol):
                nxt.append(p)
            else:
                nxt.extend(poly_diff(p, q, shift, tol))
        current = nxt
    return PolyUnion(current)


def union_volume(u: PolyUnion, tol: float = TAU_GEOM) -> float:
    """Exact measure of a union: sweep members, counting overlap once.

    vol(U) = sum_i vol(P_i minus union of earlier members), with each
    difference decomposed into disjoint convex pieces measured by their hulls.
    The result is independent of member order up to floating point.
    """
    total = 0.0
    done: list[ConvexPolyhedron] = []
    for p in u:
        if np.any(~np.isfinite(p.bbox)):
            raise GeometryError("volume of an unbounded member is undefined")
        pieces = [p]
        for q in done:
            if boxes_disjoint(p.bbox, q.bbox):
                continue
            nxt: list[ConvexPolyhedron] = []
            for piece in pieces:
                if boxes_disjoint(piece.bbox, q.bbox):
                    nxt.append(piece)
                else:
                    nxt.extend(poly_diff(piece, q, 0.0, tol))
            pieces = nxt
            if not pieces:
                break
        total += sum(piece.volume for piece in pieces)
        done.append(p)
    return total
