"""Tensor Gauss rules on boxes, polar rules on balls, and per-cell node sets.

All cell rules return normalized weights (summing to one), so a weighted
sum is a cell average.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from .errors import ParameterError
from .geometry import Cell, ReferenceCell


@lru_cache(maxsize=None)
def gauss_legendre(order: int):
    """Gauss-Legendre nodes/weights on (0, 1)."""
    x, w = np.polynomial.legendre.leggauss(order)
    return (x + 1) / 2, w / 2


@lru_cache(maxsize=None)
def _unit_box_rule(order: int, n: int):
    x, w = gauss_legendre(order)
    nodes = np.array(list(itertools.product(x - 0.5, repeat=n)))
    weights = np.array([math.prod(c) for c in itertools.product(w, repeat=n)])
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def box_rule(lo, hi, order: int):
    """Tensor Gauss rule on the box ``(lo, hi)`` with absolute weights."""
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    nodes, weights = _unit_box_rule(order, lo.size)
    side = hi - lo
    return (lo + hi) / 2 + nodes * side, weights * float(np.prod(side))


def composite_box_rule(lo, hi, order: int, pieces: int):
    """Gauss rule of ``order`` on each of ``pieces**n`` congruent sub-boxes."""
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    n = lo.size
    h = (hi - lo) / pieces
    base, bw = _unit_box_rule(order, n)
    idx = np.array(list(itertools.product(range(pieces), repeat=n)), dtype=float)
    centers = lo + (idx + 0.5) * h
    nodes = (centers[:, None, :] + base[None, :, :] * h).reshape(-1, n)
    weights = np.tile(bw * float(np.prod(h)), len(centers))
    return nodes, weights


def adaptive_box_rule(lo, hi, order: int, points, depth: int):
    """Dyadic refinement of a box rule toward each of ``points`` (absolute weights)."""
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    pieces = [(lo, hi)]
    for pt in points:
        pt = np.asarray(pt, dtype=float)
        pieces = [q for a, b in pieces for q in _split_toward(a, b, pt, depth)]
    rules = [box_rule(a, b, order) for a, b in pieces]
    return np.concatenate([r[0] for r in rules]), np.concatenate([r[1] for r in rules])


def _split_toward(lo, hi, point, depth):
    inside = np.all(point >= lo - 1e-14) and np.all(point <= hi + 1e-14)
    if depth == 0 or not inside:
        return [(lo, hi)]
    mid = (lo + hi) / 2
    out = []
    for corner in itertools.product((0, 1), repeat=lo.size):
        c = np.array(corner, dtype=bool)
        out.extend(_split_toward(np.where(c, mid, lo), np.where(c, hi, mid), point, depth - 1))
    return out


@lru_cache(maxsize=None)
def ball_rule(n: int, samples: int):
    """Product rule on the unit ball (normalized weights).

    Radial Gauss-Legendre with the ``r^(n-1)`` Jacobian; trapezoid in the
    azimuth (n=2) or Gauss in ``cos(polar)`` times trapezoid (n=3).
    """
    r, wr = gauss_legendre(samples)
    if n == 1:
        x, w = np.polynomial.legendre.leggauss(2 * samples)
        nodes, weights = x[:, None], w / 2
    elif n == 2:
        nt = 2 * samples
        th = 2 * math.pi * np.arange(nt) / nt
        dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
        nodes = (r[:, None, None] * dirs[None]).reshape(-1, 2)
        weights = np.repeat(wr * r, nt) * (2 * math.pi / nt)
    elif n == 3:
        cz, wz = np.polynomial.legendre.leggauss(samples)
        nt = 2 * samples
        th = 2 * math.pi * np.arange(nt) / nt
        sz = np.sqrt(1 - cz**2)
        dirs = np.array([[s * math.cos(t), s * math.sin(t), c] for c, s in zip(cz, sz) for t in th])
        wd = np.repeat(wz, nt) * (2 * math.pi / nt)
        nodes = (r[:, None, None] * dirs[None]).reshape(-1, 3)
        weights = np.outer(wr * r**2, wd).reshape(-1)
    else:
        raise ParameterError("ball rules are implemented for n <= 3")
    weights = weights / weights.sum()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


@lru_cache(maxsize=None)
def _split_unit_box_rule(order: int, n: int, split: int):
    nodes, w = composite_box_rule(np.full(n, -0.5), np.full(n, 0.5), order, split)
    nodes.setflags(write=False)
    w.setflags(write=False)
    return nodes, w


def reference_rule(reference: ReferenceCell, order: int, ball_samples: int, split: int = 2):
    """Nodes in reference coordinates with normalized weights.

    Boxes are cut into ``split**n`` congruent pieces. With ``split=2`` the
    barycenter sits on piece corners, which is where |A x|^p has its kink.
    """
    if reference.is_box:
        nodes, w = _split_unit_box_rule(order, reference.n, split)
        return nodes * np.array(reference.sides), w
    nodes, w = ball_rule(reference.n, ball_samples)
    return nodes * reference.radius, w


def cell_rule(cell: Cell, order: int = 5, ball_samples: int = 16, singular_points=(),
              adaptive_depth: int = 4, split: int = 2):
    """Nodes of ``cell`` in physical coordinates and normalized weights.

    Box cells containing a flagged point in their closure are refined
    dyadically toward it in reference coordinates.
    """
    ref = cell.reference
    local = []
    if ref.is_box and adaptive_depth > 0 and len(singular_points):
        y = cell.to_reference(np.asarray(singular_points, dtype=float))
        half = np.array(ref.sides) / 2
        local = [pt for pt in y if np.all(np.abs(pt) <= half * (1 + 1e-12))]
    if local:
        half = np.array(ref.sides) / 2
        nodes, w = adaptive_box_rule(-half, half, order, local, adaptive_depth)
        w = w / w.sum()
    else:
        nodes, w = reference_rule(ref, order, ball_samples, split)
    return cell.from_reference(nodes), np.asarray(w)


def needs_refinement(reference: ReferenceCell, epsilon: float, rotation, translations,
                     singular_points) -> np.ndarray:
    """Mask of cells (given by translations) whose closure holds a flagged point."""
    translations = np.atleast_2d(translations)
    mask = np.zeros(len(translations), dtype=bool)
    if not reference.is_box or not len(singular_points):
        return mask
    half = np.array(reference.sides) / 2 * epsilon * (1 + 1e-12)
    for s in np.atleast_2d(singular_points):
        y = (s - translations) @ np.asarray(rotation)
        mask |= np.all(np.abs(y) <= half, axis=1)
    return mask
