"""Reference cells, rotation groups, transformed cells and packing families.

A cell is the image ``eps * R(D) + h`` of a reference set ``D`` (a box or a
ball centered at the origin). Packing families are collections of pairwise
disjoint cells with a common ``eps`` lying inside an ambient box; they are
the candidates over which the BMO-type supremum is approximated from below.

Cells are open sets, so cubes that only share a face are disjoint.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gamma as gamma_fn

from .errors import ParameterError, ShapeError, UnsupportedTessellationError

ORTHO_TOL = 1e-10
_TOUCH_TOL = 1e-12


def _as_tuple(x) -> tuple:
    return tuple(float(v) for v in np.asarray(x, dtype=float).ravel())


@dataclass(frozen=True)
class Box:
    """Axis-aligned open box ``(lo, hi)``."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo, hi = _as_tuple(self.lo), _as_tuple(self.hi)
        if len(lo) != len(hi) or not lo:
            raise ShapeError("box corners must have equal positive length")
        if any(b <= a for a, b in zip(lo, hi)):
            raise ParameterError(f"degenerate box lo={lo} hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def unit(cls, n: int) -> "Box":
        return cls((0.0,) * n, (1.0,) * n)

    @classmethod
    def cube(cls, n: int, side: float = 1.0, center=None) -> "Box":
        c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
        return cls(c - side / 2, c + side / 2)

    @property
    def n(self) -> int:
        return len(self.lo)

    @property
    def lo_arr(self) -> np.ndarray:
        return np.array(self.lo)

    @property
    def hi_arr(self) -> np.ndarray:
        return np.array(self.hi)

    @property
    def sides(self) -> np.ndarray:
        return self.hi_arr - self.lo_arr

    @property
    def measure(self) -> float:
        return float(np.prod(self.sides))

    @property
    def center(self) -> np.ndarray:
        return (self.lo_arr + self.hi_arr) / 2

    def shrink(self, d: float) -> "Box":
        return Box(self.lo_arr + d, self.hi_arr - d)

    def contains_points(self, x, tol: float = 1e-12) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        scale = tol * max(1.0, float(np.max(np.abs(self.sides))))
        return np.all((x >= self.lo_arr - scale) & (x <= self.hi_arr + scale), axis=1)

    def contains_box(self, other: "Box", tol: float = 1e-12) -> bool:
        return bool(
            np.all(other.lo_arr >= self.lo_arr - tol) and np.all(other.hi_arr <= self.hi_arr + tol)
        )

    def corners(self) -> np.ndarray:
        return np.array(list(itertools.product(*zip(self.lo, self.hi))))


@dataclass(frozen=True)
class ReferenceCell:
    """Bounded open reference set centered at the origin.

    ``shape`` is ``"unit_cube"`` (Q = (-1/2, 1/2)^n), ``"box"`` (given side
    lengths) or ``"ball"`` (given radius).
    """

    shape: str
    n: int
    sides: tuple = ()
    radius: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError("dimension must be >= 1")
        if self.shape == "unit_cube":
            object.__setattr__(self, "sides", (1.0,) * self.n)
        elif self.shape == "box":
            sides = _as_tuple(self.sides)
            if len(sides) != self.n or min(sides) <= 0:
                raise ParameterError(f"box needs {self.n} positive sides, got {sides}")
            object.__setattr__(self, "sides", sides)
        elif self.shape == "ball":
            if self.radius <= 0:
                raise ParameterError("ball radius must be positive")
        else:
            raise ParameterError(f"unknown reference shape {self.shape!r}")

    @classmethod
    def cube(cls, n: int) -> "ReferenceCell":
        return cls("unit_cube", n)

    @classmethod
    def box(cls, sides) -> "ReferenceCell":
        sides = _as_tuple(sides)
        return cls("box", len(sides), sides=sides)

    @classmethod
    def ball(cls, n: int, radius: float = 1.0) -> "ReferenceCell":
        return cls("ball", n, radius=float(radius))

    @property
    def is_box(self) -> bool:
        return self.shape != "ball"

    @property
    def tessellates(self) -> bool:
        return self.is_box

    @property
    def sides_arr(self) -> np.ndarray:
        if not self.is_box:
            return np.full(self.n, 2 * self.radius)
        return np.array(self.sides)

    @property
    def measure(self) -> float:
        if self.is_box:
            return float(np.prod(self.sides))
        return float(math.pi ** (self.n / 2) / gamma_fn(self.n / 2 + 1) * self.radius**self.n)

    @property
    def barycenter(self) -> np.ndarray:
        return np.zeros(self.n)

    @property
    def diameter(self) -> float:
        if self.is_box:
            return float(np.linalg.norm(self.sides))
        return 2 * self.radius

    def second_moment(self) -> np.ndarray:
        """Normalized second moment ``mean over D of x x^T`` (D centered)."""
        if self.is_box:
            return np.diag(np.array(self.sides) ** 2 / 12.0)
        return np.eye(self.n) * self.radius**2 / (self.n + 2)

    def vertices(self) -> np.ndarray:
        if not self.is_box:
            raise ParameterError("balls have no vertices")
        h = np.array(self.sides) / 2
        return np.array(list(itertools.product(*[(-a, a) for a in h])))

    def contains(self, y, tol: float = 0.0) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if self.is_box:
            return np.all(np.abs(y) < np.array(self.sides) / 2 + tol, axis=1)
        return np.linalg.norm(y, axis=1) < self.radius + tol


def _check_rotation(R: np.ndarray, n: int) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if R.shape != (n, n):
        raise ShapeError(f"rotation must be {n}x{n}, got {R.shape}")
    if not np.allclose(R.T @ R, np.eye(n), atol=ORTHO_TOL, rtol=0) or abs(
        np.linalg.det(R) - 1.0
    ) > ORTHO_TOL:
        raise ParameterError("rotation must be orthonormal with determinant 1")
    return R


def rotation_2d(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True, eq=False)
class RotationGroup:
    """Finite set of rotations used as the group ``G`` (element 0 is the identity)."""

    kind: str
    elements: tuple
    seed: int | None = None

    def __post_init__(self):
        if not self.elements:
            raise ParameterError("rotation group needs at least one element")
        n = np.asarray(self.elements[0]).shape[0]
        els = tuple(_check_rotation(R, n) for R in self.elements)
        object.__setattr__(self, "elements", els)

    @property
    def n(self) -> int:
        return self.elements[0].shape[0]

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def contains(self, R, tol: float = 1e-9) -> bool:
        return any(np.allclose(R, E, atol=tol, rtol=0) for E in self.elements)

    @classmethod
    def trivial(cls, n: int) -> "RotationGroup":
        return cls("trivial", (np.eye(n),))

    @classmethod
    def finite(cls, matrices: Sequence) -> "RotationGroup":
        mats = [np.asarray(R, dtype=float) for R in matrices]
        n = mats[0].shape[0]
        if not any(np.allclose(R, np.eye(n)) for R in mats):
            mats = [np.eye(n)] + mats
        else:
            mats.sort(key=lambda R: not np.allclose(R, np.eye(n)))
        return cls("finite", tuple(mats))

    @classmethod
    def sampled_SOn(cls, n: int, count: int, seed: int = 0) -> "RotationGroup":
        """Identity plus ``count - 1`` Haar-distributed rotations from a seeded generator."""
        if count < 1:
            raise ParameterError("count must be >= 1")
        rng = np.random.default_rng(seed)
        mats = [np.eye(n)]
        for _ in range(count - 1):
            mats.append(_haar_rotation(n, rng))
        return cls("sampled_SOn", tuple(mats), seed=seed)


def _haar_rotation(n: int, rng: np.random.Generator) -> np.ndarray:
    if n == 1:
        return np.eye(1)
    if n == 2:
        return rotation_2d(rng.uniform(0.0, 2 * math.pi))
    if n == 3:
        q = rng.normal(size=4)
        w, x, y, z = q / np.linalg.norm(q)
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
                [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
                [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
            ]
        )
    from scipy.stats import special_ortho_group

    return special_ortho_group.rvs(n, random_state=rng)


@dataclass(frozen=True, eq=False)
class Cell:
    """The open set ``epsilon * rotation(reference) + translation``."""

    reference: ReferenceCell
    epsilon: float
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ParameterError("epsilon must be positive")
        n = self.reference.n
        object.__setattr__(self, "rotation", _check_rotation(self.rotation, n))
        h = np.asarray(self.translation, dtype=float).reshape(-1)
        if h.shape != (n,):
            raise ShapeError(f"translation must have length {n}")
        object.__setattr__(self, "translation", h)

    @property
    def n(self) -> int:
        return self.reference.n

    @property
    def measure(self) -> float:
        return self.epsilon**self.n * self.reference.measure

    @property
    def barycenter(self) -> np.ndarray:
        return self.epsilon * self.rotation @ self.reference.barycenter + self.translation

    @property
    def diameter(self) -> float:
        return self.epsilon * self.reference.diameter

    def to_reference(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return (x - self.translation) @ self.rotation / self.epsilon

    def from_reference(self, y) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=float))
        return self.epsilon * y @ self.rotation.T + self.translation

    def contains(self, x) -> np.ndarray:
        return self.reference.contains(self.to_reference(x))

    def vertices(self) -> np.ndarray:
        return self.from_reference(self.reference.vertices())

    def bounding_box(self) -> Box:
        if self.reference.is_box:
            v = self.vertices()
            return Box(v.min(axis=0), v.max(axis=0))
        r = self.epsilon * self.reference.radius
        return Box(self.translation - r, self.translation + r)

    def mapped(self, scale: float, rotation, shift) -> "Cell":
        """Image of this cell under ``x -> scale * rotation x + shift``."""
        R = np.asarray(rotation, dtype=float)
        return Cell(
            self.reference,
            self.epsilon * scale,
            R @ self.rotation,
            scale * R @ self.translation + np.asarray(shift, dtype=float),
        )


def make_cell(reference: ReferenceCell, epsilon: float, rotation=None, translation=None,
              group: RotationGroup | None = None) -> Cell:
    n = reference.n
    R = np.eye(n) if rotation is None else np.asarray(rotation, dtype=float)
    h = np.zeros(n) if translation is None else translation
    if group is not None and not group.contains(R):
        raise ParameterError("rotation is not an element of the group")
    return Cell(reference, float(epsilon), R, h)


@dataclass(frozen=True, eq=False)
class PackingFamily:
    """Pairwise-disjoint cells of a common size inside ``ambient``.

    Cells are stored compactly as translations plus an index into a small
    tuple of distinct rotations.
    """

    reference: ReferenceCell
    epsilon: float
    ambient: Box
    rotations: tuple
    rot_index: np.ndarray
    translations: np.ndarray
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.translations.shape[0])

    @property
    def cells(self) -> list:
        return [
            Cell(self.reference, self.epsilon, self.rotations[i], h)
            for i, h in zip(self.rot_index, self.translations)
        ]

    @property
    def cell_measure(self) -> float:
        return self.epsilon**self.reference.n * self.reference.measure

    @property
    def coverage(self) -> float:
        return len(self) * self.cell_measure / self.ambient.measure

    def groups(self):
        """Yield ``(rotation, translations)`` blocks sharing one rotation."""
        for i, R in enumerate(self.rotations):
            sel = self.rot_index == i
            if sel.any():
                yield R, self.translations[sel]

    def cardinality_bound(self) -> float:
        return self.ambient.measure / self.cell_measure


def _cells_inside(ambient: Box, reference: ReferenceCell, eps: float, R: np.ndarray,
                  centers: np.ndarray) -> np.ndarray:
    lo, hi = ambient.lo_arr, ambient.hi_arr
    tol = _TOUCH_TOL * max(1.0, float(np.max(np.abs(ambient.sides))))
    if reference.is_box:
        offs = eps * reference.vertices() @ R.T
        ok = np.ones(len(centers), dtype=bool)
        for v in offs:
            p = centers + v
            ok &= np.all((p >= lo - tol) & (p <= hi + tol), axis=1)
        return ok
    r = eps * reference.radius
    return np.all((centers - r >= lo - tol) & (centers + r <= hi + tol), axis=1)


def _lattice_centers(ambient: Box, reference: ReferenceCell, eps: float, R: np.ndarray,
                     offset: np.ndarray) -> np.ndarray:
    n = reference.n
    step = eps * reference.sides_arr
    a = ambient.lo_arr + offset
    # lattice coordinates of the ambient corners bound the admissible indices
    coords = ((ambient.corners() - a) @ R) / step - 0.5
    kmin = np.floor(coords.min(axis=0)) - 1
    kmax = np.ceil(coords.max(axis=0)) + 1
    axes = [np.arange(kmin[j], kmax[j] + 1) for j in range(n)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    centers = a + ((grid + 0.5) * step) @ R.T
    return centers[_cells_inside(ambient, reference, eps, R, centers)]


def tessellation_family(ambient: Box, reference: ReferenceCell, epsilon: float,
                        offset=None, rotation=None) -> PackingFamily:
    """Lattice of copies ``eps R(D) + h_k + offset`` anchored at ``ambient.lo``,
    keeping the copies that lie inside ``ambient``."""
    if not reference.tessellates:
        raise UnsupportedTessellationError(
            f"{reference.shape} does not tessellate; use packing_candidates"
        )
    n = reference.n
    if ambient.n != n:
        raise ShapeError("ambient and reference dimensions differ")
    if not epsilon > 0:
        raise ParameterError("epsilon must be positive")
    R = np.eye(n) if rotation is None else _check_rotation(rotation, n)
    off = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)
    centers = _lattice_centers(ambient, reference, float(epsilon), R, off)
    return PackingFamily(
        reference, float(epsilon), ambient, (R,), np.zeros(len(centers), dtype=int), centers,
        label="tessellation",
    )


class _SpatialHash:
    def __init__(self, size: float):
        self.size = size
        self.buckets: dict = {}

    def _key(self, x):
        return tuple(np.floor(x / self.size).astype(int))

    def add(self, i: int, x):
        self.buckets.setdefault(self._key(x), []).append(i)

    def near(self, x):
        k = self._key(x)
        out = []
        for d in itertools.product((-1, 0, 1), repeat=len(k)):
            out.extend(self.buckets.get(tuple(a + b for a, b in zip(k, d)), ()))
        return out


def _sat_axes(Ra: np.ndarray, Rb: np.ndarray) -> np.ndarray:
    axes = [Ra[:, j] for j in range(Ra.shape[1])] + [Rb[:, j] for j in range(Rb.shape[1])]
    if Ra.shape[0] == 3:
        for i in range(3):
            for j in range(3):
                c = np.cross(Ra[:, i], Rb[:, j])
                nc = np.linalg.norm(c)
                if nc > 1e-9:
                    axes.append(c / nc)
    return np.array(axes)


def _boxes_overlap(ref: ReferenceCell, eps: float, Ra, ca, Rb, cb) -> bool:
    va = ca + eps * ref.vertices() @ Ra.T
    vb = cb + eps * ref.vertices() @ Rb.T
    tol = _TOUCH_TOL * max(eps, 1e-300) * 1e3
    for ax in _sat_axes(Ra, Rb):
        pa, pb = va @ ax, vb @ ax
        if pa.max() <= pb.min() + tol or pb.max() <= pa.min() + tol:
            return False
    return True


def _overlaps(ref: ReferenceCell, eps: float, Ra, ca, Rb, cb) -> bool:
    if ref.is_box:
        if Ra is Rb or np.array_equal(Ra, Rb):
            # same orientation: compare in the common frame
            d = np.abs((cb - ca) @ Ra)
            return bool(np.all(d < eps * ref.sides_arr - _TOUCH_TOL * eps * 1e3))
        return _boxes_overlap(ref, eps, Ra, ca, Rb, cb)
    return bool(np.linalg.norm(cb - ca) < 2 * eps * ref.radius * (1 - 1e-12))


def check_disjoint(family: PackingFamily) -> bool:
    """True iff the (open) cells of ``family`` are pairwise disjoint."""
    K = len(family)
    if K < 2:
        return True
    ref, eps = family.reference, family.epsilon
    grid = _SpatialHash(eps * ref.diameter)
    for i in range(K):
        c = family.translations[i]
        for j in grid.near(c):
            if _overlaps(ref, eps, family.rotations[family.rot_index[i]], c,
                         family.rotations[family.rot_index[j]], family.translations[j]):
                return False
        grid.add(i, c)
    return True


def _greedy_fill(family: PackingFamily, fine: int = 4) -> PackingFamily:
    ref, eps, amb = family.reference, family.epsilon, family.ambient
    n = ref.n
    Rid = np.eye(n)
    rots = list(family.rotations)
    if not any(np.array_equal(R, Rid) for R in rots):
        rots.append(Rid)
    rid = next(i for i, R in enumerate(rots) if np.array_equal(R, Rid))
    step = eps * ref.sides_arr / fine
    half = eps * ref.sides_arr / 2
    axes = [np.arange(amb.lo[j] + half[j], amb.hi[j] - half[j] + 1e-12 * eps, step[j])
            for j in range(n)]
    cand = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    trans = [t for t in family.translations]
    ridx = list(family.rot_index)
    grid = _SpatialHash(eps * ref.diameter)
    for i, c in enumerate(trans):
        grid.add(i, c)
    for c in cand:
        if any(_overlaps(ref, eps, Rid, c, rots[ridx[j]], trans[j]) for j in grid.near(c)):
            continue
        grid.add(len(trans), c)
        trans.append(c)
        ridx.append(rid)
    return PackingFamily(
        ref, eps, amb, tuple(rots), np.array(ridx, dtype=int),
        np.array(trans).reshape(-1, n), label=family.label + "+greedy", meta=dict(family.meta),
    )


def packing_candidates(ambient: Box, reference: ReferenceCell, epsilon: float,
                       group: RotationGroup | None = None, offsets_per_axis: int = 4,
                       greedy: bool = False) -> list[PackingFamily]:
    """Candidate families: offset grid x group elements (offset index outermost).

    Offsets are ``j / K`` of a lattice period along each (rotated) lattice axis.
    Ball references use a cubic lattice of balls (rotations are irrelevant for
    balls). Families without cells are dropped.
    """
    if offsets_per_axis < 1:
        raise ParameterError("offsets_per_axis must be >= 1")
    n = reference.n
    group = RotationGroup.trivial(n) if group is None else group
    if group.n != n:
        raise ShapeError("group and reference dimensions differ")
    K = offsets_per_axis
    period = epsilon * reference.sides_arr
    rotations = group.elements if reference.is_box else (np.eye(n),)
    out = []
    for oi, jdx in enumerate(itertools.product(range(K), repeat=n)):
        frac = np.array(jdx, dtype=float) / K
        for ri, R in enumerate(rotations):
            offset = (frac * period) @ R.T
            centers = _lattice_centers(ambient, reference, float(epsilon), R, offset)
            fam = PackingFamily(
                reference, float(epsilon), ambient, (R,), np.zeros(len(centers), dtype=int),
                centers, label="tessellation" if reference.is_box else "ball-lattice",
                meta={"offset_index": oi, "rotation_index": ri},
            )
            if greedy:
                fam = _greedy_fill(fam)
            if len(fam):
                out.append(fam)
    return out
