"""Vector fields u: R^n -> R^m, cell averages, finite differences and mollification."""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.interpolate import RegularGridInterpolator

from . import quadrature
from .errors import DomainError, NumericError, ParameterError, ShapeError
from .geometry import Box, Cell

_DOMAIN_TOL = 1e-12
WIDE = 100.0  # half-width of the default domain of entire catalog fields


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor Gauss rule of ``order`` points per axis on boxes.

    ``ball_samples`` radial points (and twice as many angles) are used on
    balls. Box cells are cut into ``split`` pieces per axis before the Gauss
    rule is applied. Box cells whose closure contains a flagged singular point are
    refined dyadically ``adaptive_depth`` times toward it; other cells are
    never refined.
    """

    order: int = 5
    ball_samples: int = 16
    adaptive_depth: int = 4
    split: int = 2

    def __post_init__(self):
        if self.order < 1 or self.ball_samples < 1 or self.adaptive_depth < 0 or self.split < 1:
            raise ParameterError(f"invalid quadrature rule {self}")


@dataclass(frozen=True, eq=False)
class Field:
    """An evaluable map on a closed axis-aligned box.

    ``func`` maps an ``(N, n)`` array of points to an ``(N, m)`` array.
    ``jac`` (optional) returns the analytic Jacobians as ``(N, m, n)``.
    """

    n: int
    m: int
    func: Callable
    domain: Box
    kind: str = "analytic"
    jac: Callable | None = None
    singular_points: tuple = ()
    name: str = ""
    params: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ParameterError("field dimensions must be >= 1")
        if self.domain.n != self.n:
            raise ShapeError("domain dimension does not match field")
        if self.kind not in ("analytic", "grid", "catalog"):
            raise ParameterError(f"unknown field kind {self.kind!r}")
        pts = tuple(tuple(float(c) for c in p) for p in self.singular_points)
        object.__setattr__(self, "singular_points", pts)

    @property
    def singular_array(self) -> np.ndarray:
        return np.array(self.singular_points, dtype=float).reshape(-1, self.n)

    def _check(self, x: np.ndarray):
        if x.ndim != 2 or x.shape[1] != self.n:
            raise ShapeError(f"expected points of dimension {self.n}, got shape {x.shape}")
        inside = self.domain.contains_points(x, _DOMAIN_TOL)
        if not inside.all():
            bad = x[~inside][0]
            raise DomainError(f"point {bad.tolist()} outside field domain {self.domain}")

    def values(self, x) -> np.ndarray:
        """Evaluate at an ``(N, n)`` batch of points; returns ``(N, m)``."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        self._check(x)
        out = np.asarray(self.func(x), dtype=float).reshape(len(x), self.m)
        return out

    def evaluate(self, x) -> np.ndarray:
        """Value at a single point (vector of length m)."""
        x = np.asarray(x, dtype=float).reshape(1, -1)
        v = self.values(x)[0]
        if not np.all(np.isfinite(v)):
            raise NumericError(f"non-finite value at {x[0].tolist()}")
        return v

    def jacobian(self, x) -> np.ndarray:
        """Analytic Jacobians ``(N, m, n)``; falls back to central differences."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.jac is not None:
            self._check(x)
            return np.asarray(self.jac(x), dtype=float).reshape(len(x), self.m, self.n)
        return np.stack([gradient_fd(self, p, 1e-5) for p in x])

    # simple algebra, used by the property suites
    def scaled(self, t: float) -> "Field":
        jac = None if self.jac is None else (lambda x, j=self.jac: t * j(x))
        return _derived(self, lambda x, f=self.func: t * f(x), jac, f"{t}*{self.name}")

    def plus_constant(self, h) -> "Field":
        h = np.asarray(h, dtype=float).reshape(self.m)
        return _derived(self, lambda x, f=self.func: f(x) + h, self.jac, f"{self.name}+h")

    def plus(self, other: "Field") -> "Field":
        if (other.n, other.m) != (self.n, self.m):
            raise ShapeError("fields have different shapes")
        lo = np.maximum(self.domain.lo_arr, other.domain.lo_arr)
        hi = np.minimum(self.domain.hi_arr, other.domain.hi_arr)
        jac = None
        if self.jac is not None and other.jac is not None:
            jac = lambda x, a=self.jac, b=other.jac: a(x) + b(x)  # noqa: E731
        return Field(self.n, self.m, lambda x, a=self.func, b=other.func: a(x) + b(x),
                     Box(lo, hi), "analytic", jac,
                     self.singular_points + other.singular_points, f"{self.name}+{other.name}")

    def compose_affine(self, A, b) -> "Field":
        """The field ``x -> u(A x + b)`` on the preimage of the domain (A invertible)."""
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        Ainv = np.linalg.inv(A)
        pre = (self.domain.corners() - b) @ Ainv.T
        dom = Box(pre.min(axis=0), pre.max(axis=0))
        f = self.func
        jac = None
        if self.jac is not None:
            jac = lambda x, j=self.jac: j(x @ A.T + b) @ A  # noqa: E731
        sing = tuple((np.array(s) - b) @ Ainv.T for s in self.singular_points)
        return Field(self.n, self.m, lambda x: f(x @ A.T + b), dom, "analytic", jac, sing,
                     f"{self.name}(Ax+b)")


def _derived(base: Field, func, jac, name) -> Field:
    return Field(base.n, base.m, func, base.domain, "analytic", jac, base.singular_points, name,
                 dict(base.params))


def from_callable(func, n: int, m: int, domain: Box | None = None, jac=None,
                  singular_points=(), name="analytic") -> Field:
    """Wrap a vectorized callback ``(N, n) -> (N, m)``."""
    dom = Box.cube(n, 2 * WIDE) if domain is None else domain
    return Field(n, m, func, dom, "analytic", jac, singular_points, name)


# ---------------------------------------------------------------------------
# catalog


def _wide(n: int) -> Box:
    return Box.cube(n, 2 * WIDE)


def linear(A) -> Field:
    """``l^A(x) = A x``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m, n = A.shape
    return Field(n, m, lambda x: x @ A.T, _wide(n), "catalog",
                 lambda x: np.broadcast_to(A, (len(x), m, n)), (), "linear", {"A": A.tolist()})


def affine(A, h) -> Field:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    h = np.asarray(h, dtype=float)
    m, n = A.shape
    return Field(n, m, lambda x: x @ A.T + h, _wide(n), "catalog",
                 lambda x: np.broadcast_to(A, (len(x), m, n)), (), "affine",
                 {"A": A.tolist(), "h": h.tolist()})


def constant(h, n: int | None = None) -> Field:
    h = np.atleast_1d(np.asarray(h, dtype=float))
    m = h.size
    n = m if n is None else n
    return Field(n, m, lambda x: np.broadcast_to(h, (len(x), m)).copy(), _wide(n), "catalog",
                 lambda x: np.zeros((len(x), m, n)), (), "constant", {"h": h.tolist()})


def rigid(A_skew, h) -> Field:
    """Rigid displacement ``x -> A x + h`` with ``A`` skew-symmetric."""
    A = np.asarray(A_skew, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError("rigid motion needs a square matrix")
    if not np.allclose(A, -A.T, atol=1e-12):
        raise ParameterError("rigid motion matrix must be skew-symmetric")
    f = affine(A, h)
    return Field(f.n, f.m, f.func, f.domain, "catalog", f.jac, (), "rigid",
                 {"A_skew": A.tolist(), "h": list(np.asarray(h, dtype=float))})


def sine2d() -> Field:
    """``u(x) = (sin(pi x1) sin(pi x2), 0)``."""
    pi = math.pi

    def func(x):
        out = np.zeros((len(x), 2))
        out[:, 0] = np.sin(pi * x[:, 0]) * np.sin(pi * x[:, 1])
        return out

    def jac(x):
        out = np.zeros((len(x), 2, 2))
        out[:, 0, 0] = pi * np.cos(pi * x[:, 0]) * np.sin(pi * x[:, 1])
        out[:, 0, 1] = pi * np.sin(pi * x[:, 0]) * np.cos(pi * x[:, 1])
        return out

    return Field(2, 2, func, _wide(2), "catalog", jac, (), "sine2d", {})


def singular(delta: float, p: float, n: int = 2, m: int | None = None) -> Field:
    """``u(x) = |x|^(-delta/p) e_1`` with ``u(0) = 0``; the origin is flagged."""
    if not delta > 0 or p < 1:
        raise ParameterError("singular field needs delta > 0 and p >= 1")
    m = n if m is None else m
    a = delta / p

    def func(x):
        r = np.sqrt(np.sum(x * x, axis=1))
        out = np.zeros((len(x), m))
        nz = r > 0
        out[nz, 0] = r[nz] ** (-a)
        return out

    def jac(x):
        r = np.sqrt(np.sum(x * x, axis=1))
        out = np.zeros((len(x), m, n))
        nz = r > 0
        out[nz, 0, :] = (-a * r[nz] ** (-a - 2))[:, None] * x[nz]
        return out

    return Field(n, m, func, _wide(n), "catalog", jac, (tuple([0.0] * n),), "singular",
                 {"delta": delta, "p": p})


def trig(seed: int, n: int = 2, m: int = 2, modes: int = 3, amplitude: float = 1.0) -> Field:
    """Random smooth trigonometric field (used by the property suites)."""
    rng = np.random.default_rng(seed)
    K = rng.normal(size=(modes, n)) * 2.0
    phase = rng.uniform(0, 2 * math.pi, size=modes)
    C = rng.normal(size=(modes, m)) * amplitude

    def func(x):
        return np.sin(x @ K.T + phase) @ C

    def jac(x):
        c = np.cos(x @ K.T + phase)
        return np.einsum("nk,km,kj->nmj", c, C, K)

    return Field(n, m, func, _wide(n), "catalog", jac, (), "trig", {"seed": seed})


def grid(lo, hi, samples) -> Field:
    """Multilinear interpolation of ``samples`` (shape ``(k_1, ..., k_n, m)``) on a
    uniform lattice spanning the box ``[lo, hi]``."""
    samples = np.asarray(samples, dtype=float)
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    n = lo.size
    if samples.ndim != n + 1:
        raise ShapeError("grid samples must have shape (k_1, ..., k_n, m)")
    axes = [np.linspace(lo[j], hi[j], samples.shape[j]) for j in range(n)]
    interp = RegularGridInterpolator(axes, samples, method="linear")
    m = samples.shape[-1]
    return Field(n, m, lambda x: interp(x), Box(lo, hi), "grid", None, (), "grid", {})


CATALOG = {
    "linear": linear,
    "constant": constant,
    "sine2d": sine2d,
    "rigid": rigid,
    "singular": singular,
    "affine": affine,
    "trig": trig,
}


# ---------------------------------------------------------------------------
# operations


def cell_mean(u: Field, cell: Cell, rule: QuadratureRule | None = None) -> np.ndarray:
    """Average of ``u`` over ``cell``."""
    rule = rule or QuadratureRule()
    x, w = quadrature.cell_rule(cell, rule.order, rule.ball_samples, u.singular_points,
                                rule.adaptive_depth, rule.split)
    mean = w @ u.values(x)
    if not np.all(np.isfinite(mean)):
        raise NumericError("cell mean is not finite")
    return mean


def gradient_fd(u: Field, x, h: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian ``(m, n)`` at ``x``."""
    if not h >= 1e-12:
        raise ParameterError(f"finite-difference step {h} is below 1e-12")
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != u.n:
        raise ShapeError("point dimension does not match field")
    E = np.eye(u.n) * h
    pts = np.concatenate([x + E, x - E])
    vals = u.values(pts)
    return ((vals[: u.n] - vals[u.n:]) / (2 * h)).T


def symmetric_gradient(u: Field, x, h: float = 1e-5) -> np.ndarray:
    if u.m != u.n:
        raise ShapeError("symmetric gradient needs m == n")
    J = gradient_fd(u, x, h)
    return (J + J.T) / 2


def _bump(r2):
    out = np.zeros_like(r2)
    inside = r2 < 1
    out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return out


def _bump_grad(z):
    """Gradient of the unnormalized bump ``exp(-1/(1-|z|^2))``."""
    r2 = np.sum(z * z, axis=-1)
    out = np.zeros_like(z)
    inside = r2 < 1
    s = 1.0 - r2[inside]
    out[inside] = (np.exp(-1.0 / s) * (-2.0 / s**2))[:, None] * z[inside]
    return out


def bump_constant(n: int) -> float:
    """Normalization ``c`` with ``c * int_B exp(-1/(1-|z|^2)) dz = 1``."""
    sphere = 2 * math.pi ** (n / 2) / math.gamma(n / 2)
    val, _ = integrate.quad(lambda r: math.exp(-1 / (1 - r * r)) * r ** (n - 1), 0, 1,
                            epsabs=1e-14, epsrel=1e-12)
    return 1.0 / (sphere * val)


def _directions(n: int, samples: int):
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    nt = 2 * samples
    th = 2 * math.pi * np.arange(nt) / nt
    if n == 2:
        return np.stack([np.cos(th), np.sin(th)], axis=1), np.full(nt, 2 * math.pi / nt)
    if n == 3:
        cz, wz = np.polynomial.legendre.leggauss(samples)
        sz = np.sqrt(1 - cz**2)
        d = np.array([[s * math.cos(t), s * math.sin(t), c] for c, s in zip(cz, sz) for t in th])
        return d, np.repeat(wz, nt) * (2 * math.pi / nt)
    raise ParameterError("mollification is implemented for n <= 3")


class _Mollifier:
    """Discrete ``rho_sigma * u`` with analytic-kernel derivatives."""

    def __init__(self, u: Field, sigma: float, samples: int):
        self.u, self.sigma, self.n = u, sigma, u.n
        self.c = bump_constant(u.n)
        # area weights on the unit ball (unnormalized), times the kernel
        dirs, wd = _directions(u.n, samples)
        t, wt = quadrature.gauss_legendre(samples)
        self.dirs, self.wd = dirs, wd
        # the off-center rule sees the kernel edge at varying radii: use twice the nodes
        self.t, self.wt = quadrature.gauss_legendre(2 * samples)
        r = t
        nodes = (r[:, None, None] * dirs[None]).reshape(-1, u.n)
        area = np.outer(wt * r ** (u.n - 1), wd).reshape(-1)
        kern = _bump(np.sum(nodes**2, axis=1))
        self.z = nodes
        self.wk = area * kern / np.sum(area * kern)  # discrete renormalization
        wg = area[:, None] * _bump_grad(nodes) / np.sum(area * kern)
        # make the discrete derivative exact on linear maps: sum z (x) wg = -I
        self.wg = wg @ -np.linalg.inv(nodes.T @ wg)
        self.sing = u.singular_array

    def _centered(self, x):
        # y = x - sigma z
        Y = x[:, None, :] - self.sigma * self.z[None]
        vals = self.u.func(Y.reshape(-1, self.n)).reshape(len(x), len(self.z), self.u.m)
        val = np.einsum("q,nqm->nm", self.wk, vals)
        J = np.einsum("qj,nqm->nmj", self.wg, vals - val[:, None, :]) / self.sigma
        return val, J

    def _around(self, x, s):
        """Polar rule centered at the singular point ``s`` over ``B(x, sigma)``."""
        d = s - x  # (N, n)
        b = d @ self.dirs.T  # (N, D)
        disc = b**2 - (np.sum(d * d, axis=1)[:, None] - self.sigma**2)
        rmax = -b + np.sqrt(np.maximum(disc, 0.0))
        tmax = np.sqrt(rmax)  # r = t^2 removes the r^(1/2)-type endpoint behavior
        tt = tmax[:, :, None] * self.t[None, None, :]  # (N, D, T)
        r = tt**2
        w = (self.wd[None, :, None] * (tmax[:, :, None] * self.wt[None, None, :])
             * 2 * tt * r ** (self.n - 1))
        Y = s[None, None, None, :] + r[..., None] * self.dirs[None, :, None, :]
        Z = (x[:, None, None, :] - Y) / self.sigma
        kern = _bump(np.sum(Z * Z, axis=-1))
        grad = _bump_grad(Z)
        vals = self.u.func(Y.reshape(-1, self.n)).reshape(*r.shape, self.u.m)
        norm = np.einsum("ndt,ndt->n", w, kern)
        val = np.einsum("ndt,ndt,ndtm->nm", w, kern, vals) / norm[:, None]
        wg = w[..., None] * grad
        # same exactness correction as the centered rule, per point
        G = np.einsum("ndti,ndtj->nij", Z, wg)
        J = np.einsum("ndtj,ndtm->nmj", wg, vals - val[:, None, None, :])
        J = -np.einsum("nmj,njk->nmk", J, np.linalg.inv(G)) / self.sigma
        return val, J

    def __call__(self, x, want_jac=False, chunk=256):
        x = np.asarray(x, dtype=float)
        vals = np.empty((len(x), self.u.m))
        jacs = np.empty((len(x), self.u.m, self.n))
        for a in range(0, len(x), chunk):
            xs = x[a:a + chunk]
            v, J = self._centered(xs)
            for s in self.sing:
                near = np.sum((xs - s) ** 2, axis=1) < self.sigma**2
                if near.any():
                    v[near], J[near] = self._around(xs[near], s)
            vals[a:a + chunk], jacs[a:a + chunk] = v, J
        return (vals, jacs) if want_jac else vals


def mollify(u: Field, sigma: float, target: Box | None = None, samples: int = 24) -> Field:
    """Return ``u_sigma = rho_sigma * u`` with the standard bump kernel.

    The result lives on ``target`` when given (which must stay at distance
    ``sigma`` from the boundary of ``u.domain``), else on the domain shrunk by
    ``sigma``. Near flagged singular points the convolution is integrated in
    polar coordinates centered at the singularity, which keeps ``u_sigma``
    accurate and smooth there.
    """
    if not sigma > 0:
        raise ParameterError("sigma must be positive")
    inner = u.domain.lo_arr + sigma, u.domain.hi_arr - sigma
    if np.any(inner[1] <= inner[0]):
        raise DomainError(f"sigma={sigma} exceeds the half-width of the domain")
    if target is None:
        dom = Box(*inner)
    else:
        if not Box(*inner).contains_box(target):
            raise DomainError(f"target box is closer than sigma={sigma} to the domain boundary")
        dom = target
    mol = _Mollifier(u, float(sigma), samples)
    return Field(u.n, u.m, lambda x: mol(x), dom, "analytic",
                 lambda x: mol(x, want_jac=True)[1], (), f"mollified({u.name})",
                 {"sigma": sigma, "base": u.name})
