"""Lower bounds of G_eps via packing candidates, epsilon sweeps and extrapolation."""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import DomainError, NumericError, ParameterError
from .field import Field, QuadratureRule, mollify
from .functionals import CoreFunctional, alpha_cells
from .geometry import Box, PackingFamily, ReferenceCell, RotationGroup, packing_candidates
from .psi import PsiEvaluator, estimate_null_space, limit_integral, norm_integral


@dataclass(frozen=True)
class PackingConfig:
    reference: ReferenceCell | None = None
    group: RotationGroup | None = None
    offsets_per_axis: int = 4
    greedy: bool = False
    rule: QuadratureRule = dc_field(default_factory=QuadratureRule)
    threads: int | None = None

    def workers(self) -> int:
        return max(1, self.threads or os.cpu_count() or 1)


@dataclass
class SeminormValue:
    value: float
    family: PackingFamily | tuple | None
    coverage: float
    family_id: str
    cells: int


def _family_sum(F: CoreFunctional, u: Field, fam: PackingFamily, rule: QuadratureRule) -> float:
    parts = []
    for R, trans in fam.groups():
        parts.append(alpha_cells(F, u, fam.reference, fam.epsilon, R, trans, rule))
    vals = np.concatenate(parts) if parts else np.zeros(0)
    if not np.all(np.isfinite(vals)):
        bad = int(np.nonzero(~np.isfinite(vals))[0][0])
        raise NumericError(f"non-finite alpha on cell at {fam.translations[bad].tolist()}")
    return math.fsum(vals)


def _family_id(fam: PackingFamily) -> str:
    return f"o{fam.meta.get('offset_index', 0)}r{fam.meta.get('rotation_index', 0)}"


def _single_box(F, u, ambient: Box, epsilon, config: PackingConfig) -> SeminormValue:
    n = ambient.n
    reference = config.reference or ReferenceCell.cube(n)
    group = config.group
    if group is not None and len(group) > 1 and not F.admits_rotations:
        raise ParameterError(f"{F.variant} is only defined for the trivial group")
    fams = packing_candidates(ambient, reference, epsilon, group, config.offsets_per_axis,
                              config.greedy)
    if not fams or F.variant == "trivial":
        best = fams[0] if fams else None
        return SeminormValue(0.0, best, best.coverage if best else 0.0,
                             _family_id(best) if best else "", len(best) if best else 0)
    workers = min(config.workers(), len(fams))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            sums = list(pool.map(lambda f: _family_sum(F, u, f, config.rule), fams))
    else:
        sums = [_family_sum(F, u, f, config.rule) for f in fams]
    k = int(np.argmax(sums))  # first maximizer in (offset, rotation) order
    scale = epsilon ** (n - F.p)
    fam = fams[k]
    return SeminormValue(scale * sums[k], fam, fam.coverage, _family_id(fam), len(fam))


def seminorm_at(F: CoreFunctional, u: Field, ambient, epsilon: float,
                config: PackingConfig | None = None) -> SeminormValue:
    """eps^(n-p) times the best candidate-family sum of alpha_p; a lower bound of G_eps.

    ``ambient`` may be a box or a sequence of disjoint boxes; for a union the
    candidates are unions of per-box candidates, so the value is the sum of
    the per-box maxima.
    """
    if not epsilon > 0:
        raise ParameterError("epsilon must be positive")
    if F.m != u.m:
        raise ParameterError(f"functional expects m={F.m}, field has m={u.m}")
    config = config or PackingConfig()
    if isinstance(ambient, Box):
        return _single_box(F, u, ambient, float(epsilon), config)
    parts = [_single_box(F, u, b, float(epsilon), config) for b in ambient]
    total = math.fsum(p.value for p in parts)
    measure = sum(b.measure for b in ambient)
    cov = sum(p.coverage * b.measure for p, b in zip(parts, ambient)) / measure
    return SeminormValue(total, tuple(p.family for p in parts), cov,
                         "+".join(p.family_id for p in parts), sum(p.cells for p in parts))


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SweepRow:
    epsilon: float
    value: float
    coverage: float
    family_id: str
    cells: int
    seconds: float


@dataclass
class SweepResult:
    rows: list
    extrapolated_limit: float
    loglog_slope: float
    k_fit: int
    divergent: bool
    p: float = 2.0
    n: int = 2

    @property
    def epsilons(self) -> np.ndarray:
        return np.array([r.epsilon for r in self.rows])

    @property
    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.rows])

    @property
    def families_used(self) -> list:
        return [(r.family_id, r.coverage) for r in self.rows]

    def limit_or_flag(self):
        return "divergent" if self.divergent else self.extrapolated_limit


def richardson(eps, vals, points: int = 3) -> float:
    """Value at eps = 0 of the polynomial through the last ``points`` samples."""
    e = np.asarray(eps, dtype=float)[-points:]
    v = np.asarray(vals, dtype=float)[-points:]
    total = 0.0
    for i in range(len(e)):
        w = 1.0
        for j in range(len(e)):
            if j != i:
                w *= (0 - e[j]) / (e[i] - e[j])
        total += w * v[i]
    return float(total)


def loglog_slope(eps, vals, k: int) -> float:
    e = np.asarray(eps, dtype=float)[-k:]
    v = np.asarray(vals, dtype=float)[-k:]
    if len(e) < 2:
        raise ParameterError("slope fitting needs at least two epsilon values")
    if np.any(v <= 0):
        return 0.0 if np.all(v == 0) else float("nan")
    return float(np.polyfit(np.log(e), np.log(v), 1)[0])


def is_divergent(eps, vals, slope: float, k: int, slope_max: float = -0.1,
                 growth: float = 0.05) -> bool:
    """Slope below ``slope_max`` and values growing by ``growth`` per halving."""
    e = np.asarray(eps, dtype=float)[-k:]
    v = np.asarray(vals, dtype=float)[-k:]
    if not slope < slope_max or len(v) < 2:
        return False
    for i in range(len(v) - 1):
        halvings = math.log2(e[i] / e[i + 1])
        if not v[i + 1] >= v[i] * (1 + growth) ** halvings:
            return False
    return True


def sweep(F: CoreFunctional, u: Field, ambient, epsilons, config: PackingConfig | None = None,
          k_fit: int = 4, slope_max: float = -0.1, growth: float = 0.05, log=None) -> SweepResult:
    """Independent seminorm evaluations along a decreasing epsilon list."""
    eps = [float(e) for e in epsilons]
    if len(eps) < 2:
        raise ParameterError("a sweep needs at least two epsilon values")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ParameterError("epsilons must be strictly decreasing")
    rows = []
    for e in eps:
        t0 = time.perf_counter()
        try:
            res = seminorm_at(F, u, ambient, e, config)
        except Exception as err:
            err.epsilon = e
            raise
        rows.append(SweepRow(e, res.value, res.coverage, res.family_id, res.cells,
                             time.perf_counter() - t0))
        if log is not None:
            log(rows[-1])
    vals = [r.value for r in rows]
    k = min(k_fit, len(rows))
    slope = loglog_slope(eps, vals, k)
    div = is_divergent(eps, vals, slope, k, slope_max, growth)
    limit = richardson(eps, vals, min(3, len(rows)))
    n = ambient.n if isinstance(ambient, Box) else ambient[0].n
    return SweepResult(rows, limit, slope, k, div, F.p, n)


def dyadic(first: int, last: int) -> list:
    """[1/first, 1/(2 first), ..., 1/last] for powers of two."""
    out, d = [], first
    while d <= last:
        out.append(1.0 / d)
        d *= 2
    return out


# ---------------------------------------------------------------------------
# mollified chain


@dataclass
class ChainReport:
    left: float
    middle: float
    right: float
    constant: float
    slack: float

    @property
    def holds(self) -> bool:
        s = 1 + self.slack
        return self.left <= self.middle * s + 1e-14 and self.middle <= self.right * s + 1e-14


def mollified_chain_check(F: CoreFunctional, u: Field, ambient: Box, inner: Box, sigma: float,
                          epsilon: float, config: PackingConfig | None = None,
                          slack: float = 0.02, pieces: int = 16) -> ChainReport:
    """C int |pi_P grad u_sigma|^p <= int psi(grad u_sigma) <= G_eps(u, ambient).

    The integrals run over ``inner``, which must stay at distance ``sigma``
    from the boundary of ``ambient``.
    """
    if np.any(ambient.sides <= 2 * sigma) or not ambient.shrink(sigma).contains_box(inner):
        raise DomainError("inner box plus its sigma-neighborhood must lie inside the ambient box")
    config = config or PackingConfig()
    ev = PsiEvaluator(F, config.reference or ReferenceCell.cube(ambient.n), config.group)
    us = mollify(u, sigma, target=inner)
    report = estimate_null_space(ev)
    middle = limit_integral(ev, us, inner, "full_gradient", config.rule, pieces)
    if report.null_dim == ev.m * ev.n:
        left = 0.0
    else:
        left = report.min_on_unit_sphere * norm_integral(us, inner, F.p, report, config.rule,
                                                          pieces)
    right = seminorm_at(F, u, ambient, epsilon, config).value
    return ChainReport(left, middle, right, report.min_on_unit_sphere, slack)
