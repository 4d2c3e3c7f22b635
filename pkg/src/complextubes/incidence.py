"""Ball grids, ball-tube incidences and rich-ball counting.

A delta-ball q is incident to a delta-tube T when |q ∩ T| >= |q|/2.  For
balls away from the tube ends this depends only on the distance from the
ball centre to the tube axis, so the default ("fast") predicate compares that
distance with a threshold d* found once by numerical integration.  The
Monte-Carlo volume test ("oracle") is kept for cross-checks.
"""
from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import asdict, dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable

import numpy as np
from scipy import integrate, optimize, special
from scipy.spatial import cKDTree

from .cgeom import PreconditionError, as_cvec, embed
from .families import TubeFamily
from .solids import Ball, ComplexTube, overlap_volume, unit_ball_volume

GRID_MIN_DELTA = 2.0**-10
DENSE_LIMIT = 3 * 10**8
_KEY_LIMIT = 2**62


# --------------------------------------------------------------------------- calibration


def _perp_sphere_area(m: int) -> float:
    """Surface measure of the unit sphere in R^m (m >= 1); R^1 gives the two points."""
    return 2 * math.pi ** (m / 2) / special.gamma(m / 2)


def half_overlap_fraction(dist: float, n: int) -> float:
    """|q ∩ T| / |q| for a unit ball q whose centre is ``dist`` from the axis of a long unit tube in C^n."""
    k = 2 * n - 2
    area = _perp_sphere_area(k - 1)

    def section(t):
        a = 1.0 - (t - dist) ** 2
        if a <= 0:
            return 0.0
        r = math.sqrt(min(1.0 - t * t, a))
        return math.pi * area * (a * r ** (k - 1) / (k - 1) - r ** (k + 1) / (k + 1))

    lo, hi = max(-1.0, dist - 1.0), min(1.0, dist + 1.0)
    if lo >= hi:
        return 0.0
    val = integrate.quad(section, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
    return val / unit_ball_volume(2 * n)


@lru_cache(maxsize=None)
def incidence_threshold(n: int) -> float:
    """c_inc = d*/delta: centre-to-axis distance at which a delta-ball is half inside a delta-tube."""
    return optimize.brentq(lambda d: half_overlap_fraction(d, n) - 0.5, 0.0, 2.0, xtol=1e-13)


def _dist2(x, center_real, axis_pair, half_length) -> np.ndarray:
    """Squared distance to a complex segment with a fixed summation order.

    Written with explicit per-coordinate sums instead of BLAS so that the
    indexed and exhaustive counters round identically.
    """
    w = [x[..., i] - center_real[i] for i in range(len(center_real))]
    a0 = sum(w[i] * axis_pair[i, 0] for i in range(len(w)))
    a1 = sum(w[i] * axis_pair[i, 1] for i in range(len(w)))
    w2 = sum(wi * wi for wi in w)
    a2 = a0 * a0 + a1 * a1
    over = np.maximum(np.sqrt(a2) - half_length, 0.0)
    return np.maximum(w2 - a2, 0.0) + over * over


def _axis(u) -> np.ndarray:
    u = np.asarray(u, complex)
    return np.stack([embed(u), embed(1j * u)], axis=1)


def incident(q: Ball, T: ComplexTube, mode: str = "fast", samples: int = 20000, seed: int = 0) -> bool:
    """Whether the ball q lies (at least half) in the tube T."""
    if mode == "fast":
        rho = incidence_threshold(T.n) * q.radius
        d2 = _dist2(np.asarray(q.real_center, float), embed(T.center), _axis(T.direction), T.length / 2)
        return bool(d2 <= rho * rho)
    if mode == "oracle":
        return overlap_volume(q, T, samples=samples, seed=seed) >= 0.5 * q.volume
    raise PreconditionError(f"unknown incidence mode {mode!r}")


# --------------------------------------------------------------------------- grid


@dataclass(frozen=True)
class BallGrid:
    """Centres h*g, g in Z^{2n}, |h g| <= 1, with pitch h = 2 delta / sqrt(2n).

    The lattice is implicit: a ball is addressed by its integer vector g or by
    a flat int64 key, and the ball containing a point is found by rounding.
    """

    n: int
    delta: float

    @cached_property
    def dim(self) -> int:
        return 2 * self.n

    @cached_property
    def pitch(self) -> float:
        return 2 * self.delta / math.sqrt(2 * self.n)

    @cached_property
    def bound(self) -> int:
        """Largest admissible |g|^2."""
        return int(math.floor((1 + 1e-12) / self.pitch**2))

    @cached_property
    def m(self) -> int:
        return math.isqrt(self.bound)

    @cached_property
    def side(self) -> int:
        return 2 * self.m + 1

    @cached_property
    def _count(self) -> int:
        one = np.zeros(self.bound + 1, dtype=object)
        for g in range(-self.m, self.m + 1):
            one[g * g] += 1
        acc = one.copy()
        for _ in range(self.dim - 1):
            acc = np.convolve(acc, one)[: self.bound + 1]
        return int(acc.sum())

    def __len__(self) -> int:
        return self._count

    def contains_index(self, g) -> np.ndarray:
        g = np.asarray(g, np.int64)
        return np.einsum("...i,...i->...", g, g) <= self.bound

    def _check_keys(self) -> None:
        if self.side**self.dim >= _KEY_LIMIT:
            raise PreconditionError("grid too fine for int64 keys")

    def keys(self, g) -> np.ndarray:
        self._check_keys()
        g = np.asarray(g, np.int64) + self.m
        out = np.zeros(g.shape[:-1], np.int64)
        for i in range(self.dim - 1, -1, -1):
            out = out * self.side + g[..., i]
        return out

    def unkey(self, keys) -> np.ndarray:
        k = np.asarray(keys, np.int64).copy()
        out = np.empty(k.shape + (self.dim,), np.int64)
        for i in range(self.dim):
            out[..., i] = k % self.side - self.m
            k //= self.side
        return out

    def point(self, g) -> np.ndarray:
        """Real centre of lattice index g."""
        return np.asarray(g, np.int64) * self.pitch

    def nearest(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Nearest lattice index to each real point, plus whether it is a grid ball."""
        g = np.rint(np.asarray(x, float) / self.pitch).astype(np.int64)
        return g, self.contains_index(g)

    def indices(self, limit: int = 5 * 10**6) -> np.ndarray:
        """All lattice indices, in key order."""
        if len(self) > limit:
            raise PreconditionError(f"grid has {len(self)} balls; enumeration limited to {limit}")
        out = np.zeros((1, 0), np.int64)
        rng = np.arange(-self.m, self.m + 1)
        for _ in range(self.dim):
            sq = np.einsum("ij,ij->i", out, out)
            nxt = np.concatenate([np.broadcast_to(out[:, None, :], (len(out), len(rng), out.shape[1])),
                                  np.broadcast_to(rng[None, :, None], (len(out), len(rng), 1))], axis=2)
            out = nxt[(sq[:, None] + rng[None, :] ** 2) <= self.bound]
        order = np.argsort(self.keys(out), kind="stable")
        return out[order]

    def centers(self, limit: int = 5 * 10**6) -> np.ndarray:
        """Complex centres of all balls."""
        x = self.point(self.indices(limit))
        return x[:, 0::2] + 1j * x[:, 1::2]

    def ball(self, g) -> Ball:
        x = self.point(g)
        return Ball(x[0::2] + 1j * x[1::2], self.delta)


def ball_grid(n: int, delta: float) -> BallGrid:
    if n < 1:
        raise PreconditionError("n must be >= 1")
    if not GRID_MIN_DELTA <= delta < 1:
        raise PreconditionError(f"delta must lie in [2^-10, 1), got {delta}")
    return BallGrid(n, float(delta))


# --------------------------------------------------------------------------- counting


def _offsets(k: int, dims: int) -> np.ndarray:
    grids = np.meshgrid(*([np.arange(k)] * dims), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)


def tube_ball_indices(grid: BallGrid, center, direction, half_length: float, rho: float) -> np.ndarray:
    """Lattice indices of all grid balls whose centre is within rho of the segment.

    Slices along the complex coordinate a where |u_a| is largest: the a-th
    coordinate of a hit is within |u_a| L + rho of c_a, and given it, every
    other real coordinate is within rho/|u_a| of the point on the axis.
    """
    c, u = as_cvec(center), as_cvec(direction)
    n, h = grid.n, grid.pitch
    a = int(np.argmax(np.abs(u)))
    ua = u[a]
    reach = abs(ua) * half_length + rho
    eps = 1e-9 * (1 + reach)
    lo = np.floor((np.array([c[a].real, c[a].imag]) - reach - eps) / h).astype(np.int64)
    hi = np.ceil((np.array([c[a].real, c[a].imag]) + reach + eps) / h).astype(np.int64)
    lo, hi = np.maximum(lo, -grid.m), np.minimum(hi, grid.m)
    if np.any(lo > hi):
        return np.zeros((0, 2 * n), np.int64)
    gx, gy = np.meshgrid(np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1), indexing="ij")
    gx, gy = gx.ravel(), gy.ravel()
    xa = gx * h + 1j * (gy * h)
    keep = np.abs(xa - c[a]) <= reach + eps
    gx, gy, xa = gx[keep], gy[keep], xa[keep]
    others = [b for b in range(n) if b != a]
    if not others:
        g = np.stack([gx, gy], axis=1)
    else:
        z0 = (xa - c[a]) / ua
        y = c[others][None, :] + z0[:, None] * u[others][None, :]
        yr = np.empty((len(z0), 2 * len(others)))
        yr[:, 0::2], yr[:, 1::2] = y.real, y.imag
        w = rho / abs(ua) * (1 + 1e-9) + 1e-12
        k = int(math.floor(2 * w / h)) + 2
        base = np.floor((yr - w) / h).astype(np.int64)
        off = _offsets(k, 2 * len(others))
        rest = base[:, None, :] + off[None, :, :]
        # the off-axis part of a hit lies in the w-ball around y, not just the box
        diff = rest * h - yr[:, None, :]
        near = np.einsum("pmi,pmi->pm", diff, diff) <= w * w
        p_idx, m_idx = np.nonzero(near)
        rest = rest[p_idx, m_idx]
        g = np.empty((len(rest), 2 * n), np.int64)
        g[:, 2 * a], g[:, 2 * a + 1] = gx[p_idx], gy[p_idx]
        for j, b in enumerate(others):
            g[:, 2 * b], g[:, 2 * b + 1] = rest[:, 2 * j], rest[:, 2 * j + 1]
    g = g[grid.contains_index(g)]
    d2 = _dist2(grid.point(g), embed(c), _axis(u), half_length)
    return g[d2 <= rho * rho]


def _family_rho(grid: BallGrid, c_inc: float | None) -> float:
    return (incidence_threshold(grid.n) if c_inc is None else c_inc) * grid.delta


def ball_counts(grid: BallGrid, family: TubeFamily, c_inc: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Sorted keys of balls met by at least one tube, with their tube counts."""
    if family.n != grid.n:
        raise PreconditionError("grid and family live in different dimensions")
    rho = _family_rho(grid, c_inc)
    total = grid.side**grid.dim
    if total <= DENSE_LIMIT:
        dense = np.zeros(total, np.uint16 if len(family) < 2**16 else np.uint32)
        for c, u, l in zip(family.centers, family.directions, family.lengths):
            k = grid.keys(tube_ball_indices(grid, c, u, l / 2, rho))
            dense[k] += 1  # keys are unique per tube
        keys = np.flatnonzero(dense)
        return keys.astype(np.int64), dense[keys].astype(np.int64)
    keys = np.zeros(0, np.int64)
    counts = np.zeros(0, np.int64)
    buf, size = [], 0

    def merge():
        nonlocal keys, counts, buf, size
        if not buf:
            return
        k, c = np.unique(np.concatenate(buf), return_counts=True)
        allk = np.concatenate([keys, k])
        allc = np.concatenate([counts, c])
        keys, inv = np.unique(allk, return_inverse=True)
        counts = np.bincount(inv.ravel(), weights=allc, minlength=len(keys)).astype(np.int64)
        buf, size = [], 0

    for c, u, l in zip(family.centers, family.directions, family.lengths):
        k = grid.keys(tube_ball_indices(grid, c, u, l / 2, rho))
        buf.append(k)
        size += len(k)
        if size > 2 * 10**7:
            merge()
    merge()
    return keys, counts


def ball_counts_exhaustive(grid: BallGrid, family: TubeFamily, c_inc: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """All-pairs version of ball_counts, for small grids."""
    g = grid.indices()
    x = grid.point(g)
    rho = _family_rho(grid, c_inc)
    counts = np.zeros(len(g), np.int64)
    for c, u, l in zip(family.centers, family.directions, family.lengths):
        counts += _dist2(x, embed(c), _axis(u), l / 2) <= rho * rho
    keys = grid.keys(g)
    hit = counts > 0
    return keys[hit], counts[hit]


# --------------------------------------------------------------------------- profiles


def family_id(family: TubeFamily) -> str:
    return hashlib.sha256(family.dumps().encode()).hexdigest()[:16]


@dataclass
class RichnessProfile:
    """|P_r| for dyadic r = 1, 2, 4, ... up to the first empty level."""

    entries: dict[int, int]
    delta: float
    family: str
    mode: str = "indexed"
    grid_size: int = 0

    def __getitem__(self, r: int) -> int:
        return self.entries.get(r, 0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["r", "count"])
        for r in sorted(self.entries):
            wr.writerow([r, self.entries[r]])
        return buf.getvalue()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["entries"] = {str(r): c for r, c in sorted(self.entries.items())}
        return d


def profile_from_counts(counts: np.ndarray) -> dict[int, int]:
    counts = np.asarray(counts, np.int64)
    entries, r = {}, 1
    while True:
        entries[r] = int(np.count_nonzero(counts >= r))
        if entries[r] == 0:
            return entries
        r *= 2


def richness_profile(grid: BallGrid, family: TubeFamily, mode: str = "indexed") -> RichnessProfile:
    if not math.isclose(grid.delta, family.delta, rel_tol=1e-12):
        raise PreconditionError("grid and family use different delta")
    if mode == "indexed":
        _, counts = ball_counts(grid, family)
    elif mode == "exhaustive":
        _, counts = ball_counts_exhaustive(grid, family)
    else:
        raise PreconditionError(f"unknown counting mode {mode!r}")
    return RichnessProfile(profile_from_counts(counts), grid.delta, family_id(family), mode, len(grid))


# --------------------------------------------------------------------------- dyadic pigeonholing


@dataclass
class DyadicClass:
    k: int
    members: list
    total: float

    @property
    def interval(self) -> tuple[float, float]:
        return (2.0**self.k, 2.0 ** (self.k + 1))


def dyadic_class(value: float) -> int:
    """k with 2^k <= value < 2^(k+1)."""
    return math.frexp(value)[1] - 1


def dyadic_pigeonhole(weights: Iterable) -> DyadicClass:
    """The dyadic value class [2^k, 2^{k+1}) of largest total weight (ties go to the larger k)."""
    weights = list(weights)
    if not weights:
        raise PreconditionError("dyadic pigeonholing needs at least one weight")
    classes: dict[int, list] = {}
    for item, value in weights:
        if not value > 0:
            raise PreconditionError(f"weight of {item!r} is not positive")
        classes.setdefault(dyadic_class(float(value)), []).append((item, value))
    k = max(classes, key=lambda j: (math.fsum(v for _, v in classes[j]), j))
    members = classes[k]
    return DyadicClass(k, [it for it, _ in members], math.fsum(v for _, v in members))


# --------------------------------------------------------------------------- dichotomy


@dataclass
class DichotomyReport:
    lam: float
    rho: float
    D: float
    E: float
    epsilon: float
    slack: float
    balls: int
    tubes: int
    thin_bound_value: float
    thin_ratio: float
    thin_holds: bool
    tube_threshold: float
    capture_threshold: float
    thick_cover: list = field(default_factory=list)
    captured: int = 0
    capture_fraction: float = 0.0
    thick_holds: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


def _centres_real(balls) -> np.ndarray:
    if isinstance(balls, np.ndarray):
        arr = balls
    else:
        arr = [b.real_center if isinstance(b, Ball) else embed(as_cvec(b)) for b in balls]
    arr = np.asarray(arr)
    if np.iscomplexobj(arr):
        arr = embed(arr)
    return np.asarray(arr, float).reshape(len(arr), -1)


def tube_counts_at(points_real: np.ndarray, family: TubeFamily, reach) -> np.ndarray:
    """For each point, the number of tubes whose axis segment is within ``reach`` (scalar or per-tube)."""
    reach = np.broadcast_to(np.asarray(reach, float), (len(family),))
    out = np.zeros(len(points_real), np.int64)
    for c, u, l, r in zip(family.centers, family.directions, family.lengths, reach):
        out += _dist2(points_real, embed(c), _axis(u), l / 2) <= r * r
    return out


def heavy_ball_check(balls, family: TubeFamily, E: float, epsilon: float, D: float, slack: float = 64.0) -> DichotomyReport:
    """Test both alternatives of the thin/thick dichotomy for unit balls and D-long unit tubes.

    Thin: |P| <= slack * lambda^2 rho^-2 E^-2 D^{2(n-1)} |T|.
    Thick: greedily pick 2 lambda-balls on a lambda-lattice (centres at least
    2 lambda apart, ordered by how many tubes they meet), keep those meeting
    >= E lambda^-2 rho^-2n / slack tubes, and ask that they capture at least
    lambda^-2(n+1) rho^-2n / slack of the balls of P.
    """
    n = family.n
    if not (0 < epsilon < 1 and D > 1):
        raise PreconditionError("need 0 < epsilon < 1 and D > 1")
    lam = D ** (epsilon / (100 * n))
    rho = D ** (epsilon**3) / lam
    x = _centres_real(balls) if len(balls) else np.zeros((0, 2 * n))
    c_inc = incidence_threshold(n)
    counts = tube_counts_at(x, family, c_inc * family.radii)
    bad = np.flatnonzero((counts < E) | (counts >= 2 * E))
    if len(bad):
        i = int(bad[0])
        raise PreconditionError(f"ball {i} at {x[i].tolist()} lies in {int(counts[i])} tubes, outside [E, 2E)")
    T = len(family)
    bound = lam**2 * rho**-2 * E**-2.0 * D ** (2 * (n - 1)) * T if E > 0 else math.inf
    thin_ratio = len(x) / bound if bound else math.inf
    report = DichotomyReport(
        lam, rho, D, E, epsilon, slack, len(x), T, bound, thin_ratio, thin_ratio <= slack,
        tube_threshold=E * lam**-2 * rho ** (-2 * n) / slack,
        capture_threshold=lam ** (-2 * (n + 1)) * rho ** (-2 * n) / slack,
    )
    if not len(x):
        return report
    g = np.unique(np.rint(x / lam).astype(np.int64), axis=0)
    cand = g * lam
    reach = 3 * lam + family.radii  # Q_j meets the lambda-neighbourhood of T
    met = tube_counts_at(cand, family, reach)
    order = np.lexsort((np.arange(len(cand)), -met))
    # accepted centres are lattice points, so "closer than 2 lambda" means an offset with |v|^2 < 4
    span = np.arange(-1, 2)
    near = np.stack(np.meshgrid(*([span] * (2 * n)), indexing="ij"), -1).reshape(-1, 2 * n)
    near = near[np.einsum("ij,ij->i", near, near) < 4]
    taken: set = set()
    chosen = []
    for i in order:
        if met[i] < report.tube_threshold:
            break
        if not any(tuple(v) in taken for v in (g[i] + near).tolist()):
            taken.add(tuple(g[i].tolist()))
            chosen.append(int(i))
    if chosen:
        q = cand[chosen]
        dist, _ = cKDTree(q).query(x, k=1)
        captured = dist <= 2 * lam
        report.captured = int(captured.sum())
        report.capture_fraction = report.captured / len(x)
        report.thick_cover = [{"center": c.tolist(), "tubes": int(met[i])} for c, i in zip(q, chosen)]
        report.thick_holds = report.capture_fraction >= report.capture_threshold
    return report


def rescale_family(family: TubeFamily, factor: float) -> TubeFamily:
    return TubeFamily(
        family.n, family.delta * factor, family.big_w, family.spacing_kind, family.spacing_param, family.seed,
        family.centers * factor, family.directions, family.lengths * factor, family.radii * factor, dict(family.meta),
    )


def dichotomy_instance(n: int, D: float, kind: str, tubes: int, seed: int, level: str = "top"):
    """A premise-satisfying (balls, family, E) triple at scale D.

    ``kind`` is "generic" (random tubes), "concentrated" (a bush through one
    point) or "mixed".  Balls are the unit lattice balls of the dyadic count
    class picked by ``level`` ("top" = richest class, "bottom" = E = 1).
    """
    rng = np.random.default_rng(seed)
    delta = 1.0 / D

    def random_dirs(k):
        z = rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n))
        return z / np.linalg.norm(z, axis=1, keepdims=True)

    def generic(k):
        c = rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n))
        c *= (0.5 * rng.uniform(size=(k, 1)) ** (1 / (2 * n))) / np.linalg.norm(c, axis=1, keepdims=True)
        return c, random_dirs(k)

    def bush(k):
        p = 0.1 * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        u = random_dirs(k)
        z = 0.3 * rng.uniform(-1, 1, k) * np.exp(2j * np.pi * rng.uniform(size=k))
        return p[None, :] - z[:, None] * u, u

    if kind == "generic":
        c, u = generic(tubes)
    elif kind == "concentrated":
        c, u = bush(tubes)
    elif kind == "mixed":
        c1, u1 = generic(tubes - tubes // 2)
        c2, u2 = bush(tubes // 2)
        c, u = np.concatenate([c1, c2]), np.concatenate([u1, u2])
    else:
        raise PreconditionError(f"unknown configuration kind {kind!r}")
    small = TubeFamily(n, delta, 1.0, "unconstrained", 0, seed, c, u, np.ones(len(c)), np.full(len(c), delta))
    grid = ball_grid(n, delta)
    keys, counts = ball_counts(grid, small)
    if level == "top":
        E = 2 ** dyadic_class(float(counts.max()))
    elif level == "bottom":
        E = 1
    else:
        E = 2 ** int(level)
    pick = (counts >= E) & (counts < 2 * E)
    centres = grid.point(grid.unkey(keys[pick])) * D
    return centres, rescale_family(small, D), E


# --------------------------------------------------------------------------- bounds


@dataclass
class BoundReport:
    theorem: str
    epsilon: float
    constant: float
    c1: float
    threshold: float
    size: int
    rows: list
    verdict: bool

    def to_dict(self) -> dict:
        return asdict(self)


def bound_threshold(family: TubeFamily, theorem: str, epsilon: float, c1: float = 1.0) -> float:
    n, delta, T = family.n, family.delta, len(family)
    if theorem == "t41":
        return c1 * delta ** (2 * (n - 1) - epsilon) * T
    h0 = family.spacing_param
    if family.spacing_kind == "at-most-H0":
        return max(delta ** (2 * (n - 1) - epsilon) * family.big_w ** (4 * (n - 1)), 1 + h0)
    return max(delta ** (2 * (n - 1) - epsilon) * T, 1 + h0)


def bound_value(family: TubeFamily, theorem: str, r: float, epsilon: float) -> float:
    """The theorem's right-hand side without the constant."""
    n, delta, T, W = family.n, family.delta, len(family), family.big_w
    if theorem == "t41":
        return delta**-epsilon * W ** (-2 * (n - 1)) * r**-2.0 * T**2
    p = -(n + 1) / (n - 1)
    if family.spacing_kind == "at-most-H0":
        return delta**-epsilon * W ** (4 * n) * r**p
    return delta**-epsilon * T ** (n / (n - 1)) * r**p


def verify_bound(family: TubeFamily, profile: RichnessProfile, theorem: str, epsilon: float, constant: float,
                 c1: float = 1.0) -> BoundReport:
    if theorem not in ("t41", "t42"):
        raise PreconditionError(f"unknown theorem {theorem!r}")
    if theorem == "t42":
        if family.spacing_kind not in ("exact-H0", "at-most-H0"):
            raise PreconditionError("t42 needs an exact-H0 or at-most-H0 family")
        if family.n not in (2, 3):
            raise PreconditionError("t42 holds for n = 2 or 3 only")
    thr = bound_threshold(family, theorem, epsilon, c1)
    rows = []
    for r in sorted(profile.entries):
        if r < thr:
            continue
        count = profile.entries[r]
        b = constant * bound_value(family, theorem, r, epsilon)
        rows.append({"r": r, "count": count, "bound": b, "ratio": count / b})
    return BoundReport(theorem, epsilon, constant, c1, thr, len(family), rows, all(row["ratio"] <= 1 for row in rows))


def fit_exponent(points) -> float:
    """Least-squares slope of log y against log x."""
    pts = np.asarray(list(points), float)
    if pts.ndim != 2 or len(pts) < 2:
        raise PreconditionError("need at least two points")
    if np.any(pts <= 0):
        raise PreconditionError("points must be positive")
    return float(np.polyfit(np.log(pts[:, 0]), np.log(pts[:, 1]), 1)[0])
