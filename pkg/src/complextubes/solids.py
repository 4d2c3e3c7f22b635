"""Solids in C^n viewed as R^(2n): complex tubes, balls and dual slabs.

Also home to the intersection-volume formulas for neighbourhoods of two complex
lines, the slice lemma behind them, and the half-overlap ("essential") predicates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .cgeom import PreconditionError, as_cvec, embed, hdot, hnorm, perp_frame, rotate2

DEFAULT_CHUNK = 1 << 20


def unit_ball_volume(k: int) -> float:
    """Volume of the unit ball in R^k (k >= 0)."""
    return math.pi ** (k / 2) / math.gamma(k / 2 + 1)


# --------------------------------------------------------------------------- solids


@dataclass(frozen=True, eq=False)
class ComplexTube:
    """Radius-``radius`` neighbourhood of {center + z*direction : |z| <= length/2}."""

    center: np.ndarray
    direction: np.ndarray
    length: float
    radius: float

    _min_aspect = 10.0

    def __post_init__(self):
        c = as_cvec(self.center)
        d = as_cvec(self.direction)
        if c.shape != d.shape or c.ndim != 1:
            raise PreconditionError("center and direction must be complex vectors of equal length")
        nrm = float(hnorm(d))
        if nrm == 0:
            raise PreconditionError("direction must be nonzero")
        if abs(nrm - 1.0) > 1e-12:
            d = d / nrm
        if not (self.radius > 0 and self.length >= self._min_aspect * self.radius):
            raise PreconditionError(f"tube needs radius > 0 and length >= 10*radius (got l={self.length}, r={self.radius})")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "direction", d)
        object.__setattr__(self, "length", float(self.length))
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def n(self) -> int:
        return self.center.shape[0]

    @property
    def dim(self) -> int:
        return 2 * self.n

    @property
    def volume(self) -> float:
        return tube_volume(self.n, self.length, self.radius)

    def distance(self, p) -> np.ndarray:
        return segment_distance(self.center, self.direction, self.length / 2, p)

    def contains(self, p) -> np.ndarray:
        return self.distance(p) <= self.radius

    def contains_real(self, x) -> np.ndarray:
        """Membership test for points already embedded in R^(2n)."""
        d2 = segment_dist2_real(x, embed(self.center), _axis_pair(self.direction), self.length / 2)
        return d2 <= self.radius * self.radius

    def frame(self) -> np.ndarray:
        """Orthonormal real basis (rows): two long axes, then 2(n-1) short axes."""
        perp = perp_frame(self.direction)
        rows = [embed(self.direction), embed(1j * self.direction)]
        for e in perp:
            rows += [embed(e), embed(1j * e)]
        return np.array(rows)

    def translated(self, shift) -> "ComplexTube":
        return ComplexTube(self.center + as_cvec(shift), self.direction, self.length, self.radius)


@dataclass(frozen=True, eq=False)
class Ball:
    """A ball; a complex centre lives in C^n = R^(2n), a real centre in R^d."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center)
        c = c.astype(complex) if np.iscomplexobj(c) else c.astype(float)
        if c.ndim != 1:
            raise PreconditionError("ball center must be a vector")
        if not self.radius > 0:
            raise PreconditionError("ball radius must be positive")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.center)

    @property
    def dim(self) -> int:
        return 2 * self.center.shape[0] if self.is_complex else self.center.shape[0]

    @property
    def real_center(self) -> np.ndarray:
        return embed(self.center) if self.is_complex else self.center

    @property
    def volume(self) -> float:
        return unit_ball_volume(self.dim) * self.radius**self.dim

    def contains(self, p) -> np.ndarray:
        p = np.asarray(p)
        pr = embed(p) if np.iscomplexobj(p) else p
        return np.linalg.norm(pr - self.real_center, axis=-1) <= self.radius

    def translated(self, shift) -> "Ball":
        return Ball(self.center + np.asarray(shift), self.radius)


@dataclass(frozen=True, eq=False)
class Slab:
    """Box {x : |<x - center, axes[k]>| <= half_widths[k]} with orthonormal real axes."""

    center: np.ndarray
    axes: np.ndarray
    half_widths: np.ndarray

    def __post_init__(self):
        axes = np.asarray(self.axes, dtype=float)
        hw = np.asarray(self.half_widths, dtype=float)
        if np.any(hw <= 0):
            raise PreconditionError("slab half-widths must be positive")
        if not np.allclose(axes @ axes.T, np.eye(len(axes)), atol=1e-10):
            raise PreconditionError("slab axes must be orthonormal")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "half_widths", hw)

    def contains(self, x) -> np.ndarray:
        coords = (np.asarray(x, dtype=float) - self.center) @ self.axes.T
        return np.all(np.abs(coords) <= self.half_widths, axis=-1)


@dataclass(frozen=True)
class VolumeEstimate:
    value: float
    standard_error: float
    samples: int
    seed: int
    shards: int = 1
    hits: int = field(default=0, compare=False)


# --------------------------------------------------------------------------- geometry


def _axis_pair(direction) -> np.ndarray:
    """Real 2n x 2 matrix whose columns are iota(u) and iota(i u)."""
    return np.stack([embed(direction), embed(1j * np.asarray(direction))], axis=1)


def segment_dist2_real(x, center_real, axis_pair, half_length) -> np.ndarray:
    """Squared distance from real points ``x`` (..., 2n) to a complex segment.

    The complex coefficient <x - c, u> has real/imag parts (x - c) @ axis_pair;
    clamping it to |z| <= half_length adds (|a| - half_length)_+^2 to the
    perpendicular part |w|^2 - |a|^2.
    """
    w = x - center_real
    a = w @ axis_pair
    a2 = np.einsum("...i,...i->...", a, a)
    w2 = np.einsum("...i,...i->...", w, w)
    over = np.maximum(np.sqrt(a2) - half_length, 0.0)
    return np.maximum(w2 - a2, 0.0) + over * over


def segment_distance(center, direction, half_length, p) -> np.ndarray:
    """Hermitian distance from complex points ``p`` to the segment {c + z u : |z| <= half_length}."""
    x = embed(np.asarray(p, dtype=complex))
    return np.sqrt(segment_dist2_real(x, embed(center), _axis_pair(direction), half_length))


def tube_contains_point(T: ComplexTube, p) -> np.ndarray | bool:
    out = T.contains(p)
    return bool(out) if np.ndim(out) == 0 else out


def tube_volume(n: int, length: float, radius: float) -> float:
    """Exact volume of a complex tube in R^(2n) (Steiner formula for a flat 2-disk)."""
    k = 2 * n - 2
    a = length / 2
    return (
        math.pi * a * a * unit_ball_volume(k) * radius**k
        + math.pi * a * unit_ball_volume(k + 1) * radius ** (k + 1)
        + unit_ball_volume(k + 2) * radius ** (k + 2)
    )


# --------------------------------------------------------------------------- slice lemma


def _check_slope(r_slope):
    if np.any(np.asarray(r_slope) <= 0):
        raise PreconditionError("r_slope must be positive")


def projection_residual(x, y, r_slope, zeta) -> np.ndarray:
    """Norm of the component of (x, y) in R^4 orthogonal to the plane W.

    W is spanned by (1, 0, r cos z, r sin z) and (0, 1, -r sin z, r cos z),
    i.e. the embedded complex line through 0 and (1, r e^{iz}). Closed form:
    sqrt(r^2 / (1 + r^2)) * |x - R_z(y) / r|.
    """
    _check_slope(r_slope)
    x = np.asarray(x, dtype=float)
    r = np.asarray(r_slope, dtype=float)
    diff = x - rotate2(y, zeta) / r[..., None]
    return np.sqrt(r * r / (1 + r * r)) * np.linalg.norm(diff, axis=-1)


def projection_residual_oracle(x, y, r_slope, zeta) -> float:
    """Same quantity by explicit Gram-Schmidt projection (single input)."""
    _check_slope(r_slope)
    c, s = math.cos(zeta), math.sin(zeta)
    w1 = np.array([1.0, 0.0, r_slope * c, r_slope * s])
    w2 = np.array([0.0, 1.0, -r_slope * s, r_slope * c])
    basis = []
    for w in (w1, w2):
        for b in basis:
            w = w - (w @ b) * b
        basis.append(w / np.linalg.norm(w))
    p = np.concatenate([np.asarray(x, float), np.asarray(y, float)])
    resid = p - sum((p @ b) * b for b in basis)
    return float(np.linalg.norm(resid))


def slice_membership(x, y, r_slope, zeta, delta) -> np.ndarray:
    """Whether x lies in the open planar ball B(R_z(y)/r, delta*sqrt(1+r^2)/r)."""
    _check_slope(r_slope)
    if np.any(np.asarray(delta) <= 0):
        raise PreconditionError("delta must be positive")
    r = np.asarray(r_slope, dtype=float)
    centre = rotate2(y, zeta) / r[..., None]
    radius = np.asarray(delta) * np.sqrt(1 + r * r) / r
    return np.linalg.norm(np.asarray(x, float) - centre, axis=-1) < radius


# --------------------------------------------------------------------------- volumes


def intersection_volume_exact(theta: float, delta: float, n: int = 2) -> float:
    """Volume of N_delta(l1) ∩ N_delta(l2) for complex lines through 0 at angle theta.

    n = 2 gives pi^2 delta^4 / sin^2 theta. For n > 2 the 4-dimensional slice
    at common-perpendicular offset p has effective radius sqrt(delta^2 - |p|^2);
    integrating over the (2n-4)-ball gives an extra factor
    c_k delta^k * 8 / ((k+2)(k+4)) with k = 2n - 4.
    """
    if n not in (2, 3):
        raise PreconditionError("n must be 2 or 3")
    if not 0 <= theta <= math.pi / 2 + 1e-15:
        raise PreconditionError("theta must lie in (0, pi/2]")
    if theta == 0 or math.sin(theta) == 0:
        raise ZeroDivisionError("parallel complex lines: intersection volume diverges")
    base = math.pi**2 * delta**4 / math.sin(theta) ** 2
    k = 2 * n - 4
    return base * unit_ball_volume(k) * delta**k * 8 / ((k + 2) * (k + 4))


class LineNeighbourhood(ComplexTube):
    """Truncation of the delta-neighbourhood of a whole complex line.

    Behaves like a tube but skips the aspect-ratio rule; it is only meant to be
    used where the truncation cannot matter.
    """

    _min_aspect = 0.0


def line_neighbourhood_tube(direction, delta: float, theta: float, center=None) -> LineNeighbourhood:
    """Truncated neighbourhood of the line C*direction, exact wherever it can meet
    the neighbourhood of another line through the same point at angle theta.

    Points of both neighbourhoods have coordinate |z| <= 2 delta / sin(theta)
    along either line, so a half-length one delta beyond that loses nothing.
    """
    d = as_cvec(direction)
    half = 2 * delta / math.sin(theta) + delta
    c = np.zeros_like(d) if center is None else as_cvec(center)
    return LineNeighbourhood(c, d, 2 * half, delta)


def _tube_box(T: ComplexTube):
    """Bounding box of T in its own frame: side lengths and frame."""
    half = np.array([T.length / 2 + T.radius] * 2 + [T.radius] * (T.dim - 2))
    return half, T.frame()


def _sample_tube_box(T: ComplexTube, rng, count: int, real: bool = False) -> np.ndarray:
    half, frame = _tube_box(T)
    local = rng.uniform(-1.0, 1.0, size=(count, T.dim)) * half
    pts = local @ frame + embed(T.center)
    return pts if real else pts[:, 0::2] + 1j * pts[:, 1::2]


def _bounds_disjoint(T1: ComplexTube, T2: ComplexTube) -> bool:
    gap = float(hnorm(T1.center - T2.center))
    reach = T1.length / 2 + T1.radius + T2.length / 2 + T2.radius
    return gap > reach


def _shard_sizes(samples: int, shards: int) -> list[int]:
    base, extra = divmod(samples, shards)
    return [base + (k < extra) for k in range(shards)]


def intersection_volume_mc(
    T1: ComplexTube,
    T2: ComplexTube,
    samples: int = 10**6,
    seed: int = 0,
    shards: int = 1,
    chunk: int = DEFAULT_CHUNK,
) -> VolumeEstimate:
    """Monte-Carlo estimate of |T1 ∩ T2| by uniform sampling of T1's frame box.

    Per-shard generators come from ``SeedSequence(seed).spawn(shards)`` and hit
    counts are summed in shard order, so the result depends only on
    (seed, samples, shards).
    """
    if samples < 10**4:
        raise PreconditionError("samples must be at least 1e4")
    if T1.n != T2.n:
        raise PreconditionError("tubes live in different dimensions")
    if _bounds_disjoint(T1, T2):
        return VolumeEstimate(0.0, 0.0, samples, seed, shards, 0)
    half, _ = _tube_box(T1)
    box = float(np.prod(2 * half))
    hits = 0
    for size, ss in zip(_shard_sizes(samples, shards), np.random.SeedSequence(seed).spawn(shards)):
        rng = np.random.default_rng(ss)
        left = size
        while left:
            m = min(chunk, left)
            pts = _sample_tube_box(T1, rng, m, real=True)
            hits += int(np.count_nonzero(T1.contains_real(pts) & T2.contains_real(pts)))
            left -= m
    f = hits / samples
    return VolumeEstimate(box * f, box * math.sqrt(f * (1 - f) / samples), samples, seed, shards, hits)


# --------------------------------------------------------------------------- ball lens


def _cap_volume(h, r, d):
    """Volume of the cap of height h (0 <= h <= 2r) cut from a d-ball of radius r."""
    h = np.clip(h, 0.0, 2 * r)
    full = unit_ball_volume(d) * r**d
    small = np.minimum(h, 2 * r - h)
    x = np.clip((2 * r * small - small * small) / (r * r), 0.0, 1.0)
    cap = 0.5 * full * special.betainc((d + 1) / 2, 0.5, x)
    return np.where(h <= r, cap, full - cap)


def ball_lens_volume(dist, r1: float, r2: float, d: int) -> np.ndarray | float:
    """Volume of B(0, r1) ∩ B(dist*e, r2) in R^d via regularized incomplete beta caps."""
    dist = np.asarray(dist, dtype=float)
    small = unit_ball_volume(d) * min(r1, r2) ** d
    safe = np.where(dist > 0, dist, 1.0)
    x1 = (safe**2 + r1 * r1 - r2 * r2) / (2 * safe)
    lens = _cap_volume(r1 - x1, r1, d) + _cap_volume(r2 - (safe - x1), r2, d)
    out = np.where(dist >= r1 + r2, 0.0, np.where(dist <= abs(r1 - r2), small, lens))
    return float(out) if out.ndim == 0 else out


def ball_lens_volume_quad(dist: float, r1: float, r2: float, d: int) -> float:
    """Lens volume by integrating (d-1)-ball cross-sections; a test oracle."""
    lo, hi = max(-r1, dist - r2), min(r1, dist + r2)
    if lo >= hi:
        return 0.0
    c = unit_ball_volume(d - 1)

    def section(t):
        rad2 = min(r1 * r1 - t * t, r2 * r2 - (t - dist) ** 2)
        return c * max(rad2, 0.0) ** ((d - 1) / 2)

    return integrate.quad(section, lo, hi, points=[(dist**2 + r1 * r1 - r2 * r2) / (2 * dist)] if dist else None, limit=200)[0]


@lru_cache(maxsize=None)
def ball_half_lens_distance(d: int) -> float:
    """Centre distance (unit radii) at which two d-balls share half their volume."""
    from scipy.optimize import brentq

    half = 0.5 * unit_ball_volume(d)
    return brentq(lambda t: ball_lens_volume(t, 1.0, 1.0, d) - half, 0.0, 2.0, xtol=1e-14)


# --------------------------------------------------------------------------- essential predicates


def _volume(A) -> float:
    return A.volume


def _dim(A) -> int:
    return A.dim


def _sample_solid(A, rng, count) -> np.ndarray:
    if isinstance(A, ComplexTube):
        out = []
        need = count
        while need > 0:
            pts = _sample_tube_box(A, rng, max(2 * need, 1024))
            pts = pts[A.contains(pts)]
            out.append(pts[:need])
            need -= len(out[-1])
        return np.concatenate(out)
    d = A.dim
    g = rng.standard_normal((count, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    g *= A.radius * rng.uniform(size=(count, 1)) ** (1 / d)
    real = g + A.real_center
    return real[:, 0::2] + 1j * real[:, 1::2] if A.is_complex else real


def _contains(A, pts) -> np.ndarray:
    return A.contains(pts)


def _fits_inside(small, big) -> bool:
    if isinstance(small, Ball) and isinstance(big, Ball):
        return small.radius <= big.radius
    if isinstance(small, Ball) and isinstance(big, ComplexTube):
        return small.radius <= big.radius
    if isinstance(small, ComplexTube) and isinstance(big, ComplexTube):
        return small.radius <= big.radius and small.length <= big.length
    if isinstance(small, ComplexTube) and isinstance(big, Ball):
        return math.hypot(small.length / 2, 0) + small.radius <= big.radius
    return False


def max_overlap(A1, A2) -> float:
    """Largest |s1(A1) ∩ s2(A2)| over rigid motions, for the shape pairs handled here."""
    small, big = (A1, A2) if _volume(A1) <= _volume(A2) else (A2, A1)
    if _fits_inside(small, big):
        return _volume(small)
    raise PreconditionError("rigid-motion maximal overlap is only available when one shape fits inside the other")


def overlap_volume(A1, A2, samples: int = 20000, seed: int = 0) -> float:
    """|A1 ∩ A2|: closed form for two balls, otherwise Monte Carlo from the smaller solid."""
    if _dim(A1) != _dim(A2):
        raise PreconditionError("solids live in different dimensions")
    if isinstance(A1, Ball) and isinstance(A2, Ball):
        gap = float(np.linalg.norm(A1.real_center - A2.real_center))
        return ball_lens_volume(gap, A1.radius, A2.radius, A1.dim)
    for A in (A1, A2):
        if not isinstance(A, (Ball, ComplexTube)):
            raise PreconditionError(f"unsupported solid {type(A).__name__}")
    small, big = (A1, A2) if _volume(A1) <= _volume(A2) else (A2, A1)
    rng = np.random.default_rng(seed)
    pts = _sample_solid(small, rng, samples)
    return _volume(small) * float(np.count_nonzero(_contains(big, pts))) / samples


def essentially_intersect(A1, A2, samples: int = 20000, seed: int = 0) -> bool:
    for A in (A1, A2):
        if not isinstance(A, (Ball, ComplexTube)):
            raise PreconditionError(f"unsupported solid {type(A).__name__}")
    return overlap_volume(A1, A2, samples, seed) >= 0.5 * max_overlap(A1, A2)


def axis_translates(A) -> list:
    """Translates of A that are essentially distinct from A by construction.

    Balls move by +-2r along each real axis. Tubes move by +-2r along each short
    real axis and by +-length along each long real axis.
    """
    out = []
    if isinstance(A, Ball):
        d = A.dim
        for k in range(d):
            for sgn in (1, -1):
                e = np.zeros(d)
                e[k] = 2 * sgn * A.radius
                shift = e[0::2] + 1j * e[1::2] if A.is_complex else e
                out.append(A.translated(shift))
        return out
    frame = A.frame()
    for k, axis in enumerate(frame):
        step = A.length if k < 2 else 2 * A.radius
        for sgn in (1, -1):
            v = sgn * step * axis
            out.append(A.translated(v[0::2] + 1j * v[1::2]))
    return out


def essentially_contains(A1, A2, samples: int = 20000, seed: int = 0) -> bool:
    """A1 essentially meets A2 and some essentially distinct axis translate of A2."""
    if not essentially_intersect(A1, A2, samples, seed):
        return False
    return any(essentially_intersect(A1, B, samples, seed) for B in axis_translates(A2))


def scale_shape(A, b: float):
    """Dilate about the centroid by factor b > 0."""
    if b < 0:
        raise PreconditionError("scale factor must be nonnegative")
    if b == 0:
        raise PreconditionError("scale factor 0 collapses the shape to a point")
    if isinstance(A, Ball):
        return Ball(A.center, A.radius * b)
    if isinstance(A, ComplexTube):
        return ComplexTube(A.center, A.direction, A.length * b, A.radius * b)
    raise PreconditionError(f"unsupported solid {type(A).__name__}")


def dual_slab(T: ComplexTube) -> Slab:
    widths = [1 / T.length] * 2 + [1 / T.radius] * (T.dim - 2)
    return Slab(np.zeros(T.dim), T.frame(), widths)
