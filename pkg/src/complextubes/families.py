"""Direction caps on CP^{n-1}, W^{-1}-tube covers, spaced tube families and their checkers."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from scipy.spatial import cKDTree

from .cgeom import PreconditionError, embed, perp_frame
from .solids import ComplexTube, Slab

SPACING_KINDS = ("uniform-N", "exact-H0", "at-most-H0", "unconstrained")


# --------------------------------------------------------------------------- CP^{n-1}


def sample_cp(n: int, count: int, rng) -> np.ndarray:
    """Uniform points of the unit sphere in C^n (representatives of CP^{n-1})."""
    g = rng.standard_normal((count, 2 * n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g[:, 0::2] + 1j * g[:, 1::2]


def veronese(u) -> np.ndarray:
    """Real coordinates of the Hermitian matrix u u*.

    |phi(u) - phi(v)|^2 = 2 - 2|<u, v>|^2 for unit vectors, a monotone function
    of the Fubini-Study distance, so Euclidean nearest neighbours are FS ones.
    """
    u = np.atleast_2d(u)
    n = u.shape[1]
    cols = [np.abs(u[:, k]) ** 2 for k in range(n)]
    for i, j in itertools.combinations(range(n), 2):
        prod = u[:, i] * np.conj(u[:, j])
        cols += [math.sqrt(2) * prod.real, math.sqrt(2) * prod.imag]
    return np.stack(cols, axis=1)


def chord(fs_distance: float) -> float:
    return math.sqrt(2) * math.sin(min(fs_distance, math.pi / 2))


def fs_distance(u, v) -> np.ndarray:
    return np.arccos(np.clip(np.abs(np.sum(u * np.conj(v), axis=-1)), 0.0, 1.0))


@dataclass(eq=False)
class CapPartition:
    """Scale-separated net of CP^{n-1}; cells are Fubini-Study Voronoi cells."""

    n: int
    scale: float
    centers: np.ndarray
    seed: int = 0

    @cached_property
    def _tree(self) -> cKDTree:
        return cKDTree(veronese(self.centers))

    def __len__(self) -> int:
        return len(self.centers)

    def assign(self, u) -> np.ndarray:
        """Index of the nearest centre for each direction in ``u``."""
        _, idx = self._tree.query(veronese(u))
        return idx

    def near(self, u, radius: float) -> list[list[int]]:
        """Centres within FS distance ``radius`` of each direction."""
        return self._tree.query_ball_point(veronese(u), chord(radius) + 1e-12)


def _greedy_net(points_v: np.ndarray, thr: float) -> np.ndarray:
    tree = cKDTree(points_v)
    alive = np.ones(len(points_v), bool)
    keep = []
    for i in range(len(points_v)):
        if not alive[i]:
            continue
        keep.append(i)
        alive[tree.query_ball_point(points_v[i], thr)] = False
    return np.array(keep, dtype=int)


def bloch(u) -> np.ndarray:
    """CP^1 -> unit sphere S^2; FS distance d becomes great-circle angle 2d."""
    u = np.atleast_2d(u)
    p = u[:, 0] * np.conj(u[:, 1])
    return np.stack([2 * p.real, 2 * p.imag, np.abs(u[:, 0]) ** 2 - np.abs(u[:, 1]) ** 2], axis=1)


def from_bloch(b) -> np.ndarray:
    b = np.atleast_2d(b)
    b = b / np.linalg.norm(b, axis=1, keepdims=True)
    alpha = np.arccos(np.clip(b[:, 2], -1, 1))
    phi = np.arctan2(b[:, 1], b[:, 0])
    return np.stack([np.cos(alpha / 2) + 0j, np.sin(alpha / 2) * np.exp(-1j * phi)], axis=1)


def _repair_cp1(centers: np.ndarray, scale: float) -> np.ndarray:
    """Add Delaunay circumcentres of S^2 triangles whose circumradius exceeds 2*scale.

    Empty-circle property: such a circumcentre is farther than 2*scale from every
    centre, so separation is kept; when none is left the covering radius on
    CP^1 is at most ``scale``.
    """
    from scipy.spatial import ConvexHull

    limit = math.cos(2 * scale)
    for _ in range(10_000):
        if len(centers) < 4:
            return centers
        pts = bloch(centers)
        hull = ConvexHull(pts)
        normals = hull.equations[:, :3]
        # outward unit normal of a facet through the sphere = circumcentre direction
        cosr = np.einsum("ij,ij->i", normals, pts[hull.simplices[:, 0]])
        bad = np.flatnonzero(cosr < limit - 1e-14)
        if not len(bad):
            return centers
        order = bad[np.argsort(cosr[bad])]
        cand = normals[order]
        chosen = []
        for c in cand:
            if all(c @ d < limit for d in chosen):
                chosen.append(c)
        centers = np.concatenate([centers, from_bloch(np.array(chosen))])
    raise RuntimeError("cap net repair did not converge")


@lru_cache(maxsize=32)
def _cap_partition_cached(n: int, scale: float, seed: int) -> CapPartition:
    rng = np.random.default_rng(seed)
    thr = chord(scale) * (1 - 1e-12)
    batch = int(min(max(40 * scale ** (-2 * (n - 1)), 2000), 400_000))
    pts = sample_cp(n, batch, rng)
    centers = pts[_greedy_net(veronese(pts), thr)]
    rounds = 3 if n == 2 else 12
    for _ in range(rounds):
        pts = sample_cp(n, batch, rng)
        dist, _ = cKDTree(veronese(centers)).query(veronese(pts))
        pts = pts[dist >= thr]
        if not len(pts):
            break
        centers = np.concatenate([centers, pts[_greedy_net(veronese(pts), thr)]])
    if n == 2:
        centers = _repair_cp1(centers, scale)
    return CapPartition(n, scale, centers, seed)


def cap_partition(n: int, scale: float, seed: int = 0) -> CapPartition:
    """Greedy net of CP^{n-1} with pairwise FS distance >= scale.

    A random greedy pass is followed by a few rounds of fresh samples. For n = 2
    the net is then made exactly maximal on the Bloch sphere, so every point is
    within ``scale`` of a centre. For n = 3 maximality holds only up to the
    sampling resolution of the extra rounds.
    """
    if n not in (2, 3):
        raise PreconditionError("n must be 2 or 3")
    if not 0 < scale < 1 + 1e-12 and not scale == math.pi / 2:
        raise PreconditionError("scale must lie in (0, 1)")
    return _cap_partition_cached(n, float(scale), int(seed))


# --------------------------------------------------------------------------- families


@dataclass(eq=False)
class TubeFamily:
    """A set of complex tubes stored column-wise, plus spacing metadata."""

    n: int
    delta: float
    big_w: float
    spacing_kind: str
    spacing_param: int
    seed: int
    centers: np.ndarray
    directions: np.ndarray
    lengths: np.ndarray
    radii: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.spacing_kind not in SPACING_KINDS:
            raise PreconditionError(f"unknown spacing kind {self.spacing_kind!r}")
        self.centers = np.asarray(self.centers, complex).reshape(-1, self.n)
        self.directions = np.asarray(self.directions, complex).reshape(-1, self.n)
        self.lengths = np.asarray(self.lengths, float).reshape(-1)
        self.radii = np.asarray(self.radii, float).reshape(-1)

    def __len__(self) -> int:
        return len(self.centers)

    @property
    def tubes(self) -> list[ComplexTube]:
        return [ComplexTube(c, d, l, r) for c, d, l, r in zip(self.centers, self.directions, self.lengths, self.radii)]

    @classmethod
    def from_tubes(cls, tubes, delta, big_w=1.0, spacing_kind="unconstrained", spacing_param=0, seed=0, n=None):
        tubes = list(tubes)
        n = n or (tubes[0].n if tubes else 2)
        return cls(
            n, delta, big_w, spacing_kind, spacing_param, seed,
            np.array([t.center for t in tubes], complex).reshape(-1, n),
            np.array([t.direction for t in tubes], complex).reshape(-1, n),
            np.array([t.length for t in tubes]), np.array([t.radius for t in tubes]),
        )

    # serialization: one header line, then one tube per line
    HEADER = "# complextubes tube-family v1"

    def dumps(self) -> str:
        head = (
            f"{self.HEADER} n={self.n} delta={float(self.delta)!r} big_w={float(self.big_w)!r} "
            f"spacing_kind={self.spacing_kind} spacing_param={self.spacing_param} seed={self.seed}"
        )
        rows = np.column_stack([embed(self.centers), embed(self.directions), self.lengths, self.radii])
        lines = [head] + [" ".join(format(x, ".17g") for x in row) for row in rows]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "TubeFamily":
        lines = text.splitlines()
        if not lines or not lines[0].startswith(cls.HEADER):
            raise ValueError("missing tube-family header")
        kv = dict(tok.split("=", 1) for tok in lines[0][len(cls.HEADER):].split())
        n = int(kv["n"])
        body = [ln for ln in lines[1:] if ln.strip()]
        rows = np.array([[float(x) for x in ln.split()] for ln in body]).reshape(-1, 4 * n + 2)
        c = rows[:, : 2 * n]
        d = rows[:, 2 * n : 4 * n]
        return cls(
            n, float(kv["delta"]), float(kv["big_w"]), kv["spacing_kind"], int(kv["spacing_param"]), int(kv["seed"]),
            c[:, 0::2] + 1j * c[:, 1::2], d[:, 0::2] + 1j * d[:, 1::2], rows[:, 4 * n], rows[:, 4 * n + 1],
        )

    def save(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "TubeFamily":
        with open(path) as fh:
            return cls.loads(fh.read())


class CoverTube(ComplexTube):
    """W^{-1}-tube of a cover; with W < 10 it is fatter than the l >= 10r rule allows."""

    _min_aspect = 0.0


@dataclass(eq=False)
class SpacingCover:
    """Maximal cover by W^{-1}-tubes: direction caps of scale W^{-1} times a
    pitch-W^{-1} lattice of positions in the complement of each cap centre."""

    n: int
    big_w: float
    seed: int = 0

    @property
    def pitch(self) -> float:
        return 1.0 / self.big_w

    @cached_property
    def caps(self) -> CapPartition:
        return cap_partition(self.n, min(self.pitch, 0.999), self.seed)

    @cached_property
    def max_offset(self) -> float:
        """Largest perpendicular offset keeping the whole cover tube inside B(0,1)."""
        R = self.pitch
        return math.sqrt(max((1 - R) ** 2 - 0.25, 0.0))

    @cached_property
    def lattice(self) -> np.ndarray:
        k = 2 * (self.n - 1)
        m = int(math.floor(self.max_offset / self.pitch + 1e-9))
        pts = np.array(list(itertools.product(range(-m, m + 1), repeat=k)), dtype=np.int64).reshape(-1, k)
        return pts[np.linalg.norm(pts * self.pitch, axis=1) <= self.max_offset + 1e-12]

    @cached_property
    def frames(self) -> np.ndarray:
        return np.array([perp_frame(c) for c in self.caps.centers])

    @cached_property
    def _lattice_index(self) -> dict:
        return {tuple(g): i for i, g in enumerate(self.lattice)}

    def __len__(self) -> int:
        return len(self.caps) * len(self.lattice)

    def perp_coords(self, cap_idx, centers) -> np.ndarray:
        """Real coordinates of the perpendicular part of ``centers`` in each cap's frame."""
        fr = self.frames[cap_idx]
        coef = np.einsum("...kj,...j->...k", np.conj(fr), centers)
        return embed(coef)

    def tube(self, cap_idx: int, g) -> CoverTube:
        coef = np.asarray(g, float) * self.pitch
        centre = (coef[0::2] + 1j * coef[1::2]) @ self.frames[cap_idx]
        return CoverTube(centre, self.caps.centers[cap_idx], 1.0, self.pitch)

    def cell_of(self, centers, directions) -> tuple[np.ndarray, np.ndarray]:
        """(cap index, lattice index or -1) of the cover cell holding each tube."""
        caps = self.caps.assign(directions)
        g = np.rint(self.perp_coords(caps, centers) / self.pitch).astype(np.int64)
        pos = np.array([self._lattice_index.get(tuple(row), -1) for row in g], dtype=np.int64)
        return caps, pos


def _capacity(delta: float, big_w: float, n: int) -> tuple[int, int]:
    m = int(math.floor((1 / big_w) / delta + 1e-9))
    return m, m ** (2 * (n - 1))


def _fill_cells(cover: SpacingCover, counts: np.ndarray, delta: float, rng, jitter: bool):
    """Place counts[c] delta-tubes in each cover cell c (flattened cap-major)."""
    n, R = cover.n, cover.pitch
    k = 2 * (n - 1)
    m, cap = _capacity(delta, cover.big_w, n)
    sub = R / m
    npos = len(cover.lattice)
    centers, directions = [], []
    for cell in np.flatnonzero(counts):
        ci, pi = divmod(int(cell), npos)
        pick = rng.choice(cap, size=int(counts[cell]), replace=False)
        digits = np.stack(np.unravel_index(pick, (m,) * k), axis=1)
        off = -R / 2 + (digits + 0.5) * sub
        if jitter:
            off = off + rng.uniform(-0.5, 0.5, off.shape) * (sub - delta)
        coef = cover.lattice[pi] * R + off
        centers.append((coef[:, 0::2] + 1j * coef[:, 1::2]) @ cover.frames[ci])
        directions.append(np.repeat(cover.caps.centers[ci][None], len(pick), axis=0))
    if not centers:
        return np.zeros((0, n), complex), np.zeros((0, n), complex)
    return np.concatenate(centers), np.concatenate(directions)


def _check_family_args(n, delta, big_w, count, what):
    if n not in (2, 3):
        raise PreconditionError("n must be 2 or 3")
    if not (0 < delta < 1 and 1 <= big_w <= 1 / delta + 1e-9):
        raise PreconditionError("need 0 < delta < 1 and 1 <= W <= 1/delta")
    _, cap = _capacity(delta, big_w, n)
    if count < 1:
        raise PreconditionError(f"{what} must be at least 1")
    if count > cap:
        raise PreconditionError(f"{what}={count} exceeds the W^-1-tube capacity {cap} = (W^-1/delta)^{2 * (n - 1)}")


def generate_spaced_family(n, delta, big_w, big_n, seed=0, jitter=True, cover_seed=0) -> TubeFamily:
    """Every cover tube of the W^{-1}-cover receives exactly N parallel delta-tubes."""
    _check_family_args(n, delta, big_w, big_n, "big_n")
    cover = SpacingCover(n, big_w, cover_seed)
    rng = np.random.default_rng(seed)
    counts = np.full(len(cover), big_n, dtype=np.int64)
    c, d = _fill_cells(cover, counts, delta, rng, jitter)
    fam = TubeFamily(n, delta, big_w, "uniform-N", big_n, seed, c, d, np.ones(len(c)), np.full(len(c), delta))
    fam.meta.update(cover_seed=cover_seed, caps=len(cover.caps), positions=len(cover.lattice))
    return fam


def generate_h0_family(n, delta, big_w, h0, seed=0, kind="exact-H0", jitter=True, cover_seed=0) -> TubeFamily:
    """Exactly h0 (or, for kind 'at-most-H0', between 1 and h0) delta-tubes per cover tube."""
    if kind not in ("exact-H0", "at-most-H0"):
        raise PreconditionError("kind must be exact-H0 or at-most-H0")
    _check_family_args(n, delta, big_w, h0, "h0")
    cover = SpacingCover(n, big_w, cover_seed)
    rng = np.random.default_rng(seed)
    if kind == "exact-H0":
        counts = np.full(len(cover), h0, dtype=np.int64)
    else:
        counts = rng.integers(1, h0 + 1, size=len(cover))
    c, d = _fill_cells(cover, counts, delta, rng, jitter)
    fam = TubeFamily(n, delta, big_w, kind, h0, seed, c, d, np.ones(len(c)), np.full(len(c), delta))
    fam.meta.update(cover_seed=cover_seed, caps=len(cover.caps), positions=len(cover.lattice))
    return fam


# --------------------------------------------------------------------------- spacing check


@dataclass
class SpacingReport:
    histogram: dict
    min: int
    max: int
    mean: float
    verdict: bool
    rule: str
    big_w: float
    occupied: int
    cover_size: int
    memberships: int
    unassigned: int
    spacing_kind: str
    spacing_param: int

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["histogram"] = {str(k): v for k, v in sorted(self.histogram.items())}
        return out


def _verdict(kind, param, counts) -> bool:
    if kind == "unconstrained" or len(counts) == 0:
        return True
    if kind == "uniform-N":
        return bool(np.all((counts >= param) & (counts < 2 * param)))
    if kind == "exact-H0":
        return bool(np.all(counts == param))
    return bool(np.all(counts <= param))


@lru_cache(maxsize=8)
def _quadrature(n: int, disk_pts: int = 48, section_pts: int = 12):
    """Fixed sample of a unit-length, unit-radius tube core: Vogel-spiral disk x ball points."""
    k = np.arange(disk_pts)
    rad = 0.5 * np.sqrt((k + 0.5) / disk_pts)
    ang = k * math.pi * (3 - math.sqrt(5))
    disk = rad * np.exp(1j * ang)
    rng = np.random.default_rng(20240917)
    d = 2 * (n - 1)
    g = rng.standard_normal((section_pts, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    g *= rng.uniform(size=(section_pts, 1)) ** (1 / d)
    return disk, g


def containment_fraction(tube_center, tube_dir, length, radius, cover: ComplexTube, shifts=None) -> np.ndarray:
    """Share of a fixed quadrature of the tube (optionally translated) lying in ``cover``."""
    n = len(tube_center)
    disk, sec = _quadrature(n)
    fr = perp_frame(tube_dir)
    perp = (sec[:, 0::2] + 1j * sec[:, 1::2]) @ fr * radius
    pts = tube_center + (disk[:, None] * length)[..., None] * tube_dir + perp[None, :, :]
    pts = pts.reshape(-1, n)
    if shifts is None:
        return np.count_nonzero(cover.contains(pts)) / len(pts)
    allpts = pts[None, :, :] + shifts[:, None, :]
    inside = cover.contains(allpts.reshape(-1, n)).reshape(len(shifts), -1)
    return inside.mean(axis=1)


def _essential_translates(direction, length, radius) -> np.ndarray:
    fr = perp_frame(direction)
    out = []
    for e in fr:
        for v in (e, 1j * e):
            out += [2 * radius * v, -2 * radius * v]
    for v in (direction, 1j * direction):
        out += [length * v, -length * v]
    return np.array(out)


def essentially_contained_in(cover: ComplexTube, center, direction, length, radius) -> bool:
    if containment_fraction(center, direction, length, radius, cover) < 0.5:
        return False
    fr = containment_fraction(center, direction, length, radius, cover, _essential_translates(direction, length, radius))
    return bool(np.any(fr >= 0.5))


def _essential_counts(family: TubeFamily, cover: SpacingCover) -> tuple[dict, int]:
    counts: dict = {}
    R = cover.pitch
    unassigned = 0
    for c, d, l, r in zip(family.centers, family.directions, family.lengths, family.radii):
        hit = False
        for ci in cover.caps.near(d[None], 2 * R)[0]:
            x = cover.perp_coords(ci, c)
            lo = np.floor((x - 2 * R) / R).astype(int)
            hi = np.ceil((x + 2 * R) / R).astype(int)
            for g in itertools.product(*[range(a, b + 1) for a, b in zip(lo, hi)]):
                pi = cover._lattice_index.get(g)
                if pi is None or np.linalg.norm(np.asarray(g) * R - x) > 1.5 * R + r:
                    continue
                if essentially_contained_in(cover.tube(ci, g), c, d, l, r):
                    key = (int(ci), int(pi))
                    counts[key] = counts.get(key, 0) + 1
                    hit = True
        unassigned += not hit
    return counts, unassigned


def check_spacing(family: TubeFamily, big_w: float | None = None, rule: str = "cell", cover_seed: int | None = None) -> SpacingReport:
    """Count delta-tubes per W^{-1}-cover tube and compare with the declared spacing.

    ``rule='cell'`` assigns each tube to the single cover cell holding its
    direction (FS Voronoi cell) and perpendicular position (lattice cell).
    ``rule='essential'`` counts, for every cover tube, the delta-tubes it
    essentially contains (half-volume test on a fixed quadrature, plus an
    essentially distinct translate).
    """
    big_w = family.big_w if big_w is None else big_w
    if not 1 <= big_w <= 1 / family.delta + 1e-9:
        raise PreconditionError("need 1 <= W <= 1/delta")
    seed = family.meta.get("cover_seed", 0) if cover_seed is None else cover_seed
    cover = SpacingCover(family.n, big_w, seed)
    if rule == "cell":
        if len(family):
            caps, pos = cover.cell_of(family.centers, family.directions)
            ok = pos >= 0
            unassigned = int(np.count_nonzero(~ok))
            keys, vals = np.unique(caps[ok] * len(cover.lattice) + pos[ok], return_counts=True)
            counts = vals
        else:
            unassigned, counts = 0, np.zeros(0, int)
    elif rule == "essential":
        table, unassigned = _essential_counts(family, cover)
        counts = np.array(sorted(table.values()), dtype=int)
    else:
        raise PreconditionError("rule must be 'cell' or 'essential'")
    hist_k, hist_v = np.unique(counts, return_counts=True)
    return SpacingReport(
        histogram={int(k): int(v) for k, v in zip(hist_k, hist_v)},
        min=int(counts.min()) if len(counts) else 0,
        max=int(counts.max()) if len(counts) else 0,
        mean=float(counts.mean()) if len(counts) else 0.0,
        verdict=_verdict(family.spacing_kind, family.spacing_param, counts),
        rule=rule,
        big_w=float(big_w),
        occupied=int(len(counts)),
        cover_size=len(cover),
        memberships=int(counts.sum()),
        unassigned=int(unassigned),
        spacing_kind=family.spacing_kind,
        spacing_param=int(family.spacing_param),
    )


# --------------------------------------------------------------------------- Fact 3.1


def dual_slab_count_check(n, delta, sigma, probes=2000, seed=0) -> tuple[float, float]:
    """Mean number of dual slabs (tubes of length 1/delta, radius 1 through 0,
    one per direction of a maximal delta-separated net) containing a random point
    of the sphere of radius sigma, and the predicted sigma^-2 delta^-2(n-2)."""
    if not 0 < delta < sigma <= 1:
        raise PreconditionError("need 0 < delta < sigma <= 1")
    dirs = cap_partition(n, delta, seed).centers
    rng = np.random.default_rng(np.random.SeedSequence([seed, 31]))
    w = rng.standard_normal((probes, 2 * n))
    w *= sigma / np.linalg.norm(w, axis=1, keepdims=True)
    omega = w[:, 0::2] + 1j * w[:, 1::2]
    frames = np.array([perp_frame(u) for u in dirs])
    total = 0
    for lo in range(0, probes, 256):
        om = omega[lo : lo + 256]
        along = om @ np.conj(dirs).T
        ok = (np.abs(along.real) <= delta) & (np.abs(along.imag) <= delta)
        short = np.einsum("pj,dkj->pdk", om, np.conj(frames))
        ok &= np.all((np.abs(short.real) <= 1.0) & (np.abs(short.imag) <= 1.0), axis=2)
        total += int(np.count_nonzero(ok))
    observed = total / probes
    predicted = sigma**-2 * delta ** (-2 * (n - 2))
    return observed, predicted


def dual_slabs(n, delta, seed=0) -> list[Slab]:
    """The slabs counted by :func:`dual_slab_count_check`, for inspection."""
    from .solids import dual_slab

    return [dual_slab(ComplexTube(np.zeros(n), u, 1 / delta, 1.0)) for u in cap_partition(n, delta, seed).centers]
