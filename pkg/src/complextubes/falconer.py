"""Complex distance sets in C^2 via tube incidences in C^3.

For p = (x, y) in C^2 the complex distance is Delta(p1, p2) = (x1-x2)^2 + (y1-y2)^2.
Each pair (p1, p2) gets an auxiliary complex line in C^3, and two pairs with
nearly equal Delta give nearly intersecting lines.  Counting such coincidences
(quadruples) through rich balls, then applying Cauchy-Schwarz, bounds the
number of delta-balls needed to cover the distance set from below.

Point sets live in two balls B1, B2 of radius c1 whose centres are c2 apart.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import special_ortho_group

from .cgeom import ComplexLine, PreconditionError, as_cvec, embed
from .families import TubeFamily, check_spacing
from .incidence import (
    ball_counts,
    ball_grid,
    profile_from_counts,
    tube_ball_indices,
    incidence_threshold,
    RichnessProfile,
    family_id,
)

C1_PAPER = 0.01
C2 = 1.2
DEFAULT_C1 = 0.4
EPS1 = 1 / 8000
ANGLE_STEPS = 720
BRUTE_PAIR_BUDGET = 10**6
MIN_DELTA = 2.0**-10


# --------------------------------------------------------------------------- distances and lines


def complex_distance(p1, p2) -> np.ndarray | complex:
    p1, p2 = np.asarray(p1, complex), np.asarray(p2, complex)
    d = p1 - p2
    out = d[..., 0] ** 2 + d[..., 1] ** 2
    return out if out.ndim else complex(out)


def aux_params(p1, p2) -> tuple[np.ndarray, np.ndarray]:
    """Base point and (unnormalised) direction of the auxiliary line of (p1, p2)."""
    p1, p2 = np.asarray(p1, complex), np.asarray(p2, complex)
    x1, y1 = p1[..., 0], p1[..., 1]
    x2, y2 = p2[..., 0], p2[..., 1]
    point = np.stack([(x1 + x2) / 2, (y1 + y2) / 2, np.zeros_like(x1)], axis=-1)
    v = np.stack([(y1 - y2) / 2, -(x1 - x2) / 2, np.ones_like(x1)], axis=-1)
    return point, v


def aux_line(p1, p2) -> ComplexLine:
    point, v = aux_params(p1, p2)
    return ComplexLine(point, v)


def m0_eps0(c1: float = C1_PAPER, c2: float = C2) -> tuple[float, float]:
    """Midpoint and half-width of the range of |v| for pairs from B1 x B2."""
    hi = math.hypot(c2 / 2 + c1, 1.0)
    lo = math.hypot(c2 / 2 - c1, 1.0)
    return (hi + lo) / 2, (hi - lo) / 2


# --------------------------------------------------------------------------- point sets


def point_target(s: float, delta: float, big_n: int) -> float:
    return big_n * delta**-s


@dataclass(eq=False)
class PointSet:
    """Centres of delta-balls in C^2 with the data they were generated from.

    ``cluster`` labels the groups of at most big_n balls placed together.
    """

    centers: np.ndarray
    delta: float
    s: float
    big_n: int
    seed: int
    c1: float = DEFAULT_C1
    c2: float = C2
    cluster: np.ndarray = field(default=None)

    def __post_init__(self):
        self.centers = np.asarray(self.centers, complex).reshape(-1, 2)
        if self.cluster is None:
            self.cluster = np.arange(len(self.centers))
        self.cluster = np.asarray(self.cluster, np.int64).reshape(-1)

    def __len__(self) -> int:
        return len(self.centers)

    @property
    def cap_radius(self) -> float:
        return self.delta ** (self.s / 4)

    @property
    def ball_centers(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array([-self.c2 / 2, 0], complex), np.array([self.c2 / 2, 0], complex)

    HEADER = "# complextubes point-set v1"

    def dumps(self) -> str:
        head = (
            f"{self.HEADER} delta={float(self.delta)!r} s={float(self.s)!r} big_n={self.big_n} seed={self.seed} "
            f"c1={float(self.c1)!r} c2={float(self.c2)!r}"
        )
        rows = np.column_stack([embed(self.centers), self.cluster]) if len(self) else np.zeros((0, 5))
        lines = [head] + [" ".join(format(x, ".17g") for x in row[:4]) + f" {int(row[4])}" for row in rows]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "PointSet":
        lines = text.splitlines()
        if not lines or not lines[0].startswith(cls.HEADER):
            raise ValueError("missing point-set header")
        kv = dict(tok.split("=", 1) for tok in lines[0][len(cls.HEADER):].split())
        body = [ln.split() for ln in lines[1:] if ln.strip()]
        xs = np.array([[float(t) for t in row[:4]] for row in body]).reshape(-1, 4)
        cl = np.array([int(row[4]) for row in body], np.int64)
        return cls(
            xs[:, 0::2] + 1j * xs[:, 1::2], float(kv["delta"]), float(kv["s"]), int(kv["big_n"]), int(kv["seed"]),
            float(kv["c1"]), float(kv["c2"]), cl,
        )

    def save(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "PointSet":
        with open(path) as fh:
            return cls.loads(fh.read())


def _cluster_offsets(big_n: int, delta: float) -> np.ndarray:
    """big_n points of the lattice 2 delta Z^4 closest to the origin (disjoint delta-balls)."""
    r = 1
    while (2 * r + 1) ** 4 < big_n:
        r += 1
    g = np.stack(np.meshgrid(*([np.arange(-r, r + 1)] * 4), indexing="ij"), -1).reshape(-1, 4)
    order = np.lexsort((*g.T[::-1], np.einsum("ij,ij->i", g, g)))
    return 2 * delta * g[order[:big_n]].astype(float)


def _sample_ball(rng, count: int, radius: float) -> np.ndarray:
    x = rng.standard_normal((count, 4))
    x *= (radius * rng.uniform(size=(count, 1)) ** 0.25) / np.linalg.norm(x, axis=1, keepdims=True)
    return x


def generate_point_set(s: float, delta: float, big_n: int, seed: int = 0, c1: float = DEFAULT_C1, c2: float = C2,
                       attempts: int = 20000, placement: str = "strict") -> PointSet:
    """delta-balls in B1 u B2, at most big_n per region of size delta^{s/4}.

    ``placement="strict"``: clusters of big_n balls (spacing 2 delta) are placed
    by random sequential addition, once from scratch and once starting from a
    randomly rotated cross-polytope on the boundary sphere; the larger result
    wins.  Balls of different clusters are more than 2(delta^{s/4} - delta)
    apart, so no delta^{s/4}-ball meets two clusters.

    ``placement="lattice"``: one cluster in each cell of a delta^{s/4}-pitch
    lattice of R^4 that meets B_j.  Many more balls, but the cap only holds per
    cell; a delta^{s/4}-ball can touch up to 16 cells.
    """
    if placement not in ("strict", "lattice"):
        raise PreconditionError(f"unknown placement {placement!r}")
    if not 1 < s < 2:
        raise PreconditionError("s must lie in (1, 2)")
    if not MIN_DELTA <= delta < 1:
        raise PreconditionError("delta must lie in [2^-10, 1)")
    if big_n < 0:
        raise PreconditionError("big_n must be >= 0")
    if not 0 < c1 < c2 / 2 or c2 / 2 + c1 > 1 + 1e-12:
        raise PreconditionError("need 0 < c1 < c2/2 and B1, B2 inside B(0, 1)")
    rng = np.random.default_rng(seed)
    if big_n == 0:
        return PointSet(np.zeros((0, 2)), delta, s, 0, seed, c1, c2, np.zeros(0, np.int64))
    offsets = _cluster_offsets(big_n, delta)
    rc = float(np.max(np.linalg.norm(offsets, axis=1)))
    sep = 2 * (delta ** (s / 4) - delta) + 2 * rc
    room = c1 - delta - rc
    if room < 0:
        raise PreconditionError("clusters do not fit inside B1, B2")
    pts, labels = [], []
    for b in (np.array([-c2 / 2, 0, 0, 0]), np.array([c2 / 2, 0, 0, 0])):
        if placement == "lattice":
            for c in _lattice_sites(rng, delta ** (s / 4), room, delta + rc):
                pts.append(b + c + offsets)
                labels.append(np.full(big_n, len(labels)))
            continue
        pool = _sample_ball(rng, attempts, room)
        seeded = _rsa(room * np.concatenate([np.eye(4), -np.eye(4)]) @ special_ortho_group.rvs(4, random_state=rng), pool, sep)
        plain = _rsa(np.zeros((0, 4)), pool, sep)
        for c in max(seeded, plain, key=len):
            pts.append(b + c + offsets)
            labels.append(np.full(big_n, len(labels)))
    x = np.concatenate(pts)
    return PointSet(x[:, 0::2] + 1j * x[:, 1::2], delta, s, big_n, seed, c1, c2, np.concatenate(labels))


def _rsa(start: np.ndarray, pool: np.ndarray, sep: float) -> list[np.ndarray]:
    """Random sequential addition: keep the start points (if mutually > sep apart), then each pool point that fits."""
    accepted: list[np.ndarray] = []
    for cand in itertools.chain(start, pool):
        if not accepted or np.min(np.linalg.norm(np.asarray(accepted) - cand, axis=1)) > sep:
            accepted.append(cand)
    return accepted


def _lattice_sites(rng, pitch: float, room: float, margin: float, tries: int = 64) -> list[np.ndarray]:
    """One random point per lattice cell, at least ``margin`` inside the cell and within ``room`` of 0."""
    if 2 * margin >= pitch:
        raise PreconditionError("clusters do not fit in a lattice cell")
    k = int(math.ceil(room / pitch))
    cells = np.stack(np.meshgrid(*([np.arange(-k, k)] * 4), indexing="ij"), -1).reshape(-1, 4)
    near = np.linalg.norm(np.clip(0.0, cells * pitch, (cells + 1) * pitch), axis=1) < room
    sites = []
    for cell in cells[near]:
        cand = (cell + rng.uniform(size=(tries, 4))) * pitch
        cand = np.clip(cand, cell * pitch + margin, (cell + 1) * pitch - margin)
        ok = np.nonzero(np.linalg.norm(cand, axis=1) <= room)[0]
        if len(ok):
            sites.append(cand[ok[0]])
    return sites


def cell_counts(ps: PointSet) -> np.ndarray:
    """Balls per delta^{s/4}-lattice cell (cells relative to the nearer of b1, b2)."""
    if not len(ps):
        return np.zeros(0, np.int64)
    x = embed(ps.centers)
    b = np.where(x[:, :1] < 0, -ps.c2 / 2, ps.c2 / 2)
    rel = x - np.column_stack([b, np.zeros((len(x), 3))])
    keys = np.column_stack([np.sign(b), np.floor(rel / ps.cap_radius)])
    return np.unique(keys, axis=0, return_counts=True)[1]


def max_window_count(ps: PointSet, radius: float | None = None) -> int:
    """Most delta-balls of ``ps`` inside one ball of the given radius (default delta^{s/4}).

    Windows are centred at every ball centre and at every midpoint of two
    centres that fit together; for pairs this is exact.
    """
    radius = ps.cap_radius if radius is None else radius
    if not len(ps):
        return 0
    x = embed(ps.centers)
    reach = radius - ps.delta
    tree = cKDTree(x)
    pairs = np.array(sorted(tree.query_pairs(2 * reach + 1e-12)), dtype=np.int64).reshape(-1, 2)
    windows = np.concatenate([x, (x[pairs[:, 0]] + x[pairs[:, 1]]) / 2])
    return int(max(len(hit) for hit in tree.query_ball_point(windows, reach + 1e-12)))


@dataclass
class SplitSets:
    e1: PointSet
    e2: PointSet
    b1_center: np.ndarray
    b2_center: np.ndarray
    c1: float
    c2: float
    c_split: float


def _subset(ps: PointSet, mask) -> PointSet:
    return PointSet(ps.centers[mask], ps.delta, ps.s, ps.big_n, ps.seed, ps.c1, ps.c2, ps.cluster[mask])


def split(ps: PointSet) -> SplitSets:
    """E_j = balls of ps contained in B_j."""
    b1, b2 = ps.ball_centers
    x = embed(ps.centers) if len(ps) else np.zeros((0, 4))
    in1 = np.linalg.norm(x - embed(b1), axis=1) <= ps.c1 - ps.delta + 1e-12
    in2 = np.linalg.norm(x - embed(b2), axis=1) <= ps.c1 - ps.delta + 1e-12
    e1, e2 = _subset(ps, in1), _subset(ps, in2)
    low = min(len(e1), len(e2))
    return SplitSets(e1, e2, b1, b2, ps.c1, ps.c2, len(ps) / low if low else math.inf)


# --------------------------------------------------------------------------- tubes


def build_tubes(sp: SplitSets, delta: float) -> TubeFamily:
    """delta-tubes around the segments {m + z v : |z| <= 1/2} for (q1, q2) in E1 x E2 and E2 x E1."""
    a, b = sp.e1.centers, sp.e2.centers
    p = np.concatenate([np.repeat(a, len(b), axis=0), np.repeat(b, len(a), axis=0)])
    q = np.concatenate([np.tile(b, (len(a), 1)), np.tile(a, (len(b), 1))])
    point, v = aux_params(p, q) if len(p) else (np.zeros((0, 3)), np.zeros((0, 3)))
    norm = np.linalg.norm(v, axis=1) if len(v) else np.zeros(0)
    s, big_n = sp.e1.s, sp.e1.big_n
    fam = TubeFamily(
        3, delta, delta ** (-s / 4), "at-most-H0", big_n**2, sp.e1.seed,
        point, v / norm[:, None] if len(v) else v, norm, np.full(len(p), delta),
    )
    fam.meta["pairs"] = (len(a), len(b))
    return fam


# --------------------------------------------------------------------------- quadruples and coverings


def pair_values(sp: SplitSets) -> np.ndarray:
    """Delta(p1, p2) for (p1, p2) in E1 x E2, row-major in (E1 index, E2 index)."""
    return complex_distance(sp.e1.centers[:, None, :], sp.e2.centers[None, :, :]).reshape(-1)


@dataclass
class QuadrupleCount:
    q_count: int
    method: str
    delta: float


def _close_pairs_hashed(values: np.ndarray, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """All ordered (i, j) with |values[i] - values[j]| < delta, via a delta-grid of C."""
    if not len(values):
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    bx = np.floor(values.real / delta).astype(np.int64)
    by = np.floor(values.imag / delta).astype(np.int64)
    bx0, by0 = bx - bx.min() + 1, by - by.min() + 1
    width = int(by0.max()) + 2
    key = bx0 * width + by0
    order = np.argsort(key, kind="stable")
    sk = key[order]
    out_i, out_j = [], []
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            target = key + dx * width + dy
            lo = np.searchsorted(sk, target, "left")
            hi = np.searchsorted(sk, target, "right")
            cnt = hi - lo
            if not cnt.sum():
                continue
            i = np.repeat(np.arange(len(values)), cnt)
            start = np.repeat(lo - np.concatenate([[0], np.cumsum(cnt)[:-1]]), cnt)
            j = order[start + np.arange(len(i))]
            keep = np.abs(values[i] - values[j]) < delta
            out_i.append(i[keep])
            out_j.append(j[keep])
    return np.concatenate(out_i), np.concatenate(out_j)


def _close_pairs_brute(values: np.ndarray, delta: float) -> tuple[np.ndarray, np.ndarray]:
    out_i, out_j = [], []
    step = max(1, 2_000_000 // max(1, len(values)))
    for start in range(0, len(values), step):
        blk = values[start : start + step]
        i, j = np.nonzero(np.abs(blk[:, None] - values[None, :]) < delta)
        out_i.append(i + start)
        out_j.append(j)
    if not out_i:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.concatenate(out_i), np.concatenate(out_j)


def quadruples(sp: SplitSets, delta: float, method: str = "hashed") -> np.ndarray:
    """Index rows (i1, i2, i3, i4) of Q: i1, i4 index E1 and i2, i3 index E2."""
    vals = pair_values(sp)
    if method == "brute":
        if len(sp.e1) * len(sp.e2) > BRUTE_PAIR_BUDGET:
            raise PreconditionError(f"brute counting needs |E1||E2| <= {BRUTE_PAIR_BUDGET}")
        a, b = _close_pairs_brute(vals, delta)
    elif method == "hashed":
        a, b = _close_pairs_hashed(vals, delta)
    else:
        raise PreconditionError(f"unknown counting method {method!r}")
    m = len(sp.e2)
    rows = np.stack([a // m, a % m, b % m, b // m], axis=1)
    return rows[np.lexsort(rows.T[::-1])] if len(rows) else rows.reshape(0, 4)


def count_quadruples(sp: SplitSets, delta: float, method: str = "hashed") -> QuadrupleCount:
    return QuadrupleCount(len(quadruples(sp, delta, method)), method, delta)


def covering_number(values, delta: float) -> int:
    """Number of nonempty delta x delta buckets of C met by the values."""
    v = np.asarray(values, complex).reshape(-1)
    if not len(v):
        return 0
    keys = np.stack([np.floor(v.real / delta), np.floor(v.imag / delta)], axis=1)
    return len(np.unique(keys, axis=0))


def covering_number_greedy(values, delta: float) -> int:
    """Greedy cover by closed delta-discs centred at uncovered values (oracle)."""
    v = np.asarray(values, complex).reshape(-1)
    pts = np.column_stack([v.real, v.imag])
    tree = cKDTree(pts)
    covered = np.zeros(len(v), bool)
    count = 0
    for i in range(len(v)):
        if covered[i]:
            continue
        count += 1
        covered[tree.query_ball_point(pts[i], delta)] = True
    return count


def cs_lower_bound(n1: int, n2: int, q_count: int) -> float:
    if q_count < 1:
        raise PreconditionError("q_count must be >= 1")
    return (n1 * n2) ** 2 / q_count


# --------------------------------------------------------------------------- one-tube claim


def G(pa, pb, alpha, beta) -> np.ndarray:
    """Real parametrisation of the auxiliary line of (pa, pb): iota(m + (alpha + i beta) v)."""
    m, v = aux_params(pa, pb)
    z = np.asarray(alpha) + 1j * np.asarray(beta)
    return embed(m + z[..., None] * v)


def parallelogram_residual(p1, p2, p3, p4) -> float:
    p1, p2, p3, p4 = (embed(as_cvec(p)) for p in (p1, p2, p3, p4))
    lhs = 2 * np.sum((p1 - p2) ** 2) + 2 * np.sum((p3 - p4) ** 2)
    rhs = np.sum(((p1 + p3) - (p2 + p4)) ** 2) + np.sum(((p1 - p3) - (p2 - p4)) ** 2)
    return float(abs(lhs - rhs))


@dataclass
class OneTubeReport:
    case: int
    witness: tuple
    separation: float
    required: float
    holds: bool
    sum_gap: float
    diff_gap: float
    parallelogram_residual: float
    ring_best: dict

    def to_dict(self) -> dict:
        return asdict(self)


def _centre(p) -> np.ndarray:
    return as_cvec(p.center) if hasattr(p, "center") else as_cvec(p)


def verify_one_tube_claim(q1, q2, q3, q4, s: float, delta: float, case_constant: float = 16.0, angles: int = 16) -> OneTubeReport:
    """Find (alpha0, beta0) in the disc of radius 1/4 where the lines of (p1, p3) and (p2, p4) are far apart.

    Case 1 (|D| <= 16 |S|, S = (p1+p3)-(p2+p4), D = (p1-p3)-(p2-p4)) uses the
    origin; otherwise the best point on the circle of radius 1/8.
    """
    p1, p2, p3, p4 = (_centre(q) for q in (q1, q2, q3, q4))
    rho = delta ** (s / 4)
    checks = {"p1-p3": (p1, p3), "p2-p4": (p2, p4)}
    for name, (a, b) in checks.items():
        if np.linalg.norm(embed(a - b)) < rho:
            raise PreconditionError(f"pair {name} is closer than delta^(s/4)")
    if max(np.linalg.norm(embed(p1 - p2)), np.linalg.norm(embed(p3 - p4))) < rho:
        raise PreconditionError("pairs p1-p2 and p3-p4 are both closer than delta^(s/4)")
    S = np.linalg.norm(embed((p1 + p3) - (p2 + p4)))
    D = np.linalg.norm(embed((p1 - p3) - (p2 - p4)))

    def sep(alpha, beta):
        return np.linalg.norm(G(p1, p3, alpha, beta) - G(p2, p4, alpha, beta), axis=-1)

    theta = 2 * np.pi * np.arange(angles) / angles
    ring_best = {}
    for radius in (1 / 8, 1 / 4):
        vals = sep(radius * np.cos(theta), radius * np.sin(theta))
        k = int(np.argmax(vals))
        ring_best[str(radius)] = {"alpha": float(radius * np.cos(theta[k])), "beta": float(radius * np.sin(theta[k])),
                                  "separation": float(vals[k])}
    if D <= case_constant * S:
        case, witness = 1, (0.0, 0.0)
        value = float(sep(0.0, 0.0))
    else:
        best = ring_best[str(1 / 8)]
        case, witness, value = 2, (best["alpha"], best["beta"]), best["separation"]
    required = rho / 32
    return OneTubeReport(case, witness, value, required, value >= required, float(S), float(D),
                         parallelogram_residual(p1, p2, p3, p4), ring_best)


# --------------------------------------------------------------------------- intersection proposition


@dataclass
class IntersectionReport:
    max_cos: float
    angle_ok: bool
    branch: str
    s: complex
    a_norm: float
    a_formula: float
    a_bound: float
    a_ok: bool
    s_ok: bool
    witness: list
    witness_norm: float
    witness_ok: bool
    line_gap: float

    @property
    def holds(self) -> bool:
        return self.angle_ok and self.a_ok and self.s_ok and self.witness_ok

    def to_dict(self) -> dict:
        d = asdict(self)
        d["s"] = [self.s.real, self.s.imag]
        d["holds"] = self.holds
        return d


def max_cos_angle(v, w, steps: int = ANGLE_STEPS) -> float:
    """max over a grid of unit z of the real cosine between v and z w."""
    v, w = as_cvec(v), as_cvec(w)
    z = np.exp(2j * np.pi * np.arange(steps) / steps)
    inner = np.vdot(w, v)  # sum v_i conj(w_i)
    cos = (np.conj(z) * inner).real / (np.linalg.norm(v) * np.linalg.norm(w))
    return float(cos.max())


def verify_intersection_prop(p1, p2, p3, p4, delta: float, c1: float = C1_PAPER, c2: float = C2) -> IntersectionReport:
    """Angle, distance and containment checks for the lines of (p1, p3) and (p2, p4)."""
    p1, p2, p3, p4 = (_centre(p) for p in (p1, p2, p3, p4))
    gap = abs(complex_distance(p1, p2) - complex_distance(p3, p4))
    if not gap < delta:
        raise PreconditionError("|Delta(p1,p2) - Delta(p3,p4)| must be < delta")
    m13, v = aux_params(p1, p3)
    m24, w = aux_params(p2, p4)
    max_cos = max_cos_angle(v, w)
    (x1, y1), (x2, y2), (x3, y3), (x4, y4) = p1, p2, p3, p4
    den_x = x1 - x3 - x2 + x4
    den_y = y1 - y3 - y2 + y4
    if abs(den_x) < delta and abs(den_y) < delta:
        raise PreconditionError("both denominators are below delta")
    if abs(den_x) >= abs(den_y):
        branch, s = "x", (y1 + y3 - y2 - y4) / den_x
        formula = gap / (2 * abs(den_x))
    else:
        # zeroing the first coordinate needs the minus sign
        branch, s = "y", -(x1 + x3 - x2 - x4) / den_y
        formula = gap / (2 * abs(den_y))
    X1, X2 = m13 + s * v, m24 + s * w
    A = X1 - X2
    a_norm = float(np.linalg.norm(A))
    bound = delta / (c2 - 2 * c1)
    centre = (X1 + X2) / 2
    cn = float(np.linalg.norm(centre))
    return IntersectionReport(
        max_cos, max_cos <= 1 - EPS1, branch, complex(s), a_norm, formula, bound, a_norm < bound, abs(s) < 0.5,
        [[c.real, c.imag] for c in centre], cn, cn + delta / 2 <= 0.75, a_norm,
    )


def common_ball(family: TubeFamily, i: int, j: int, grid=None) -> bool:
    """Whether tubes i and j of the family are both incident to one grid ball."""
    grid = ball_grid(family.n, family.delta) if grid is None else grid
    rho = incidence_threshold(family.n) * family.delta
    ki = grid.keys(tube_ball_indices(grid, family.centers[i], family.directions[i], family.lengths[i] / 2, rho))
    kj = grid.keys(tube_ball_indices(grid, family.centers[j], family.directions[j], family.lengths[j] / 2, rho))
    return bool(np.intersect1d(ki, kj).size)


def tube_index(sp: SplitSets, i_first: int, i_second: int, first_in_e1: bool) -> int:
    """Row of T_{q, q'} in build_tubes' output (q from E1 when first_in_e1)."""
    n1, n2 = len(sp.e1), len(sp.e2)
    return i_first * n2 + i_second if first_in_e1 else n1 * n2 + i_first * n1 + i_second


# --------------------------------------------------------------------------- pipeline


@dataclass
class FalconerReport:
    s: float
    delta: float
    big_n: int
    epsilon: float
    seed: int
    c1: float
    c2: float
    points: int
    e1: int
    e2: int
    c_split: float
    tubes: int
    big_w: float
    h0: int
    spacing: dict
    spacing_ok: bool
    profile: dict
    q_count: int
    incidence_sum: int
    incidence_ok: bool
    covering_count: int
    cs_lower_bound: float
    cs_ok: bool
    target: float
    target_ok: bool
    point_target: float

    @property
    def passed(self) -> bool:
        return self.spacing_ok and self.incidence_ok and self.cs_ok and self.target_ok

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = self.passed
        return d


def run_falconer(s: float, delta: float, big_n: int, epsilon: float, seed: int = 0, c1: float = DEFAULT_C1,
                 c2: float = C2, method: str = "hashed", spacing_rule: str = "cell",
                 placement: str = "strict") -> tuple[FalconerReport, RichnessProfile]:
    ps = generate_point_set(s, delta, big_n, seed, c1, c2, placement=placement)
    sp = split(ps)
    fam = build_tubes(sp, delta)
    grid = ball_grid(3, delta)
    _, counts = ball_counts(grid, fam)
    profile = RichnessProfile(profile_from_counts(counts), delta, family_id(fam), "indexed", len(grid))
    inc_sum = sum(r * r * c for r, c in profile.entries.items())
    q = count_quadruples(sp, delta, method).q_count
    cover = covering_number(pair_values(sp), delta)
    n1, n2 = len(sp.e1), len(sp.e2)
    cs = cs_lower_bound(n1, n2, q) if q else 0.0
    if len(fam):
        rep = check_spacing(fam, fam.big_w, rule=spacing_rule)
        spacing = rep.to_dict()
        spacing_ok = rep.max <= big_n**2
    else:
        spacing, spacing_ok = {}, True
    target = delta ** (-s + epsilon)
    report = FalconerReport(
        s, delta, big_n, epsilon, seed, c1, c2, len(ps), n1, n2, sp.c_split if n1 and n2 else 0.0, len(fam),
        fam.big_w, big_n**2, spacing, spacing_ok, {str(k): v for k, v in profile.entries.items()}, q, inc_sum,
        q <= inc_sum, cover, cs, cover >= cs / 9, target, cover >= target if big_n else True,
        point_target(s, delta, big_n),
    )
    return report, profile
