"""Complex linear algebra on C^n: the real embedding, line angles, plane rotations.

Vectors are plain ``numpy`` complex arrays of length n (n = 2 or 3). A batch of
vectors is an array of shape ``(..., n)``; every function here broadcasts over
leading axes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

UNIT_TOL = 1e-12
SUPPORTED_DIMS = (2, 3)


class PreconditionError(ValueError):
    """An input violated a documented precondition."""


def as_cvec(v) -> np.ndarray:
    """Coerce to a complex array, checking the trailing dimension."""
    arr = np.asarray(v, dtype=complex)
    if arr.ndim == 0 or arr.shape[-1] not in SUPPORTED_DIMS:
        raise PreconditionError(f"expected complex vectors of length 2 or 3, got shape {arr.shape}")
    return arr


def hnorm(v) -> np.ndarray:
    return np.linalg.norm(np.asarray(v, dtype=complex), axis=-1)


def hdot(u, v) -> np.ndarray:
    """Hermitian inner product <u, v> = sum u_k conj(v_k)."""
    return np.sum(np.asarray(u, dtype=complex) * np.conj(np.asarray(v, dtype=complex)), axis=-1)


def _require_unit(*vs) -> None:
    for v in vs:
        bad = np.abs(hnorm(v) - 1.0) > UNIT_TOL
        if np.any(bad):
            raise PreconditionError("direction is not a unit vector (tolerance 1e-12)")


def normalize(v) -> np.ndarray:
    v = as_cvec(v)
    nrm = hnorm(v)
    if np.any(nrm == 0):
        raise PreconditionError("cannot normalize the zero vector")
    return v / nrm[..., None]


def embed(v) -> np.ndarray:
    """Interleave real and imaginary parts: (z1, ..., zn) -> (Re z1, Im z1, ..., Re zn, Im zn)."""
    v = np.asarray(v, dtype=complex)
    out = np.empty(v.shape[:-1] + (2 * v.shape[-1],))
    out[..., 0::2] = v.real
    out[..., 1::2] = v.imag
    return out


def unembed(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] % 2:
        raise PreconditionError("real vector must have even length")
    return x[..., 0::2] + 1j * x[..., 1::2]


def line_angle(u1, u2) -> np.ndarray | float:
    """Angle between the complex lines spanned by unit vectors u1 and u2.

    Equals arccos |<u1, u2>|, always in [0, pi/2] and blind to unit phases.
    """
    u1, u2 = as_cvec(u1), as_cvec(u2)
    _require_unit(u1, u2)
    # written so that swapping u1 and u2 only flips the sign of `im`, exactly
    re_part = np.sum(u1.real * u2.real + u1.imag * u2.imag, axis=-1)
    im_part = np.sum(u1.imag * u2.real - u1.real * u2.imag, axis=-1)
    c = np.clip(np.hypot(re_part, im_part), 0.0, 1.0)
    out = np.arccos(c)
    return float(out) if np.ndim(out) == 0 else out


def definition1_angle(u1, u2, grid_steps: int = 720) -> float:
    """Brute-force minimum of the real angle between iota(z1 u1) and iota(z2 u2).

    z1 and z2 range over ``grid_steps`` equally spaced unit scalars each. This
    is a test oracle; the answer is accurate to about 2*pi/grid_steps.
    """
    u1, u2 = as_cvec(u1), as_cvec(u2)
    _require_unit(u1, u2)
    phases = np.exp(2j * np.pi * np.arange(grid_steps) / grid_steps)
    a = embed(phases[:, None] * u1[None, :])
    b = embed(phases[:, None] * u2[None, :])
    best = np.max(a @ b.T)
    return float(np.arccos(np.clip(best, -1.0, 1.0)))


def principal_angle_oracle(u1, u2, grid_steps: int = 720) -> tuple[float, float]:
    """Both principal angles between the real 2-planes iota(C u1) and iota(C u2).

    Uses the SVD of the 2x2 block B1^T B2 with orthonormal bases
    B_k = [iota(u_k), iota(i u_k)]. ``grid_steps`` is kept for interface
    parity with :func:`definition1_angle` and only validated.
    """
    if grid_steps < 360:
        raise PreconditionError("grid_steps must be at least 360")
    u1, u2 = as_cvec(u1), as_cvec(u2)
    _require_unit(u1, u2)
    b1 = np.stack([embed(u1), embed(1j * u1)], axis=1)
    b2 = np.stack([embed(u2), embed(1j * u2)], axis=1)
    sv = np.linalg.svd(b1.T @ b2, compute_uv=False)
    first, second = np.arccos(np.clip(sv, -1.0, 1.0))
    return float(first), float(second)


def rotate2(y, zeta) -> np.ndarray:
    """(y1, y2) -> (y1 cos z + y2 sin z, -y1 sin z + y2 cos z), broadcasting over leading axes."""
    y = np.asarray(y, dtype=float)
    c, s = np.cos(zeta), np.sin(zeta)
    return np.stack([y[..., 0] * c + y[..., 1] * s, -y[..., 0] * s + y[..., 1] * c], axis=-1)


def canonical_phase(u) -> np.ndarray:
    """Multiply a unit vector by the phase making its first non-negligible entry real positive."""
    u = as_cvec(u)
    k = int(np.argmax(np.abs(u) > 1e-9))
    return u * np.exp(-1j * np.angle(u[k]))


def perp_frame(u) -> np.ndarray:
    """Deterministic orthonormal basis (rows) of the Hermitian complement of ``u``.

    Gram-Schmidt over the standard basis with the axis most aligned to ``u`` removed.
    """
    u = as_cvec(u)
    n = u.shape[-1]
    skip = int(np.argmax(np.abs(u)))
    basis = [u / hnorm(u)]
    for k in range(n):
        if k == skip:
            continue
        e = np.zeros(n, dtype=complex)
        e[k] = 1.0
        for b in basis:
            e = e - hdot(e, b) * b
        basis.append(e / hnorm(e))
    return np.array(basis[1:])


@dataclass(frozen=True, eq=False)
class ComplexLine:
    """The point set {point + z * direction : z in C}.

    Stored canonically: ``point`` is the foot of the perpendicular from the
    origin and ``direction`` has its first significant entry real positive, so
    equal point sets compare equal.
    """

    point: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        d = normalize(self.direction)
        p = as_cvec(self.point)
        p = p - hdot(p, d) * d
        object.__setattr__(self, "direction", canonical_phase(d))
        object.__setattr__(self, "point", p)

    @property
    def n(self) -> int:
        return self.point.shape[-1]

    def at(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return self.point + z[..., None] * self.direction

    def distance(self, p) -> np.ndarray:
        w = np.asarray(p, dtype=complex) - self.point
        return hnorm(w - hdot(w, self.direction)[..., None] * self.direction)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ComplexLine):
            return NotImplemented
        return (
            self.n == other.n
            and np.allclose(self.point, other.point, atol=1e-12)
            and np.allclose(self.direction, other.direction, atol=1e-12)
        )

    def __hash__(self):
        return hash((self.n, tuple(np.round(embed(self.point), 9)), tuple(np.round(embed(self.direction), 9))))
