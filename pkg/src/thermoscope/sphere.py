"""Points of the Riemann sphere in homogeneous coordinates.

A point ``[z0 : z1]`` has affine coordinate ``z = z0 / z1``; ``[1 : 0]`` is
infinity.  Representatives are kept with ``|z0|^2 + |z1|^2 = 1`` so that the
chordal distance is simply ``|z0 w1 - z1 w0|``.

Vectorised helpers work on ``(N, 2)`` complex arrays of normalised rows;
:class:`SpherePoint` is the scalar value type built on top of them.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.spatial import cKDTree

EQUALITY_TOL = 1e-12
DUPLICATE_TOL = 1e-14
# |z1| below this is reported as the point at infinity by the affine chart
INFINITY_TOL = 1e-15


def normalize(Z):
    """Rescale homogeneous rows of ``Z`` to unit norm."""
    Z = np.asarray(Z, dtype=complex)
    norm = np.sqrt(np.abs(Z[..., 0]) ** 2 + np.abs(Z[..., 1]) ** 2)
    if np.any(norm == 0):
        raise ValueError("[0:0] is not a point of the sphere")
    return Z / norm[..., None]


def from_affine_array(z):
    """Homogeneous rows for affine values; ``inf`` entries map to infinity."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    Z = np.empty(z.shape + (2,), dtype=complex)
    inf = ~np.isfinite(z)
    big = np.abs(z) > 1
    zz = np.where(inf, 0, z)
    # divide by the larger coordinate to avoid overflow
    Z[..., 0] = np.where(big | inf, 1, zz)
    Z[..., 1] = np.where(inf, 0, np.where(big, 1 / np.where(big, zz, 1), 1))
    return normalize(Z)


def to_affine_array(Z):
    """Affine values and an at-infinity mask for homogeneous rows."""
    Z = np.asarray(Z, dtype=complex)
    at_inf = np.abs(Z[..., 1]) <= INFINITY_TOL * np.abs(Z[..., 0])
    safe = np.where(at_inf, 1, Z[..., 1])
    values = np.where(at_inf, complex(np.inf, 0), Z[..., 0] / safe)
    return values, at_inf


def chordal(A, B):
    """Elementwise chordal distance between broadcastable homogeneous arrays."""
    A = np.asarray(A)
    B = np.asarray(B)
    return np.abs(A[..., 0] * B[..., 1] - A[..., 1] * B[..., 0])


def to_r3(Z):
    """Embed homogeneous rows in the unit sphere of R^3 (infinity at the north pole).

    Euclidean distance between embedded points is twice the chordal distance.
    """
    Z = np.asarray(Z, dtype=complex)
    a, b = Z[..., 0], Z[..., 1]
    s = np.abs(a) ** 2 + np.abs(b) ** 2
    xy = 2 * a * np.conj(b) / s
    return np.stack([xy.real, xy.imag, (np.abs(a) ** 2 - np.abs(b) ** 2) / s], axis=-1)


def from_r3(X):
    X = np.asarray(X, dtype=float)
    x, y, z = X[..., 0], X[..., 1], X[..., 2]
    south = z <= 0
    Z = np.empty(X.shape[:-1] + (2,), dtype=complex)
    Z[..., 0] = np.where(south, x + 1j * y, 1 + z)
    Z[..., 1] = np.where(south, 1 - z, x - 1j * y)
    return normalize(Z)


@dataclass(frozen=True)
class SpherePoint:
    """A normalised point ``[z0 : z1]`` of the Riemann sphere."""

    z0: complex
    z1: complex

    def __post_init__(self):
        z0, z1 = complex(self.z0), complex(self.z1)
        norm = np.hypot(abs(z0), abs(z1))
        if norm == 0 or not np.isfinite(norm):
            raise ValueError(f"invalid homogeneous coordinates [{z0}:{z1}]")
        object.__setattr__(self, "z0", z0 / norm)
        object.__setattr__(self, "z1", z1 / norm)

    @classmethod
    def from_array(cls, row) -> "SpherePoint":
        return cls(complex(row[0]), complex(row[1]))

    def as_array(self):
        return np.array([[self.z0, self.z1]], dtype=complex)

    @property
    def at_infinity(self) -> bool:
        return abs(self.z1) <= INFINITY_TOL * abs(self.z0)

    def isclose(self, other: "SpherePoint", tol: float = EQUALITY_TOL) -> bool:
        return chordal_dist(self, other) < tol

    def to_dict(self) -> dict:
        value, inf = to_affine(self)
        if inf:
            return {"re": 0.0, "im": 0.0, "at_infinity": True}
        return {"re": value.real, "im": value.imag, "at_infinity": False}

    @classmethod
    def from_dict(cls, data: dict) -> "SpherePoint":
        if data.get("at_infinity", False):
            return point_at_infinity()
        return from_affine(complex(data["re"], data["im"]))

    def __repr__(self):
        value, inf = to_affine(self)
        return "SpherePoint(inf)" if inf else f"SpherePoint({value:.6g})"


def chordal_dist(a: SpherePoint, b: SpherePoint) -> float:
    """Chordal distance ``|a0 b1 - a1 b0|``; lies in ``[0, 1]``."""
    return abs(a.z0 * b.z1 - a.z1 * b.z0)


def from_affine(z: complex) -> SpherePoint:
    return SpherePoint.from_array(from_affine_array(z)[0])


def point_at_infinity() -> SpherePoint:
    return SpherePoint(1.0, 0.0)


def to_affine(p: SpherePoint) -> tuple[complex, bool]:
    """Return ``(z, at_infinity)``; ``z`` is ``inf`` when the flag is set."""
    if p.at_infinity:
        return complex(np.inf, 0), True
    return p.z0 / p.z1, False


class GridKind(str, Enum):
    UNIFORM_SPHERE = "uniform_sphere"
    JULIA_SAMPLE = "julia_sample"
    CUSTOM = "custom"


@dataclass(eq=False)
class EvaluationSet:
    """An ordered, duplicate-free finite set of sphere points."""

    coords: np.ndarray
    kind: GridKind = GridKind.CUSTOM
    provenance: str = ""
    _tree: cKDTree | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        coords = normalize(np.asarray(self.coords, dtype=complex).reshape(-1, 2))
        if len(coords) == 0:
            raise ValueError("evaluation set must be nonempty")
        self.coords = coords
        self.kind = GridKind(self.kind)
        if len(coords) > 1:
            dist, _ = self.tree.query(to_r3(coords), k=2)
            if np.min(dist[:, 1]) / 2 < DUPLICATE_TOL:
                raise ValueError("evaluation set contains duplicate points")

    @classmethod
    def from_points(cls, points, kind=GridKind.CUSTOM, provenance=""):
        coords = np.array([[p.z0, p.z1] for p in points], dtype=complex)
        return cls(coords, kind, provenance)

    @classmethod
    def deduplicated(cls, coords, kind=GridKind.CUSTOM, provenance="", tol=DUPLICATE_TOL):
        """Build a set from ``coords`` keeping the first of any near-duplicate points."""
        coords = normalize(np.asarray(coords, dtype=complex).reshape(-1, 2))
        pairs = cKDTree(to_r3(coords)).query_pairs(2 * max(tol, DUPLICATE_TOL) * 1.0001,
                                                     output_type="ndarray")
        keep = np.ones(len(coords), dtype=bool)
        if len(pairs):
            pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
            for i, j in pairs:
                if keep[i]:
                    keep[j] = False
        return cls(coords[keep], kind, provenance)

    def __len__(self):
        return len(self.coords)

    @property
    def points(self) -> list[SpherePoint]:
        return [SpherePoint.from_array(row) for row in self.coords]

    @property
    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(to_r3(self.coords))
        return self._tree

    def nearest(self, Z):
        """Index of the nearest point (chordal) for each homogeneous row of ``Z``."""
        Z = np.asarray(Z, dtype=complex).reshape(-1, 2)
        _, idx = self.tree.query(to_r3(Z))
        return idx

    def distance_to(self, Z):
        """Chordal distance from each row of ``Z`` to the set."""
        Z = np.asarray(Z, dtype=complex).reshape(-1, 2)
        dist, _ = self.tree.query(to_r3(Z))
        return dist / 2

    def mesh(self) -> float:
        """Largest nearest-neighbour chordal distance (a covering-radius proxy)."""
        if len(self) == 1:
            return 1.0
        dist, _ = self.tree.query(to_r3(self.coords), k=2)
        return float(np.max(dist[:, 1]) / 2)

    def fingerprint(self) -> str:
        return hashlib.sha1(np.ascontiguousarray(self.coords).tobytes()).hexdigest()

    def union(self, other: "EvaluationSet", provenance: str | None = None) -> "EvaluationSet":
        prov = provenance or f"union({self.provenance},{other.provenance})"
        return EvaluationSet.deduplicated(np.vstack([self.coords, other.coords]),
                                          GridKind.CUSTOM, prov)


def fibonacci_sphere(size: int, seed: int = 0):
    """Fibonacci lattice on the unit sphere of R^3, randomly rotated by ``seed``."""
    k = np.arange(size) + 0.5
    z = 1 - 2 * k / size
    r = np.sqrt(np.clip(1 - z * z, 0, None))
    theta = np.pi * (3 - np.sqrt(5)) * k
    X = np.stack([r * np.cos(theta), r * np.sin(theta), z], axis=1)
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((3, 3)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return X @ Q.T


def make_grid(kind, size: int, seed: int = 0) -> EvaluationSet:
    """Deterministic evaluation grid.

    Only ``uniform_sphere`` is produced here; Julia samples need a map and come
    from :func:`thermoscope.measures.julia_sample`.
    """
    kind = GridKind(kind)
    if size < 1:
        raise ValueError("grid size must be at least 1")
    if kind is GridKind.JULIA_SAMPLE:
        raise ValueError("julia_sample grids are built by measures.julia_sample(f, ...)")
    if kind is GridKind.CUSTOM:
        raise ValueError("custom grids are built with EvaluationSet(...) directly")
    coords = from_r3(fibonacci_sphere(size, seed))
    return EvaluationSet(coords, kind, f"fibonacci(size={size}, seed={seed})")
