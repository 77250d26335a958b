"""Weighted backward-orbit measures and the diagnostics built on them.

The conformal measure is approximated by the normalised measure
``lambda^{-n} sum_{f^n a = x} e^{S_n phi(a)} delta_a``.  The tree is grown one
level at a time; once the number of atoms passes ``atom_cap`` it is thinned by
systematic resampling.  Before resampling, atoms are ordered along a Hilbert
curve on the sphere so that the resampling strata are spatially local.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .rational import RESIDUAL_TOL, RationalMap, RootFindingError, exceptional_points
from .sphere import (EvaluationSet, GridKind, SpherePoint, chordal, make_grid, normalize,
                     to_affine_array, to_r3)
from .transfer import SampledFunction, apply_exact
from .weights import Weight

DEFAULT_ATOM_CAP = 2 ** 16
HILBERT_ORDER = 20
START_CLEARANCE = 0.1
EXCEPTIONAL_TOL = 1e-8


@dataclass
class EmpiricalMeasure:
    """Finitely many weighted atoms on the sphere."""

    coords: np.ndarray
    masses: np.ndarray
    normalized: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=complex).reshape(-1, 2)
        self.masses = np.asarray(self.masses, dtype=float).reshape(-1)
        if len(self.coords) != len(self.masses):
            raise ValueError("atoms and masses differ in length")
        norms = np.abs(self.coords[:, 0]) ** 2 + np.abs(self.coords[:, 1]) ** 2
        if np.any(np.abs(norms - 1) > 1e-12):
            self.coords = normalize(self.coords)
        if np.any(self.masses < 0) or not np.all(np.isfinite(self.masses)):
            raise ValueError("masses must be finite and nonnegative")
        if self.normalized and abs(self.total_mass - 1) > 1e-10:
            raise ValueError("measure flagged normalized but total mass is not 1")

    def __len__(self):
        return len(self.masses)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.masses))

    @property
    def atoms(self) -> list[tuple[SpherePoint, float]]:
        return [(SpherePoint.from_array(z), float(m)) for z, m in zip(self.coords, self.masses)]

    def normalized_copy(self) -> "EmpiricalMeasure":
        total = self.total_mass
        if total <= 0:
            raise ValueError("cannot normalise a measure of zero mass")
        return EmpiricalMeasure(self.coords, self.masses / total, True, dict(self.meta))

    def to_dict(self) -> dict:
        values, inf = to_affine_array(self.coords)
        atoms = [{"re": 0.0 if i else float(v.real), "im": 0.0 if i else float(v.imag),
                  "at_infinity": bool(i), "mass": float(m)}
                 for v, i, m in zip(values, inf, self.masses)]
        return {"atoms": atoms, "meta": self.meta}

    @classmethod
    def from_dict(cls, data: dict) -> "EmpiricalMeasure":
        points = [SpherePoint.from_dict(a) for a in data["atoms"]]
        coords = np.array([[p.z0, p.z1] for p in points], dtype=complex).reshape(-1, 2)
        masses = np.array([a["mass"] for a in data["atoms"]], dtype=float)
        return cls(coords, masses, False, dict(data.get("meta", {})))

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)

    def write_csv(self, path) -> None:
        values, inf = to_affine_array(self.coords)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["re", "im", "at_infinity", "mass"])
            for v, i, m in zip(values, inf, self.masses):
                re, im = (0.0, 0.0) if i else (v.real, v.imag)
                writer.writerow([f"{re:.17g}", f"{im:.17g}", int(i), f"{m:.17g}"])


# ---------------------------------------------------------------------------
# resampling


def _hilbert_index(x, y, order: int):
    """Position along the Hilbert curve of integer cells ``(x, y)`` in ``[0, 2^order)^2``."""
    x = x.astype(np.int64).copy()
    y = y.astype(np.int64).copy()
    n = np.int64(1) << order
    d = np.zeros_like(x)
    s = n >> 1
    while s > 0:
        rx = (x & s) > 0
        ry = (y & s) > 0
        d += s * s * ((3 * rx.astype(np.int64)) ^ ry.astype(np.int64))
        flip = ~ry & rx
        x = np.where(flip, n - 1 - x, x)
        y = np.where(flip, n - 1 - y, y)
        swap = ~ry
        x, y = np.where(swap, y, x), np.where(swap, x, y)
        s >>= 1
    return d


def hilbert_order(Z, order: int = HILBERT_ORDER):
    """Stable permutation sorting rows of ``Z`` along a sphere-filling curve.

    Uses the equal-area cylindrical coordinates (longitude, height) of the
    R^3 embedding.
    """
    X = to_r3(Z)
    lon = (np.arctan2(X[:, 1], X[:, 0]) + np.pi) / (2 * np.pi)
    height = (X[:, 2] + 1) / 2
    scale = (1 << order) - 1
    ix = np.clip(np.round(lon * scale), 0, scale)
    iy = np.clip(np.round(height * scale), 0, scale)
    return np.argsort(_hilbert_index(ix, iy, order), kind="stable")


def systematic_resample(masses, count: int, rng):
    """Indices and multiplicities of a systematic resample to ``count`` equal masses.

    Returns ``(index, hits)``: atom ``index[k]`` was selected ``hits[k]`` times.
    The expected number of hits of atom ``i`` is ``count * masses[i] / sum``.
    """
    total = float(np.sum(masses))
    positions = (rng.random() + np.arange(count)) * (total / count)
    edges = np.cumsum(masses)
    edges[-1] = max(edges[-1], total)
    picks = np.minimum(np.searchsorted(edges, positions, side="right"), len(masses) - 1)
    return np.unique(picks, return_counts=True)


def _resample(Z, masses, count, rng):
    perm = hilbert_order(Z)
    Z, masses = Z[perm], masses[perm]
    total = float(np.sum(masses))
    index, hits = systematic_resample(masses, count, rng)
    return Z[index], hits * (total / count)


# ---------------------------------------------------------------------------
# tree sampling


def _check_not_exceptional(f: RationalMap, x: SpherePoint):
    for e in exceptional_points(f):
        if chordal(x.as_array(), e.as_array())[0] < EXCEPTIONAL_TOL:
            raise ValueError(f"start point {x!r} is exceptional")


def default_start(f: RationalMap, seed: int, grid_size: int = 64) -> SpherePoint:
    """Random grid point at chordal distance > 0.1 from every exceptional point."""
    grid = make_grid(GridKind.UNIFORM_SPHERE, grid_size, seed).coords
    exc = exceptional_points(f)
    ok = np.ones(len(grid), dtype=bool)
    for e in exc:
        ok &= chordal(grid, e.as_array()) > START_CLEARANCE
    candidates = grid[ok]
    rng = np.random.default_rng(seed)
    return SpherePoint.from_array(candidates[rng.integers(len(candidates))])


def _grow(f: RationalMap, w: Weight, x: SpherePoint, n: int, lambda_hat: float,
          atom_cap: int, seed: int):
    if n < 0:
        raise ValueError("depth n must be nonnegative")
    if atom_cap < 1:
        raise ValueError("atom_cap must be positive")
    if not lambda_hat > 0:
        raise ValueError("lambda_hat must be positive")
    _check_not_exceptional(f, x)
    rng = np.random.default_rng(seed)
    Z = x.as_array()
    masses = np.ones(1)
    for _ in range(n):
        roots, residuals = f.preimage_array(Z)
        if np.any(residuals > RESIDUAL_TOL):
            raise RootFindingError("preimage computation did not converge", residuals)
        Z = roots.reshape(-1, 2)
        masses = np.repeat(masses, f.degree) * np.exp(w(Z)) / lambda_hat
        if len(Z) > atom_cap:
            Z, masses = _resample(Z, masses, atom_cap, rng)
    return Z, masses


def _meta(f, w, n, seed, **extra):
    meta = {"map": f.to_dict(), "weight": w.to_dict(), "n": n, "seed": seed}
    meta.update(extra)
    return meta


def sample_conformal(f: RationalMap, w: Weight, x: SpherePoint | None, n: int,
                     lambda_hat: float, atom_cap: int = DEFAULT_ATOM_CAP, seed: int = 0):
    """Normalised weighted preimage measure of depth ``n`` and its total mass.

    The total mass ``lambda^{-n} L^n 1(x)`` approximates ``rho(x)``.
    """
    x = default_start(f, seed) if x is None else x
    Z, masses = _grow(f, w, x, n, lambda_hat, atom_cap, seed)
    total = float(np.sum(masses))
    mu = EmpiricalMeasure(Z, masses / total, True, _meta(f, w, n, seed, kind="conformal"))
    return mu, total


def sample_equilibrium(f: RationalMap, w: Weight, x: SpherePoint | None, n: int,
                       lambda_hat: float, rho_hat: SampledFunction,
                       atom_cap: int = DEFAULT_ATOM_CAP, seed: int = 0) -> EmpiricalMeasure:
    """The conformal sample reweighted by ``rho_hat`` at each atom."""
    if np.any(rho_hat.values <= 0):
        raise ValueError("rho_hat must be strictly positive")
    m, _ = sample_conformal(f, w, x, n, lambda_hat, atom_cap, seed)
    masses = m.masses * rho_hat.at(m.coords)
    masses = masses / masses.sum()
    return EmpiricalMeasure(m.coords, masses, True, _meta(f, w, n, seed, kind="equilibrium"))


def julia_sample(f: RationalMap, n: int = 24, count: int = 2048, seed: int = 0,
                 start: SpherePoint | None = None) -> EvaluationSet:
    """At most ``count`` distinct points of a depth-``n`` unweighted backward orbit."""
    start = default_start(f, seed) if start is None else start
    Z, _ = _grow(f, Weight.constant(0.0), start, n, float(f.degree), count, seed)
    return EvaluationSet.deduplicated(Z, GridKind.JULIA_SAMPLE,
                                      f"julia(n={n}, count={count}, seed={seed})")


# ---------------------------------------------------------------------------
# integration and defects


def _values(g, Z):
    if np.isscalar(g):
        return np.full(len(Z), float(g))
    return np.asarray(g(Z))


def integrate(mu: EmpiricalMeasure, g):
    """``sum mass * g(atom)``; ``g`` may be complex-valued."""
    if len(mu) == 0:
        return 0.0
    out = np.sum(mu.masses * _values(g, mu.coords))
    return complex(out) if np.iscomplexobj(out) else float(out)


def pushforward(mu: EmpiricalMeasure, f: RationalMap) -> EmpiricalMeasure:
    coords = f(mu.coords) if len(mu) else mu.coords
    return EmpiricalMeasure(coords, mu.masses, mu.normalized, dict(mu.meta))


def _require(dictionary):
    dictionary = list(dictionary)
    if not dictionary:
        raise ValueError("dictionary must be nonempty")
    return dictionary


def invariance_defect(mu: EmpiricalMeasure, f: RationalMap, dictionary) -> float:
    """``max_g |<mu, g o f> - <mu, g>|``."""
    image = f(mu.coords)
    return max(abs(float(np.sum(mu.masses * (g(image) - g(mu.coords)))))
               for g in _require(dictionary))


def conformality_defect(m: EmpiricalMeasure, f: RationalMap, w: Weight, lambda_hat: float,
                        dictionary) -> float:
    """``max_g |<m, L g> - lambda <m, g>| / (1 + |lambda <m, g>|)`` with ``L g`` exact at atoms."""
    worst = 0.0
    for g in _require(dictionary):
        Lg = apply_exact(f, w, g, m.coords)
        scaled = lambda_hat * float(np.sum(m.masses * g(m.coords)))
        worst = max(worst, abs(float(np.sum(m.masses * Lg)) - scaled) / (1 + abs(scaled)))
    return worst


def jacobian(f: RationalMap, w: Weight, lambda_hat: float, rho_hat: SampledFunction, x):
    """``lambda rho(x)^{-1} e^{-w(x)} rho(f(x))`` for a point or an array of rows."""
    scalar = isinstance(x, SpherePoint)
    Z = x.as_array() if scalar else np.asarray(x, dtype=complex).reshape(-1, 2)
    out = lambda_hat * rho_hat.at(f(Z)) / rho_hat.at(Z) * np.exp(-w(Z))
    return float(out[0]) if scalar else out


def moment_discrepancy(mu1: EmpiricalMeasure, mu2: EmpiricalMeasure, dictionary) -> float:
    return max(abs(integrate(mu1, g) - integrate(mu2, g)) for g in _require(dictionary))


# ---------------------------------------------------------------------------
# test-function dictionaries


class Mode:
    """``Re`` or ``Im`` of ``z^m / (1 + |z|^2)^m``, i.e. of ``(z0 conj z1)^m``."""

    def __init__(self, m: int, part: str):
        if part not in ("re", "im"):
            raise ValueError("part must be 're' or 'im'")
        self.m, self.part = int(m), part

    def __call__(self, Z):
        Z = normalize(np.asarray(Z, dtype=complex).reshape(-1, 2))
        v = (Z[:, 0] * np.conj(Z[:, 1])) ** self.m
        return v.real if self.part == "re" else v.imag

    def __repr__(self):
        return f"{self.part}(z^{self.m})"


def default_dictionary(w: Weight | None = None, max_mode: int = 8) -> list:
    """Real and imaginary low modes for ``m = 0..max_mode``, plus ``w`` if given.

    ``Im`` of the zeroth mode vanishes identically and is left out.
    """
    out = [Mode(0, "re")]
    for m in range(1, max_mode + 1):
        out += [Mode(m, "re"), Mode(m, "im")]
    if w is not None:
        out.append(w)
    return out


def affine_moment(k: int):
    """``z^k`` in the affine chart; infinity is sent to 0 (callers keep atoms finite)."""
    def g(Z):
        values, inf = to_affine_array(Z)
        return np.where(inf, 0, values) ** k
    return g


def support_distance(mu: EmpiricalMeasure, julia: EvaluationSet) -> float:
    """Largest chordal distance from an atom of positive mass to ``julia``."""
    coords = mu.coords[mu.masses > 0]
    return float(np.max(julia.distance_to(coords))) if len(coords) else 0.0
