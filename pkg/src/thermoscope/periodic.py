"""Points of period ``n``, their multipliers, and weighted periodic-point measures.

The solutions of ``f^n(y) = y`` are the zeros of the form
``Phi = X1 Y0 - X0 Y1`` with ``Y = F^n(X)``, where ``F`` is the homogeneous
lift.  Expanding ``Phi`` into coefficients is hopeless for large ``n`` (they
grow doubly exponentially), so ``Phi`` and its derivative are evaluated by
iterating the lift, rescaling after every step.  A random unitary change of
coordinates ``X = U (w, 1)`` puts every solution at a finite ``w``; all
``d^n + 1`` roots are found together by Aberth's method and then refined by
Newton's method in multiprecision arithmetic.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass

import mpmath
import numpy as np

from ._parallel import chunked, map_chunks
from .measures import EmpiricalMeasure
from .rational import CLUSTER_TOL, RationalMap
from .sphere import EvaluationSet, SpherePoint, chordal, normalize, to_affine_array
from .weights import Weight, birkhoff_sum

log = logging.getLogger(__name__)

DEFAULT_PRECISION_BITS = 256
DEFAULT_DEGREE_CAP = 4097
VERIFY_TOL = 1e-6
NEUTRAL_BAND = 1e-6
ABERTH_MAX_ITER = 2000
ABERTH_TOL = 4e-16
ABERTH_ROWS = 512
POLISH_CHUNK = 256


class DegreeCapExceeded(ValueError):
    pass


@dataclass(frozen=True)
class PeriodicPoint:
    point: SpherePoint
    period: int
    multiplier_modulus: float
    repelling: bool
    birkhoff_weight: float = 1.0


class PeriodicPoints(list):
    """List of :class:`PeriodicPoint` with bookkeeping of discarded roots."""

    def __init__(self, items=(), period: int = 0, dropped: int = 0, expected: int = 0):
        super().__init__(items)
        self.period = period
        self.dropped = dropped
        self.expected = expected


def _random_unitary(rng):
    Q, R = np.linalg.qr(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def _phi_and_derivative(f: RationalMap, U, n: int, w):
    """``Phi(w)`` and ``Phi'(w)`` up to a common nonzero factor."""
    X = np.stack([U[0, 0] * w + U[0, 1], U[1, 0] * w + U[1, 1]], axis=-1)
    dX = np.broadcast_to(U[:, 0], X.shape)
    Y, dY = X, dX
    for _ in range(n):
        A, B = f.lift(Y)
        dA, dB = f.lift_differential(Y, dY)
        scale = np.sqrt(np.abs(A) ** 2 + np.abs(B) ** 2)[:, None]
        Y = np.stack([A, B], axis=-1) / scale
        dY = np.stack([dA, dB], axis=-1) / scale
    val = X[:, 1] * Y[:, 0] - X[:, 0] * Y[:, 1]
    der = dX[:, 1] * Y[:, 0] + X[:, 1] * dY[:, 0] - dX[:, 0] * Y[:, 1] - X[:, 0] * dY[:, 1]
    return val, der


def _aberth(f: RationalMap, U, n: int, count: int, rng):
    angles = 2 * np.pi * (np.arange(count) + rng.random()) / count
    w = np.exp(1j * angles) * (1 + 0.1 * rng.random())
    active = np.ones(count, dtype=bool)
    for _ in range(ABERTH_MAX_ITER):
        idx = np.flatnonzero(active)
        if len(idx) == 0:
            break
        val, der = _phi_and_derivative(f, U, n, w[idx])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(der != 0, val / der, val)
        S = np.empty(len(idx), dtype=complex)
        for lo, hi in chunked(len(idx), ABERTH_ROWS):
            diff = w[idx[lo:hi], None] - w[None, :]
            diff[np.arange(hi - lo), idx[lo:hi]] = np.inf
            S[lo:hi] = np.sum(1 / diff, axis=1)
        corr = ratio / (1 - ratio * S)
        corr = np.where(np.isfinite(corr), corr, 0.1 * (1 + np.abs(w[idx])))
        w[idx] -= corr
        active[idx[np.abs(corr) <= ABERTH_TOL * (1 + np.abs(w[idx]))]] = False
    return w


class _MPMap:
    """Multiprecision evaluation of the lift and its differential."""

    def __init__(self, f: RationalMap):
        conv = lambda arr: [mpmath.mpc(complex(x)) for x in arr]
        self.P, self.Q = conv(f.P), conv(f.Q)
        self.dP = (conv(f._dP[0]), conv(f._dP[1]))
        self.dQ = (conv(f._dQ[0]), conv(f._dQ[1]))

    @staticmethod
    def form(c, z0, z1):
        # sum_k c[k] z0^k z1^(m-k) by Horner in z0 with powers of z1
        m = len(c) - 1
        out = mpmath.mpc(0)
        p1 = mpmath.mpc(1)
        for k in range(m, -1, -1):
            out = out + c[k] * z0 ** k * p1
            p1 = p1 * z1
        return out

    def phi(self, U, n, w):
        x0 = U[0][0] * w + U[0][1]
        x1 = U[1][0] * w + U[1][1]
        dx0, dx1 = U[0][0], U[1][0]
        y0, y1, dy0, dy1 = x0, x1, dx0, dx1
        for _ in range(n):
            a = self.form(self.P, y0, y1)
            b = self.form(self.Q, y0, y1)
            da = self.form(self.dP[0], y0, y1) * dy0 + self.form(self.dP[1], y0, y1) * dy1
            db = self.form(self.dQ[0], y0, y1) * dy0 + self.form(self.dQ[1], y0, y1) * dy1
            s = max(abs(a), abs(b))
            y0, y1, dy0, dy1 = a / s, b / s, da / s, db / s
        val = x1 * y0 - x0 * y1
        der = dx1 * y0 + x1 * dy0 - dx0 * y1 - x0 * dy1
        return val, der


def _polish(f: RationalMap, U, n: int, w, bits: int, workers: int):
    """Multiprecision Newton refinement of the roots ``w``."""
    mp_map = _MPMap(f)

    def run(bounds):
        lo, hi = bounds
        out = np.empty(hi - lo, dtype=complex)
        with mpmath.workprec(bits):
            Um = [[mpmath.mpc(complex(U[i, j])) for j in range(2)] for i in range(2)]
            target = mpmath.mpf(2) ** (-(bits - 16))
            for k, w0 in enumerate(w[lo:hi]):
                z = mpmath.mpc(complex(w0))
                for _ in range(8):
                    val, der = mp_map.phi(Um, n, z)
                    if der == 0:
                        break
                    step = val / der
                    z -= step
                    if abs(step) <= target * (1 + abs(z)):
                        break
                out[k] = complex(z)
        return out

    return np.concatenate(map_chunks(run, chunked(len(w), POLISH_CHUNK), workers))


def multiplier_modulus(f: RationalMap, Z, n: int):
    """``|(f^n)'|`` at rows ``Z`` as the product of spherical derivatives along the orbit."""
    out = np.ones(len(Z))
    for _ in range(n):
        out *= f.spherical_derivative_array(Z)
        Z = f(Z)
    return out


def _sort_key(Z):
    values, inf = to_affine_array(Z)
    finite = np.where(inf, 0, values)
    angle = np.round(np.mod(np.angle(finite), 2 * np.pi), 12)
    return np.lexsort((np.abs(finite), angle, inf))


def periodic_points(f: RationalMap, n: int, precision_bits: int = DEFAULT_PRECISION_BITS,
                    w: Weight | None = None, degree_cap: int = DEFAULT_DEGREE_CAP,
                    seed: int = 0, workers: int = 1) -> PeriodicPoints:
    """All solutions of ``f^n(y) = y``, ordered by argument and then modulus.

    Roots that fail the closure check ``chordal(f^n(y), y) <= 1e-6`` are
    dropped and counted in ``.dropped``.  ``birkhoff_weight`` is
    ``exp(S_n w(y))`` (1 when ``w`` is omitted).
    """
    if n < 1:
        raise ValueError("period must be at least 1")
    count = f.degree ** n + 1
    if count > degree_cap:
        raise DegreeCapExceeded(f"d^n + 1 = {count} exceeds degree_cap = {degree_cap}")
    rng = np.random.default_rng(seed)
    U = _random_unitary(rng)
    w_roots = _aberth(f, U, n, count, rng)
    w_roots = _polish(f, U, n, w_roots, precision_bits, workers)
    Z = normalize(np.stack([U[0, 0] * w_roots + U[0, 1], U[1, 0] * w_roots + U[1, 1]], axis=-1))

    closure = chordal(f.iterate(Z, n), Z)
    good = closure <= VERIFY_TOL
    dropped = int(np.count_nonzero(~good))
    Z = Z[good]
    # distinct roots of a simple fixed-point form; merge accidental duplicates
    keep = np.ones(len(Z), dtype=bool)
    for i in range(len(Z)):
        if keep[i]:
            close = chordal(Z[i + 1:], Z[i]) < CLUSTER_TOL
            keep[i + 1:][close] = False
    dropped += int(np.count_nonzero(~keep))
    Z = Z[keep]
    if dropped:
        log.warning("period %d: dropped %d of %d roots", n, dropped, count)

    Z = Z[_sort_key(Z)]
    mult = multiplier_modulus(f, Z, n)
    weights = np.exp(birkhoff_sum(f, w, Z, n)) if w is not None else np.ones(len(Z))
    items = [PeriodicPoint(SpherePoint.from_array(z), n, float(m), bool(m > 1 + NEUTRAL_BAND),
                           float(b))
             for z, m, b in zip(Z, mult, weights)]
    return PeriodicPoints(items, n, dropped, count)


def select_repelling_near_julia(points, julia: EvaluationSet, delta: float | None = None) -> list:
    """Repelling points within chordal ``delta`` (default ten times the mesh) of ``julia``."""
    if julia is None or len(julia) == 0:
        raise ValueError("julia sample must be nonempty")
    delta = 10 * julia.mesh() if delta is None else delta
    repelling = [p for p in points if p.repelling]
    if not repelling:
        return []
    coords = np.vstack([p.point.as_array() for p in repelling])
    near = julia.distance_to(coords) <= delta
    return [p for p, ok in zip(repelling, near) if ok]


def _coords(selected):
    if not selected:
        return np.zeros((0, 2), dtype=complex)
    return np.vstack([p.point.as_array() for p in selected])


def periodic_measure(f: RationalMap, w: Weight, lambda_hat: float, selected, n: int
                     ) -> EmpiricalMeasure:
    """Atoms ``lambda^{-n} e^{S_n w(y)}`` at the selected points, left unnormalised.

    Use :meth:`EmpiricalMeasure.normalized_copy` for moment comparisons.
    """
    Z = _coords(selected)
    meta = {"map": f.to_dict(), "weight": w.to_dict(), "n": n, "kind": "periodic"}
    if len(Z) == 0:
        return EmpiricalMeasure(Z, np.zeros(0), False, meta)
    log_mass = birkhoff_sum(f, w, Z, n) - n * np.log(lambda_hat)
    return EmpiricalMeasure(Z, np.exp(log_mass), False, meta)


def lyapunov_from_periodic(f: RationalMap, w: Weight, lambda_hat: float, selected, n: int) -> float:
    """``lambda^{-n} sum e^{S_n w(y)} log|multiplier(y)| / n`` over the selection."""
    if not selected:
        return 0.0
    mu = periodic_measure(f, w, lambda_hat, selected, n)
    logs = np.log([p.multiplier_modulus for p in selected]) / n
    return float(np.sum(mu.masses * logs))


PERIODIC_HEADER = ["re", "im", "at_infinity", "period", "multiplier_modulus", "repelling",
                   "birkhoff_weight"]


def periodic_csv(points) -> str:
    """CSV text with one row per periodic point."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PERIODIC_HEADER)
    for p in points:
        d = p.point.to_dict()
        writer.writerow([f"{d['re']:.17g}", f"{d['im']:.17g}", int(d["at_infinity"]), p.period,
                         f"{p.multiplier_modulus:.17g}", int(p.repelling),
                         f"{p.birkhoff_weight:.17g}"])
    return buf.getvalue()


def write_periodic_csv(points, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(periodic_csv(points))
