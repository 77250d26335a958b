"""Rational self-maps of the Riemann sphere.

A map of degree ``d`` is stored as a pair of binary forms of degree ``d``.
A form of degree ``m`` is a coefficient vector ``c`` of length ``m + 1``
meaning ``sum_k c[k] z0**k z1**(m - k)``; with ``z1 = 1`` this is the
ordinary polynomial with ascending coefficients ``c``, so numerator and
denominator coefficients double as form coefficients.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .sphere import (
    EvaluationSet,
    SpherePoint,
    chordal,
    normalize,
)

log = logging.getLogger(__name__)

CLUSTER_TOL = 1e-7
INFINITY_COEFF_TOL = 1e-12
RESULTANT_TOL = 1e-10
RESIDUAL_TOL = 1e-6
NEWTON_STEPS = 2


class InvalidMapError(ValueError):
    pass


class RootFindingError(RuntimeError):
    """Polynomial roots could not be resolved; ``residuals`` holds the offenders."""

    def __init__(self, message, residuals):
        super().__init__(f"{message} (max residual {np.max(residuals):.3e})")
        self.residuals = np.asarray(residuals)


# ---------------------------------------------------------------------------
# binary forms


def form_eval(c, Z):
    """Evaluate form(s) ``c`` at homogeneous rows ``Z``.

    ``c`` is ``(m + 1,)`` (one form) or ``(N, m + 1)`` (one form per row).
    """
    c = np.asarray(c, dtype=complex)
    Z = np.asarray(Z, dtype=complex)
    m = c.shape[-1] - 1
    k = np.arange(m + 1)
    z0 = Z[..., 0, None]
    z1 = Z[..., 1, None]
    terms = z0 ** k * z1 ** (m - k)
    return np.sum(c * terms, axis=-1)


def form_mul(a, b):
    return np.convolve(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def form_d0(c):
    """Partial derivative in ``z0``."""
    c = np.asarray(c, dtype=complex)
    m = len(c) - 1
    if m == 0:
        return np.zeros(1, dtype=complex)
    return c[1:] * np.arange(1, m + 1)


def form_d1(c):
    """Partial derivative in ``z1``."""
    c = np.asarray(c, dtype=complex)
    m = len(c) - 1
    if m == 0:
        return np.zeros(1, dtype=complex)
    return c[:-1] * (m - np.arange(m))


def form_compose(c, P, Q):
    """The form ``c(P, Q)`` for forms ``P, Q`` of a common degree."""
    m = len(c) - 1
    deg = len(P) - 1
    out = np.zeros(m * deg + 1, dtype=complex)
    powP = [np.ones(1, dtype=complex)]
    powQ = [np.ones(1, dtype=complex)]
    for _ in range(m):
        powP.append(form_mul(powP[-1], P))
        powQ.append(form_mul(powQ[-1], Q))
    for k in range(m + 1):
        if c[k] != 0:
            out += c[k] * form_mul(powP[k], powQ[m - k])
    return out


def resultant(P, Q):
    """Resultant of two binary forms of degree ``d`` (Sylvester determinant)."""
    d = len(P) - 1
    S = np.zeros((2 * d, 2 * d), dtype=complex)
    # rows act on the descending-power basis z0^{2d-1}, ..., z1^{2d-1}
    for i in range(d):
        S[i, i:i + d + 1] = P[::-1]
        S[d + i, i:i + d + 1] = Q[::-1]
    return np.linalg.det(S)


# ---------------------------------------------------------------------------
# batched roots of binary forms


def _poly_and_derivative(c, t):
    """Horner for ascending coefficients ``c`` (N, m+1) at ``t`` (N, r)."""
    p = np.broadcast_to(c[:, -1:], t.shape).astype(complex)
    dp = np.zeros_like(p)
    for k in range(c.shape[1] - 2, -1, -1):
        dp = dp * t + p
        p = p * t + c[:, k:k + 1]
    return p, dp


def _polish(H, X, steps=NEWTON_STEPS):
    """Newton steps on ``H`` at homogeneous roots ``X`` (N, m, 2), chart by chart."""
    Hrev = H[:, ::-1]
    for _ in range(steps):
        use_z = np.abs(X[..., 0]) <= np.abs(X[..., 1])
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(use_z, X[..., 0] / X[..., 1], X[..., 1] / X[..., 0])
            pz, dpz = _poly_and_derivative(H, t)
            pw, dpw = _poly_and_derivative(Hrev, t)
            p = np.where(use_z, pz, pw)
            dp = np.where(use_z, dpz, dpw)
            t_new = t - p / dp
        ok = np.isfinite(t_new) & (np.abs(t_new) <= 1.5)
        if not np.any(ok):
            break
        pnz, _ = _poly_and_derivative(H, np.where(ok, t_new, 0))
        pnw, _ = _poly_and_derivative(Hrev, np.where(ok, t_new, 0))
        pn = np.where(use_z, pnz, pnw)
        accept = ok & (np.abs(pn) < np.abs(p))
        t = np.where(accept, t_new, t)
        X = np.where(
            use_z[..., None],
            np.stack([t, np.ones_like(t)], axis=-1),
            np.stack([np.ones_like(t), t], axis=-1),
        )
        X = normalize(X)
    return X


def _chart_roots(coeffs):
    """Roots of polynomials with ascending ``coeffs`` (N, m+1) and nonzero leading term."""
    N, m1 = coeffs.shape
    m = m1 - 1
    if m == 1:
        return (-coeffs[:, 0] / coeffs[:, 1])[:, None]
    C = np.zeros((N, m, m), dtype=complex)
    C[:, np.arange(1, m), np.arange(m - 1)] = 1.0
    C[:, :, -1] = -coeffs[:, :-1] / coeffs[:, -1:]
    return np.linalg.eigvals(C)


def form_roots(H):
    """All roots, with multiplicity, of binary forms given row-wise in ``H``.

    Returns ``(roots, residuals)`` with ``roots`` of shape ``(N, m, 2)``
    (normalised homogeneous rows) and the relative residual of each root.
    Rows whose leading coefficient is negligible in both charts are solved
    one by one with explicit deflation of the roots at infinity.
    """
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    N, m1 = H.shape
    m = m1 - 1
    roots = np.empty((N, m, 2), dtype=complex)
    if m == 0:
        return roots, np.zeros((N, 0))
    scale = np.max(np.abs(H), axis=1)
    if np.any(scale == 0):
        raise RootFindingError("zero form has no isolated roots", np.full(N, np.inf))
    H = H / scale[:, None]
    lead_z = np.abs(H[:, -1])
    lead_w = np.abs(H[:, 0])
    z_chart = lead_z >= lead_w
    regular = np.maximum(lead_z, lead_w) >= INFINITY_COEFF_TOL

    idx = np.flatnonzero(regular & z_chart)
    if len(idx):
        t = _chart_roots(H[idx])
        roots[idx] = np.stack([t, np.ones_like(t)], axis=-1)
    idx = np.flatnonzero(regular & ~z_chart)
    if len(idx):
        t = _chart_roots(H[idx, ::-1])
        roots[idx] = np.stack([np.ones_like(t), t], axis=-1)
    for i in np.flatnonzero(~regular):
        roots[i] = _deflated_roots(H[i])
    roots = normalize(roots)
    roots = _polish(H, roots)
    coeff_norm = np.sum(np.abs(H), axis=1)
    residuals = np.abs(form_eval(H[:, None, :], roots)) / coeff_norm[:, None]
    return roots, residuals


def _deflated_roots(h):
    """Roots of one form whose end coefficients are both negligible."""
    m = len(h) - 1
    tol = INFINITY_COEFF_TOL * np.max(np.abs(h))
    lo = 0
    while lo < m and abs(h[lo]) < tol:
        lo += 1
    hi = m
    while hi > lo and abs(h[hi]) < tol:
        hi -= 1
    out = []
    out += [[0.0, 1.0]] * lo          # z0 = 0, the point 0
    out += [[1.0, 0.0]] * (m - hi)    # z1 = 0, the point at infinity
    core = h[lo:hi + 1]
    if len(core) > 1:
        t = _chart_roots(core[None, :])[0]
        out += [[r, 1.0] for r in t]
    return np.array(out, dtype=complex)


# ---------------------------------------------------------------------------
# rational maps


def _as_coeffs(values):
    out = []
    for v in values:
        if isinstance(v, (list, tuple)):
            out.append(complex(v[0], v[1]))
        else:
            out.append(complex(v))
    return np.array(out, dtype=complex)


class RationalMap:
    """A rational map ``z -> P(z) / Q(z)`` of degree ``d >= 2``.

    Coefficients are ascending in ``z``.  The pair is rescaled so the largest
    coefficient has modulus one; ``P`` and ``Q`` must not share a root
    (including a common root at infinity).
    """

    def __init__(self, numerator, denominator=(1.0,), *, name: str | None = None):
        p = np.trim_zeros(_as_coeffs(numerator), "b")
        q = np.trim_zeros(_as_coeffs(denominator), "b")
        if len(q) == 0:
            raise InvalidMapError("denominator is identically zero")
        if len(p) == 0:
            p = np.zeros(1, dtype=complex)
        d = max(len(p), len(q)) - 1
        if d < 2:
            raise InvalidMapError(f"degree must be at least 2, got {d}")
        P = np.zeros(d + 1, dtype=complex)
        Q = np.zeros(d + 1, dtype=complex)
        P[: len(p)] = p
        Q[: len(q)] = q
        scale = max(np.max(np.abs(P)), np.max(np.abs(Q)))
        P, Q = P / scale, Q / scale
        res = abs(resultant(P, Q))
        if res <= RESULTANT_TOL:
            raise InvalidMapError(f"numerator and denominator share a root (|resultant|={res:.2e})")
        self.degree = d
        self.P = P
        self.Q = Q
        self.name = name
        self._dP = (form_d0(P), form_d1(P))
        self._dQ = (form_d0(Q), form_d1(Q))

    @classmethod
    def polynomial(cls, coeffs, name=None):
        return cls(coeffs, (1.0,), name=name)

    @classmethod
    def from_dict(cls, data: dict) -> "RationalMap":
        unknown = set(data) - {"numerator", "denominator", "name"}
        if unknown:
            raise InvalidMapError(f"unknown map keys: {sorted(unknown)}")
        return cls(data["numerator"], data.get("denominator", [[1.0, 0.0]]), name=data.get("name"))

    def to_dict(self) -> dict:
        out = {
            "numerator": [[c.real, c.imag] for c in self.P],
            "denominator": [[c.real, c.imag] for c in self.Q],
        }
        if self.name:
            out["name"] = self.name
        return out

    def __repr__(self):
        return f"RationalMap({self.name or 'P/Q'}, d={self.degree})"

    # -- evaluation ---------------------------------------------------------

    def lift(self, Z):
        """Unnormalised ``(P_h(Z), Q_h(Z))`` for homogeneous rows ``Z``."""
        return form_eval(self.P, Z), form_eval(self.Q, Z)

    def __call__(self, Z):
        """Image of homogeneous rows ``Z`` (normalised)."""
        A, B = self.lift(Z)
        return normalize(np.stack([A, B], axis=-1))

    def iterate(self, Z, n: int):
        for _ in range(n):
            Z = self(Z)
        return Z

    def jacobian_det(self, Z):
        """Determinant of the Jacobian of the homogeneous lift."""
        P0 = form_eval(self._dP[0], Z)
        P1 = form_eval(self._dP[1], Z)
        Q0 = form_eval(self._dQ[0], Z)
        Q1 = form_eval(self._dQ[1], Z)
        return P0 * Q1 - P1 * Q0

    def lift_differential(self, Z, dZ):
        """Directional derivative of the lift at ``Z`` along ``dZ``."""
        dA = form_eval(self._dP[0], Z) * dZ[..., 0] + form_eval(self._dP[1], Z) * dZ[..., 1]
        dB = form_eval(self._dQ[0], Z) * dZ[..., 0] + form_eval(self._dQ[1], Z) * dZ[..., 1]
        return dA, dB

    def spherical_derivative_array(self, Z):
        """``|f'(z)| (1 + |z|^2) / (1 + |f(z)|^2)`` at normalised rows ``Z``.

        Uses the chart-free identity ``|det DF| / (d |F|^2)`` for the lift ``F``.
        """
        Z = normalize(Z)
        A, B = self.lift(Z)
        return np.abs(self.jacobian_det(Z)) / (self.degree * (np.abs(A) ** 2 + np.abs(B) ** 2))

    def preimage_array(self, Y):
        """All ``d`` preimages of each row of ``Y``, shape ``(N, d, 2)``, plus residuals."""
        Y = np.asarray(Y, dtype=complex).reshape(-1, 2)
        H = Y[:, 1:2] * self.P[None, :] - Y[:, 0:1] * self.Q[None, :]
        return form_roots(H)

    def compose(self, other: "RationalMap") -> "RationalMap":
        """The map ``self o other``."""
        P = form_compose(self.P, other.P, other.Q)
        Q = form_compose(self.Q, other.P, other.Q)
        return RationalMap(P, Q)

    def fixed_point_form(self):
        """The form ``P_h z1 - Q_h z0`` whose roots are the fixed points."""
        d = self.degree
        out = np.zeros(d + 2, dtype=complex)
        out[: d + 1] += self.P
        out[1:] -= self.Q
        return out

    def critical_form(self):
        """Jacobian determinant of the lift as a form of degree ``2d - 2``."""
        return form_mul(self._dP[0], self._dQ[1]) - form_mul(self._dP[1], self._dQ[0])


# ---------------------------------------------------------------------------
# public operations


@dataclass(frozen=True)
class PreimageSet:
    items: tuple[tuple[SpherePoint, int], ...]

    def __iter__(self):
        return iter(self.items)

    def __len__(self):
        return len(self.items)

    @property
    def total_multiplicity(self) -> int:
        return sum(m for _, m in self.items)


def cluster_roots(roots, tol=CLUSTER_TOL):
    """Merge homogeneous roots closer than ``tol`` (chordal); returns ``[(row, mult)]``."""
    out: list[list] = []
    for r in roots:
        for item in out:
            if chordal(item[0], r) < tol:
                item[1] += 1
                break
        else:
            out.append([r, 1])
    return [(row, m) for row, m in out]


def evaluate(f: RationalMap, x: SpherePoint) -> SpherePoint:
    return SpherePoint.from_array(f(x.as_array())[0])


def preimages(f: RationalMap, y: SpherePoint) -> PreimageSet:
    """Solutions of ``f(x) = y`` counted with multiplicity."""
    roots, residuals = f.preimage_array(y.as_array())
    if np.any(residuals > RESIDUAL_TOL):
        raise RootFindingError("preimage computation did not converge", residuals)
    items = tuple((SpherePoint.from_array(r), m) for r, m in cluster_roots(roots[0]))
    return PreimageSet(items)


def spherical_derivative(f: RationalMap, x: SpherePoint) -> float:
    return float(f.spherical_derivative_array(x.as_array())[0])


def _roots_of(form):
    roots, residuals = form_roots(np.asarray(form)[None, :])
    if np.any(residuals > RESIDUAL_TOL):
        raise RootFindingError("root extraction did not converge", residuals)
    return roots[0]


def critical_points(f: RationalMap) -> list[tuple[SpherePoint, int]]:
    """The ``2d - 2`` critical points with multiplicity."""
    roots = _roots_of(f.critical_form())
    return [(SpherePoint.from_array(r), m) for r, m in cluster_roots(roots)]


def _is_power_of_linear(H, b, tol=1e-8):
    """Whether the form ``H`` is proportional to ``(b1 z0 - b0 z1)^m``."""
    m = len(H) - 1
    lin = np.array([-b[0], b[1]], dtype=complex)
    Lm = np.ones(1, dtype=complex)
    for _ in range(m):
        Lm = form_mul(Lm, lin)
    cos = abs(np.vdot(Lm, H)) / (np.linalg.norm(Lm) * np.linalg.norm(H))
    return 1 - cos < tol


def exceptional_points(f: RationalMap) -> list[SpherePoint]:
    """Points with finite grand orbit.

    Candidates are the fixed points of ``f`` and ``f^2``; ``a`` is exceptional
    when ``f^{-1}(a) = {f(a)}`` and ``f^{-1}(f(a)) = {a}`` (for a fixed ``a``
    this reads ``f^{-1}(a) = {a}``), tested exactly on the preimage forms.
    """
    candidates = list(_roots_of(f.compose(f).fixed_point_form()))
    found: list[np.ndarray] = []
    for a in candidates:
        if any(chordal(a, e) < CLUSTER_TOL for e in found):
            continue
        b = f(a[None, :])[0]
        if chordal(f(b[None, :])[0], a) > CLUSTER_TOL:
            continue
        Ha = a[1] * f.P - a[0] * f.Q
        Hb = b[1] * f.P - b[0] * f.Q
        if _is_power_of_linear(Ha, b) and _is_power_of_linear(Hb, a):
            found.append(a)
    return [SpherePoint.from_array(a) for a in found]


class TriState(str, Enum):
    FALSE = "false"
    LIKELY = "likely"


@dataclass
class AssumptionAReport:
    """Status of the local-degree growth condition and its weaker substitute.

    Exceptional points of a degree ``d`` map always have local degree ``d`` under
    every iterate, so the condition fails exactly when one exists.  The weaker
    condition (exceptional set off the Julia set) is evaluated on a sample, and
    in that regime additional, unstated conditions on the weight may be needed.
    """

    exceptional: list[SpherePoint]
    satisfies_A: TriState
    exceptional_disjoint_from_julia: bool
    min_distance_to_julia: float
    note: str = field(default="")

    def to_dict(self) -> dict:
        return {
            "exceptional": [p.to_dict() for p in self.exceptional],
            "satisfies_A": self.satisfies_A.value,
            "exceptional_disjoint_from_julia": self.exceptional_disjoint_from_julia,
            "min_distance_to_julia": self.min_distance_to_julia,
            "note": self.note,
        }


def assumption_a_report(f: RationalMap, julia: EvaluationSet | None = None,
                        tol: float = 1e-3) -> AssumptionAReport:
    exc = exceptional_points(f)
    if julia is None:
        from .measures import julia_sample

        julia = julia_sample(f, 24, 2048, seed=0)
    if exc:
        dist = float(np.min(julia.distance_to(np.vstack([p.as_array() for p in exc]))))
    else:
        dist = float("inf")
    disjoint = dist > tol
    if exc:
        status = TriState.FALSE
        note = ("exceptional points have local degree d under every iterate; "
                + ("they are disjoint from the Julia sample, so only the weaker condition holds"
                   if disjoint else "an exceptional point meets the Julia sample"))
    else:
        status = TriState.LIKELY
        note = "exceptional set is empty; local degree growth is not verified numerically"
    return AssumptionAReport(exc, status, disjoint, dist, note)

