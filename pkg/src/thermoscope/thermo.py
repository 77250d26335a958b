"""Pressure, entropy, Lyapunov exponent, and correlation diagnostics."""
from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ._parallel import map_chunks
from .measures import (DEFAULT_ATOM_CAP, EmpiricalMeasure, integrate, julia_sample,
                       sample_equilibrium)
from .rational import RationalMap
from .sphere import EvaluationSet
from .transfer import (SampledFunction, apply_exact, build_ulam, lambda_bracket,
                       power_iteration)
from .weights import Weight, admissible, oscillation

log = logging.getLogger(__name__)

ENTROPY_TOL = 1e-3


@dataclass
class ThermoReport:
    lambda_hat: float
    pressure: float
    mean_phi: float
    entropy_hat: float
    lyapunov_hat: float
    entropy_lower_bound: float
    hausdorff_lower_bound: float | None
    diagnostics: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def log_spherical_derivative(f: RationalMap):
    def g(Z):
        return np.log(np.maximum(f.spherical_derivative_array(Z), 1e-300))
    return g


def thermo_report(f: RationalMap, w: Weight, lambda_hat: float, rho_hat: SampledFunction,
                  mu_hat: EmpiricalMeasure, E: EvaluationSet | None = None,
                  tol: float = ENTROPY_TOL) -> ThermoReport:
    """Entropy from ``log lambda - <mu, w>`` and the Lyapunov exponent ``<mu, log |f'|>``.

    The oscillation in the entropy bound is measured on ``E`` (default: the
    cells of ``rho_hat``).
    """
    E = rho_hat.set if E is None else E
    pressure = float(np.log(lambda_hat))
    mean_phi = integrate(mu_hat, w)
    entropy = pressure - mean_phi
    lyap = integrate(mu_hat, log_spherical_derivative(f))
    lower = float(np.log(f.degree) - oscillation(w, E))
    notes = []
    if entropy < lower - tol:
        notes.append(f"entropy {entropy:.6g} is below the lower bound {lower:.6g}")
    if lyap > 0:
        dim = entropy / lyap
        if lyap < entropy / 2 - tol:
            notes.append(f"lyapunov {lyap:.6g} is below entropy/2 = {entropy / 2:.6g}")
    else:
        dim = None
        notes.append(f"lyapunov estimate {lyap:.6g} is not positive; dimension bound unavailable")
    for note in notes:
        log.warning(note)
    return ThermoReport(float(lambda_hat), pressure, mean_phi, entropy, lyap, lower, dim, notes)


@dataclass
class PressureConfig:
    """Numerical settings for one point of a pressure curve."""

    cells: EvaluationSet
    bracket_set: EvaluationSet
    depth: int = 16
    bracket_depth: int = 10
    atom_cap: int = DEFAULT_ATOM_CAP
    seed: int = 0
    power_tol: float = 1e-12
    workers: int = 1

    @classmethod
    def for_map(cls, f: RationalMap, cells: int = 4096, bracket_points: int = 64,
                seed: int = 0, **kw) -> "PressureConfig":
        return cls(julia_sample(f, 24, cells, seed), julia_sample(f, 24, bracket_points, seed + 1),
                   seed=seed, **kw)


@dataclass(frozen=True)
class PressurePoint:
    t: float
    pressure: float
    dP_fd: float
    dP_measure: float
    lambda_lo: float
    lambda_hi: float


def pressure_at(f: RationalMap, w: Weight, psi: Weight, config: PressureConfig):
    """``(log lambda, <mu, psi>, bracket)`` for the weight ``w``."""
    A = build_ulam(f, w, config.cells, workers=config.workers)
    power = power_iteration(A, tol=config.power_tol)
    mu = sample_equilibrium(f, w, None, config.depth, power.lambda_hat, power.rho,
                            config.atom_cap, config.seed)
    states = lambda_bracket(f, w, config.bracket_set, config.bracket_depth,
                            workers=config.workers)
    return float(np.log(power.lambda_hat)), integrate(mu, psi), states[-1]


def pressure_curve(f: RationalMap, phi: Weight, psi: Weight, t_values,
                   config: PressureConfig) -> list[PressurePoint]:
    """``P(t) = log lambda(phi + t psi)`` with finite-difference and measure derivatives.

    Values of ``t`` with an inadmissible weight are dropped with a warning.
    ``dP_fd`` is a central difference over the neighbouring kept values and is
    ``nan`` at the two ends.
    """
    ts = []
    for t in sorted(float(t) for t in t_values):
        if admissible(phi + t * psi, f.degree, config.cells):
            ts.append(t)
        else:
            log.warning("dropping t = %g: weight is not admissible", t)
    if len(ts) < 3:
        raise ValueError("at least three admissible t values are needed")

    def run(t):
        return pressure_at(f, phi + t * psi, psi, config)

    results = map_chunks(run, ts, config.workers)
    out = []
    for i, (t, (P, dmu, last)) in enumerate(zip(ts, results)):
        if 0 < i < len(ts) - 1:
            fd = (results[i + 1][0] - results[i - 1][0]) / (ts[i + 1] - ts[i - 1])
        else:
            fd = float("nan")
        out.append(PressurePoint(t, P, fd, dmu, last.lambda_lo, last.lambda_hi))
    return out


PRESSURE_HEADER = ["t", "pressure", "dP_fd", "dP_measure", "lambda_lo", "lambda_hi"]


def write_pressure_csv(points: list[PressurePoint], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PRESSURE_HEADER)
        for p in points:
            writer.writerow([f"{v:.17g}" for v in
                             (p.t, p.pressure, p.dP_fd, p.dP_measure, p.lambda_lo, p.lambda_hi)])


def second_differences(points: list[PressurePoint]):
    """Discrete second derivative of ``P`` on a possibly uneven grid."""
    t = np.array([p.t for p in points])
    P = np.array([p.pressure for p in points])
    left = (P[1:-1] - P[:-2]) / (t[1:-1] - t[:-2])
    right = (P[2:] - P[1:-1]) / (t[2:] - t[1:-1])
    return 2 * (right - left) / (t[2:] - t[:-2])


def _orbit(f: RationalMap, Z, n: int):
    if n < 0:
        raise ValueError("time lag must be nonnegative")
    return f.iterate(Z, n) if n else Z


def correlation(f: RationalMap, mu: EmpiricalMeasure, g, l, n: int) -> float:
    """``<mu, g (l o f^n)> - <mu, g><mu, l>`` computed on the atoms."""
    Z = mu.coords
    m = mu.masses / mu.total_mass
    gv, lv = g(Z), l(_orbit(f, Z, n))
    return float(np.sum(m * gv * lv) - np.sum(m * gv) * np.sum(m * l(Z)))


def triple_correlation(f: RationalMap, mu: EmpiricalMeasure, g0, g1, g2, n1: int, n2: int) -> float:
    """``<mu, g0 (g1 o f^n1)(g2 o f^n2)> - <mu, g0><mu, g1><mu, g2>``."""
    Z = mu.coords
    m = mu.masses / mu.total_mass
    joint = g0(Z) * g1(_orbit(f, Z, n1)) * g2(_orbit(f, Z, n2))
    product = np.sum(m * g0(Z)) * np.sum(m * g1(Z)) * np.sum(m * g2(Z))
    return float(np.sum(m * joint) - product)


def l2_contraction_check(f: RationalMap, w: Weight, lambda_hat: float, m_hat: EmpiricalMeasure,
                         dictionary) -> float:
    """Largest ``|L g|_{L2(m)} / |g|_{L2(m)}`` over the dictionary.

    The theoretical ceiling is ``lambda e^{osc(w) / 2}``.
    """
    dictionary = list(dictionary)
    if not dictionary:
        raise ValueError("dictionary must be nonempty")
    Z = m_hat.coords
    m = m_hat.masses / m_hat.total_mass
    best = 0.0
    for g in dictionary:
        norm_g = np.sqrt(np.sum(m * np.abs(g(Z)) ** 2))
        if norm_g == 0:
            continue
        norm_Lg = np.sqrt(np.sum(m * np.abs(apply_exact(f, w, g, Z)) ** 2))
        best = max(best, float(norm_Lg / norm_g))
    return best


def pressure(f: RationalMap, w: Weight, cells: EvaluationSet, tol: float = 1e-12) -> float:
    """``log lambda`` from power iteration on the Ulam matrix over ``cells``."""
    return float(np.log(power_iteration(build_ulam(f, w, cells), tol=tol).lambda_hat))

