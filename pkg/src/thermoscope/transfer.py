"""The weighted transfer operator and its leading eigendata.

Two representations are used side by side.  Exact backward trees evaluate
``L^n g(y) = sum_{f^n x = y} exp(S_n phi(x)) g(x)`` with every preimage
computed, which is exact but costs ``d^n`` per point.  The Ulam matrix
collocates the operator at cell centres and assigns each preimage to its
nearest centre, giving a sparse nonnegative matrix suited to power iteration.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ._parallel import chunked, map_chunks
from .rational import RESIDUAL_TOL, RationalMap, RootFindingError, exceptional_points
from .sphere import EvaluationSet, GridKind, SpherePoint, make_grid
from .weights import Weight, admissible, oscillation

log = logging.getLogger(__name__)

DEFAULT_TREE_CAP = 2 ** 20
DEFAULT_THETA_CAP = 1e3
LEAF_BUDGET = 2 ** 20
ULAM_CHUNK = 4096
MAX_SKIPPED_FRACTION = 1e-3


class TreeCapExceeded(MemoryError):
    """A backward tree would exceed the configured number of leaves."""


class InadmissibleWeightError(ValueError):
    pass


@dataclass
class SampledFunction:
    """Function values attached to the points of an evaluation set."""

    values: np.ndarray
    set: EvaluationSet

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.set),):
            raise ValueError("values and evaluation set differ in length")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("sampled function has non-finite values")

    def at(self, Z):
        """Nearest-point lookup at homogeneous rows ``Z``."""
        Z = np.asarray(Z, dtype=complex)
        shape = Z.shape[:-1]
        return self.values[self.set.nearest(Z.reshape(-1, 2))].reshape(shape)

    def __call__(self, Z):
        return self.at(Z)


@dataclass(frozen=True)
class TransferState:
    n: int
    rho_plus: float
    rho_minus: float
    theta: float
    lambda_lo: float
    lambda_hi: float


# ---------------------------------------------------------------------------
# exact backward trees


def _as_rows(y):
    if isinstance(y, SpherePoint):
        return y.as_array()
    return np.asarray(y, dtype=complex).reshape(-1, 2)


def _preimages_checked(f: RationalMap, Z):
    roots, residuals = f.preimage_array(Z)
    if np.any(residuals > RESIDUAL_TOL):
        raise RootFindingError("preimage computation did not converge", residuals)
    return roots.reshape(-1, 2)


def _evaluate(g, Z):
    if g is None:
        return np.ones(len(Z))
    if np.isscalar(g):
        return np.full(len(Z), float(g))
    return np.asarray(g(Z), dtype=float)


def apply_exact(f: RationalMap, w: Weight, g, y):
    """``L g(y) = sum_{f(x) = y} e^{w(x)} g(x)`` with multiplicity.

    ``g`` is a callable on homogeneous arrays (``None`` means the constant 1);
    ``y`` is a point or an array of rows.
    """
    Y = _as_rows(y)
    X = _preimages_checked(f, Y)
    terms = np.exp(w(X)) * _evaluate(g, X)
    out = terms.reshape(len(Y), f.degree).sum(axis=1)
    return float(out[0]) if isinstance(y, SpherePoint) else out


def _tree_levels(f: RationalMap, w: Weight, Y, n: int):
    """Yield ``(level, leaves, log_weights)`` for levels ``1..n`` of the backward trees of ``Y``.

    Leaves of the tree rooted at ``Y[i]`` occupy the contiguous block
    ``i * d^k : (i + 1) * d^k`` at level ``k``.
    """
    Z = Y
    logw = np.zeros(len(Y))
    for level in range(1, n + 1):
        Z = _preimages_checked(f, Z)
        logw = np.repeat(logw, f.degree) + w(Z)
        yield level, Z, logw


def iterate_exact(f: RationalMap, w: Weight, g, y, n: int, tree_cap: int = DEFAULT_TREE_CAP):
    """``L^n g(y)`` summed over the full backward tree of depth ``n``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    Y = _as_rows(y)
    leaves = f.degree ** n
    if leaves > tree_cap:
        raise TreeCapExceeded(f"d^n = {leaves} exceeds tree_cap = {tree_cap}")
    if n == 0:
        out = _evaluate(g, Y)
    else:
        for _, Z, logw in _tree_levels(f, w, Y, n):
            pass
        out = (np.exp(logw) * _evaluate(g, Z)).reshape(len(Y), leaves).sum(axis=1)
    return float(out[0]) if isinstance(y, SpherePoint) else out


def transfer_powers(f: RationalMap, w: Weight, E: EvaluationSet, n_max: int,
                    tree_cap: int = DEFAULT_TREE_CAP, workers: int = 1):
    """Matrix ``ones[i, n - 1] = L^n 1(E_i)`` for ``n = 1..n_max``."""
    d = f.degree
    leaves = d ** n_max
    if leaves > tree_cap:
        raise TreeCapExceeded(f"d^n_max = {leaves} exceeds tree_cap = {tree_cap}")
    per_chunk = max(1, LEAF_BUDGET // leaves)

    def run(bounds):
        lo, hi = bounds
        block = np.empty((hi - lo, n_max))
        for level, _, logw in _tree_levels(f, w, E.coords[lo:hi], n_max):
            block[:, level - 1] = np.exp(logw).reshape(hi - lo, d ** level).sum(axis=1)
        return block

    blocks = map_chunks(run, chunked(len(E), per_chunk), workers)
    return np.vstack(blocks)


def lambda_bracket(f: RationalMap, w: Weight, E: EvaluationSet, n_max: int,
                   tree_cap: int = DEFAULT_TREE_CAP, theta_cap: float = DEFAULT_THETA_CAP,
                   workers: int = 1) -> list[TransferState]:
    """Brackets ``[(rho_n^-)^{1/n}, (rho_n^+)^{1/n}]`` for the scaling ratio, ``n = 1..n_max``.

    ``rho_n^+`` and ``rho_n^-`` are the max and min of ``L^n 1`` over ``E``.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    if not admissible(w, f.degree, E):
        raise InadmissibleWeightError(
            f"oscillation {oscillation(w, E):.4f} is not below log d = {np.log(f.degree):.4f}")
    ones = transfer_powers(f, w, E, n_max, tree_cap, workers)
    states = []
    for n in range(1, n_max + 1):
        hi = float(np.max(ones[:, n - 1]))
        lo = float(np.min(ones[:, n - 1]))
        theta = hi / lo
        if theta > theta_cap:
            log.warning("theta_%d = %.3g exceeds theta_cap = %.3g", n, theta, theta_cap)
        states.append(TransferState(n, hi, lo, theta, lo ** (1 / n), hi ** (1 / n)))
    return states


def point_estimate(states: list[TransferState]) -> float:
    """Geometric mean of the deepest bracket."""
    last = states[-1]
    return float(np.sqrt(last.lambda_lo * last.lambda_hi))


def theta_sup(states: list[TransferState]) -> float:
    return max(s.theta for s in states)


BRACKET_HEADER = ["n", "rho_plus", "rho_minus", "theta", "lambda_lo", "lambda_hi"]


def write_bracket_csv(states: list[TransferState], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BRACKET_HEADER)
        for s in states:
            writer.writerow([s.n] + [f"{v:.17g}" for v in
                                     (s.rho_plus, s.rho_minus, s.theta, s.lambda_lo, s.lambda_hi)])


# ---------------------------------------------------------------------------
# Ulam discretisation


@dataclass
class UlamOperator:
    """Sparse collocation of the transfer operator on a cell partition.

    ``matrix[i, j]`` sums ``e^{w(x)}`` over the preimages ``x`` of centre ``i``
    whose nearest centre is ``j``.
    """

    cells: EvaluationSet
    matrix: sp.csr_matrix
    skipped: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def __matmul__(self, x):
        return self.matrix @ x

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def columns(self) -> sp.csc_matrix:
        return self.matrix.tocsc()

    def row_sums(self):
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def to_coo_rows(self):
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return list(zip(coo.row[order].tolist(), coo.col[order].tolist(), coo.data[order].tolist()))

    def write_coo_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["row", "col", "value"])
            for i, j, v in self.to_coo_rows():
                writer.writerow([i, j, f"{v:.17g}"])

    @classmethod
    def read_coo_csv(cls, path, cells: EvaluationSet) -> "UlamOperator":
        rows, cols, vals = [], [], []
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                rows.append(int(rec["row"]))
                cols.append(int(rec["col"]))
                vals.append(float(rec["value"]))
        M = len(cells)
        return cls(cells, sp.csr_matrix((vals, (rows, cols)), shape=(M, M)))


def build_ulam(f: RationalMap, w: Weight, cells: EvaluationSet, workers: int = 1) -> UlamOperator:
    """Ulam matrix of ``L_w`` on the nearest-centre partition defined by ``cells``."""
    M = len(cells)
    d = f.degree

    def run(bounds):
        lo, hi = bounds
        roots, residuals = f.preimage_array(cells.coords[lo:hi])
        bad = np.any(residuals > RESIDUAL_TOL, axis=1)
        X = roots.reshape(-1, 2)
        vals = np.exp(w(X))
        cols = cells.nearest(X)
        rows = np.repeat(np.arange(lo, hi), d)
        keep = np.repeat(~bad, d)
        return rows[keep], cols[keep], vals[keep], np.flatnonzero(bad) + lo

    parts = map_chunks(run, chunked(M, ULAM_CHUNK), workers)
    skipped = np.concatenate([p[3] for p in parts])
    if len(skipped) > MAX_SKIPPED_FRACTION * M:
        raise RootFindingError(f"{len(skipped)} of {M} cells have unresolved preimages",
                               np.ones(len(skipped)))
    if len(skipped):
        log.warning("skipped %d cells with unresolved preimages", len(skipped))
    rows = np.concatenate([p[0] for p in parts])
    cols = np.concatenate([p[1] for p in parts])
    vals = np.concatenate([p[2] for p in parts])
    matrix = sp.csr_matrix((vals, (rows, cols)), shape=(M, M))
    matrix.sum_duplicates()
    return UlamOperator(cells, matrix, skipped)


@dataclass
class PowerResult:
    lambda_hat: float
    rho: SampledFunction
    residual: float
    converged: bool
    iterations: int


def power_iteration(A: UlamOperator, tol: float = 1e-12, max_iter: int = 20000) -> PowerResult:
    """Leading eigenpair of a nonnegative Ulam matrix.

    The eigenvector is normalised to mean one; the residual is
    ``|A rho - lambda rho|_inf / lambda``.  If ``max_iter`` is reached the last
    iterate is returned with ``converged=False``.
    """
    M = A.shape[0]
    x = np.ones(M)
    lam, res = np.nan, np.inf
    it = 0
    for it in range(1, max_iter + 1):
        y = A.matrix @ x
        lam = float(y.sum() / x.sum())
        if not lam > 0:
            raise ArithmeticError("power iteration collapsed to zero")
        res = float(np.max(np.abs(y - lam * x)) / lam)
        if res <= tol:
            break
        x = y / y.mean()
    converged = res <= tol
    if not converged:
        log.warning("power iteration stopped after %d steps, residual %.3e", it, res)
    return PowerResult(lam, SampledFunction(x, A.cells), res, converged, it)


@dataclass
class CesaroResult:
    rho: SampledFunction
    defect: float


def rho_cesaro(A: UlamOperator, lambda_hat: float, n_terms: int) -> CesaroResult:
    """Mean-normalised ``(1/n) sum_{j<n} lambda^{-j} A^j 1`` and its fixed-point defect."""
    if n_terms < 1:
        raise ValueError("n_terms must be at least 1")
    v = np.ones(A.shape[0])
    acc = np.zeros_like(v)
    for _ in range(n_terms):
        acc += v
        v = (A.matrix @ v) / lambda_hat
    rho = acc / n_terms
    rho = rho / rho.mean()
    defect = float(np.max(np.abs(A.matrix @ rho / lambda_hat - rho)))
    return CesaroResult(SampledFunction(rho, A.cells), defect)


def _check_positive(rho_hat: SampledFunction):
    if np.any(rho_hat.values <= 0):
        raise ValueError("rho_hat must be strictly positive")


def apply_normalized(f: RationalMap, w: Weight, lambda_hat: float, rho_hat: SampledFunction,
                     g) -> SampledFunction:
    """``L g = (lambda rho)^{-1} L(rho g)`` at the cell centres of ``rho_hat``.

    ``g`` is evaluated exactly at preimages; ``rho_hat`` is looked up at the
    nearest centre.
    """
    _check_positive(rho_hat)
    Y = rho_hat.set.coords
    X = _preimages_checked(f, Y)
    terms = np.exp(w(X)) * rho_hat.at(X) * _evaluate(g, X)
    Lg = terms.reshape(len(Y), f.degree).sum(axis=1)
    return SampledFunction(Lg / (lambda_hat * rho_hat.values), rho_hat.set)


def normalized_matrix(A: UlamOperator, lambda_hat: float, rho_hat: SampledFunction) -> sp.csr_matrix:
    """Discrete normalised operator ``D^{-1} A D / lambda`` with ``D = diag(rho)``."""
    _check_positive(rho_hat)
    D = sp.diags(rho_hat.values)
    Dinv = sp.diags(1 / rho_hat.values)
    return (Dinv @ A.matrix @ D / lambda_hat).tocsr()


# ---------------------------------------------------------------------------
# evaluation sets


def default_evaluation_set(f: RationalMap, uniform_size: int = 512, julia_size: int = 512,
                           seed: int = 0, julia_only: bool | None = None,
                           julia_depth: int = 24) -> EvaluationSet:
    """Uniform grid united with a Julia sample, or the Julia sample alone.

    ``julia_only=None`` restricts to the Julia sample when ``f`` has
    exceptional points (every polynomial does, at infinity).
    """
    from .measures import julia_sample

    julia = julia_sample(f, julia_depth, julia_size, seed)
    if julia_only is None:
        julia_only = bool(exceptional_points(f))
    if julia_only:
        return julia
    grid = make_grid(GridKind.UNIFORM_SPHERE, uniform_size, seed)
    return grid.union(julia, provenance=f"uniform({uniform_size})+julia({julia_size})")
