"""Weight functions on the sphere, their oscillation, and Birkhoff sums."""
from __future__ import annotations

import numpy as np

from .rational import RationalMap
from .sphere import EvaluationSet, SpherePoint, normalize

DEFAULT_Q = 3.0
DEFAULT_EPS = 1e-3
DEFAULT_CUTOFF = (0.2, 0.4)
ADMISSIBLE_MARGIN = 1e-6

KINDS = ("constant", "chart_harmonic", "angular", "log_deriv", "sum")


def smoothstep(u):
    """C^2 ramp from 0 (u <= 0) to 1 (u >= 1)."""
    u = np.clip(u, 0.0, 1.0)
    return u ** 3 * (10 - 15 * u + 6 * u * u)


class Weight:
    """A continuous real weight on the sphere.

    Use the constructors :meth:`constant`, :meth:`chart_harmonic`,
    :meth:`angular` and :meth:`log_deriv`; weights combine with ``+`` and
    scalar ``*``.  Calling a weight on an ``(N, 2)`` homogeneous array returns
    an ``(N,)`` array; calling it on a :class:`SpherePoint` returns a float.
    """

    def __init__(self, kind: str, params: dict, q: float = DEFAULT_Q):
        if kind not in KINDS:
            raise ValueError(f"unknown weight kind {kind!r}")
        if not q > 2:
            raise ValueError("regularity exponent q must exceed 2")
        self.kind = kind
        self.params = dict(params)
        self.q = float(q)
        self._osc_cache: dict[str, float] = {}

    # -- constructors -------------------------------------------------------

    @classmethod
    def constant(cls, c: float, q: float = DEFAULT_Q) -> "Weight":
        return cls("constant", {"c": float(c)}, q)

    @classmethod
    def chart_harmonic(cls, c: float, q: float = DEFAULT_Q) -> "Weight":
        """``c Re(z) / (1 + |z|^2)``, with values in ``[-c/2, c/2]``."""
        return cls("chart_harmonic", {"c": float(c)}, q)

    @classmethod
    def angular(cls, t: float, m: int = 1, cutoff=DEFAULT_CUTOFF, q: float = DEFAULT_Q) -> "Weight":
        """``t cos(m arg z)`` damped to zero near 0 and infinity.

        The damping factor is 0 within chordal distance ``cutoff[0]`` of
        ``{0, inf}`` and 1 beyond ``cutoff[1]``.
        """
        inner, outer = map(float, cutoff)
        if not 0 <= inner < outer:
            raise ValueError("cutoff must satisfy 0 <= inner < outer")
        return cls("angular", {"t": float(t), "m": int(m), "cutoff": (inner, outer)}, q)

    @classmethod
    def log_deriv(cls, t: float, f: RationalMap, eps: float = DEFAULT_EPS,
                  q: float = DEFAULT_Q) -> "Weight":
        """``t log max(|f'|_sphere, eps)``."""
        if eps <= 0:
            raise ValueError("eps must be positive")
        return cls("log_deriv", {"t": float(t), "eps": float(eps), "map": f}, q)

    # -- arithmetic ---------------------------------------------------------

    def _terms(self):
        if self.kind == "sum":
            return list(self.params["terms"]), self.params["offset"]
        if self.kind == "constant":
            return [], self.params["c"]
        return [(1.0, self)], 0.0

    def __add__(self, other):
        terms, offset = self._terms()
        if isinstance(other, Weight):
            more, off2 = other._terms()
            terms, offset = terms + more, offset + off2
        else:
            offset = offset + float(other)
        return Weight("sum", {"terms": terms, "offset": offset}, min(self.q, getattr(other, "q", self.q)))

    __radd__ = __add__

    def __mul__(self, s):
        s = float(s)
        if self.kind == "constant":
            return Weight.constant(s * self.params["c"], self.q)
        terms, offset = self._terms()
        return Weight("sum", {"terms": [(s * a, w) for a, w in terms], "offset": s * offset}, self.q)

    __rmul__ = __mul__

    # -- evaluation ---------------------------------------------------------

    def __call__(self, Z):
        if isinstance(Z, SpherePoint):
            return float(self._eval(Z.as_array())[0])
        Z = np.asarray(Z, dtype=complex)
        shape = Z.shape[:-1]
        return self._eval(Z.reshape(-1, 2)).reshape(shape)

    def _eval(self, Z):
        kind, p = self.kind, self.params
        if kind == "constant":
            return np.full(len(Z), p["c"])
        if kind == "sum":
            out = np.full(len(Z), p["offset"])
            for a, w in p["terms"]:
                out = out + a * w._eval(Z)
            return out
        Z = normalize(Z)
        if kind == "chart_harmonic":
            return p["c"] * (Z[:, 0] * np.conj(Z[:, 1])).real
        if kind == "angular":
            inner, outer = p["cutoff"]
            s = np.minimum(np.abs(Z[:, 0]), np.abs(Z[:, 1]))
            chi = smoothstep((s - inner) / (outer - inner))
            cos = np.cos(p["m"] * np.angle(Z[:, 0] * np.conj(Z[:, 1])))
            return p["t"] * chi * cos
        if kind == "log_deriv":
            deriv = p["map"].spherical_derivative_array(Z)
            return p["t"] * np.log(np.maximum(deriv, p["eps"]))
        raise AssertionError(kind)

    # -- serialisation ------------------------------------------------------

    def to_dict(self) -> dict:
        p = self.params
        if self.kind == "sum":
            return {"kind": "sum", "offset": p["offset"],
                    "terms": [{"coef": a, "weight": w.to_dict()} for a, w in p["terms"]]}
        if self.kind == "log_deriv":
            return {"kind": "log_deriv", "t": p["t"], "eps": p["eps"], "map": p["map"].to_dict()}
        if self.kind == "angular":
            return {"kind": "angular", "t": p["t"], "m": p["m"], "cutoff": list(p["cutoff"])}
        return {"kind": self.kind, **p}

    @classmethod
    def from_dict(cls, data: dict, f: RationalMap | None = None) -> "Weight":
        """Parse a weight description; ``log_deriv`` uses ``data['map']`` or else ``f``."""
        data = dict(data)
        kind = data.pop("kind", None)
        q = data.pop("q", DEFAULT_Q)
        allowed = {
            "constant": {"c"},
            "chart_harmonic": {"c"},
            "angular": {"t", "m", "cutoff"},
            "log_deriv": {"t", "eps", "map"},
            "sum": {"terms", "offset"},
        }
        if kind not in allowed:
            raise ValueError(f"unknown weight kind {kind!r}")
        unknown = set(data) - allowed[kind]
        if unknown:
            raise ValueError(f"unknown keys for {kind} weight: {sorted(unknown)}")
        if kind == "constant":
            return cls.constant(data["c"], q)
        if kind == "chart_harmonic":
            return cls.chart_harmonic(data["c"], q)
        if kind == "angular":
            return cls.angular(data["t"], data.get("m", 1), data.get("cutoff", DEFAULT_CUTOFF), q)
        if kind == "log_deriv":
            g = RationalMap.from_dict(data["map"]) if "map" in data else f
            if g is None:
                raise ValueError("log_deriv weight needs a map")
            return cls.log_deriv(data["t"], g, data.get("eps", DEFAULT_EPS), q)
        out = cls.constant(data.get("offset", 0.0), q)
        for term in data.get("terms", []):
            out = out + term.get("coef", 1.0) * cls.from_dict(term["weight"], f)
        return out

    def __repr__(self):
        if self.kind == "sum":
            inner = " + ".join(f"{a:g}*{w!r}" for a, w in self.params["terms"])
            return f"Weight({inner} + {self.params['offset']:g})"
        shown = {k: v for k, v in self.params.items() if k != "map"}
        return f"Weight.{self.kind}({shown})"


def oscillation(w: Weight, E: EvaluationSet) -> float:
    """``max w - min w`` over the evaluation set (a lower bound for the true oscillation)."""
    if len(E) == 0:
        raise ValueError("empty evaluation set")
    key = E.fingerprint()
    if key not in w._osc_cache:
        values = w(E.coords)
        w._osc_cache[key] = float(np.max(values) - np.min(values))
    return w._osc_cache[key]


def logq_norm_estimate(w: Weight, E: EvaluationSet, q: float | None = None,
                       max_pairs: int = 4_000_000, seed: int = 0) -> float:
    """Lower bound for ``sup |w(a) - w(b)| (1 + |log dist(a, b)|)^q`` over pairs of ``E``.

    All pairs are used when there are at most ``max_pairs`` of them; otherwise a
    seeded random subset together with every nearest-neighbour pair.
    """
    if len(E) == 0:
        raise ValueError("empty evaluation set")
    q = w.q if q is None else q
    Z = E.coords
    values = w(Z)
    n = len(Z)
    if n < 2:
        return 0.0

    def score(i, j):
        dist = np.abs(Z[i, 0] * Z[j, 1] - Z[i, 1] * Z[j, 0])
        dist = np.maximum(dist, 1e-300)
        return np.abs(values[i] - values[j]) * (1 + np.abs(np.log(dist))) ** q

    best = 0.0
    if n * (n - 1) // 2 <= max_pairs:
        for start in range(0, n, 512):
            i = np.arange(start, min(start + 512, n))[:, None]
            j = np.arange(n)[None, :]
            mask = j > i
            ii, jj = np.broadcast_arrays(i, j)
            if mask.any():
                best = max(best, float(np.max(score(ii[mask], jj[mask]))))
        return best
    _, nn = E.tree.query(E.tree.data, k=2)
    best = float(np.max(score(np.arange(n), nn[:, 1])))
    rng = np.random.default_rng(seed)
    i = rng.integers(0, n, max_pairs)
    j = rng.integers(0, n, max_pairs)
    keep = i != j
    return max(best, float(np.max(score(i[keep], j[keep]))))


def admissible(w: Weight, d: int, E: EvaluationSet, margin: float = ADMISSIBLE_MARGIN) -> bool:
    """Whether the measured oscillation is below ``log d`` with a safety margin."""
    return oscillation(w, E) < np.log(d) - margin


def birkhoff_sum(f: RationalMap, w: Weight, x, n: int):
    """``sum_{j<n} w(f^j(x))`` for a point or an array of homogeneous rows."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    scalar = isinstance(x, SpherePoint)
    Z = x.as_array() if scalar else np.asarray(x, dtype=complex).reshape(-1, 2)
    total = np.zeros(len(Z))
    for _ in range(n):
        total += w(Z)
        Z = f(Z)
    return float(total[0]) if scalar else total
