"""Command-line batch driver.

Every subcommand reads one JSON config and writes its outputs into ``--out``.
Outputs are assembled in memory and written only after the whole pipeline
succeeded, so a failed run leaves no partial files behind.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from functools import cached_property

import numpy as np

from . import measures, periodic, thermo, transfer
from .config import ConfigError, RunConfig, load_config
from .rational import InvalidMapError, RootFindingError
from .sphere import to_affine_array
from .transfer import InadmissibleWeightError, TreeCapExceeded
from .weights import Weight, admissible, oscillation

log = logging.getLogger("thermoscope")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


def _clean(obj):
    """Replace non-finite floats by None and numpy scalars by Python ones."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])
    return buf.getvalue()


class Pipeline:
    """Lazily computed objects shared by the subcommands of one run."""

    def __init__(self, cfg: RunConfig, workers: int = 1):
        self.cfg = cfg
        self.workers = workers
        self.f = cfg.build_map()
        self.w = cfg.build_weight(self.f)
        self.seed = cfg.seed
        if not admissible(self.w, self.f.degree, self.evaluation_set):
            raise InadmissibleWeightError(
                f"oscillation {oscillation(self.w, self.evaluation_set):.4f} is not below "
                f"log d = {np.log(self.f.degree):.4f}")

    @cached_property
    def evaluation_set(self):
        g = self.cfg.grid
        return transfer.default_evaluation_set(self.f, g.uniform_size, g.julia_size, self.seed,
                                               g.julia_only, g.julia_depth)

    @cached_property
    def julia(self):
        g = self.cfg.grid
        return measures.julia_sample(self.f, g.julia_depth, g.cells, self.seed)

    @cached_property
    def bracket(self):
        tol = self.cfg.tolerances
        return transfer.lambda_bracket(self.f, self.w, self.evaluation_set, self.cfg.n.bracket,
                                       tol.tree_cap, tol.theta_cap, self.workers)

    @cached_property
    def ulam(self):
        return transfer.build_ulam(self.f, self.w, self.julia, self.workers)

    @cached_property
    def power(self):
        tol = self.cfg.tolerances
        res = transfer.power_iteration(self.ulam, tol.power, tol.power_max_iter)
        if not res.converged:
            raise ArithmeticError(f"power iteration did not converge (residual {res.residual:.3e})")
        return res

    @property
    def lambda_hat(self):
        return self.power.lambda_hat

    @cached_property
    def conformal(self):
        return measures.sample_conformal(self.f, self.w, None, self.cfg.n.measure, self.lambda_hat,
                                         self.cfg.atom_cap, self.seed)

    @cached_property
    def equilibrium(self):
        return measures.sample_equilibrium(self.f, self.w, None, self.cfg.n.measure,
                                           self.lambda_hat, self.power.rho, self.cfg.atom_cap,
                                           self.seed)

    @cached_property
    def dictionary(self):
        return measures.default_dictionary(self.w)

    # -- subcommands -------------------------------------------------------

    def lambda_outputs(self):
        states = self.bracket
        rows = [[s.n, s.rho_plus, s.rho_minus, s.theta, s.lambda_lo, s.lambda_hi] for s in states]
        summary = {
            "lambda_hat": transfer.point_estimate(states),
            "bracket": [states[-1].lambda_lo, states[-1].lambda_hi],
            "theta_sup": transfer.theta_sup(states),
            "n_max": len(states),
            "evaluation_set": {"size": len(self.evaluation_set),
                               "provenance": self.evaluation_set.provenance},
        }
        return {"bracket.csv": _csv(transfer.BRACKET_HEADER, rows),
                "lambda_summary.json": dumps(summary)}

    def rho_summary(self):
        ces = transfer.rho_cesaro(self.ulam, self.lambda_hat, self.cfg.n.cesaro)
        return {
            "lambda_hat": self.lambda_hat,
            "power_residual": self.power.residual,
            "power_iterations": self.power.iterations,
            "cesaro_terms": self.cfg.n.cesaro,
            "cesaro_defect": ces.defect,
            "cesaro_vs_power_sup": float(np.max(np.abs(ces.rho.values - self.power.rho.values))),
            "cells": len(self.julia),
            "skipped_cells": len(self.ulam.skipped),
        }

    def rho_outputs(self):
        values, inf = to_affine_array(self.julia.coords)
        rows = [[0.0 if i else float(v.real), 0.0 if i else float(v.imag), float(r)]
                for v, i, r in zip(values, inf, self.power.rho.values)]
        return {"rho.csv": _csv(["re", "im", "rho"], rows),
                "rho_summary.json": dumps(self.rho_summary())}

    def conformal_defects(self):
        m, mass = self.conformal
        return {"conformality_defect": measures.conformality_defect(
                    m, self.f, self.w, self.lambda_hat, self.dictionary),
                "invariance_defect": measures.invariance_defect(m, self.f, self.dictionary),
                "rho_at_start": mass, "atoms": len(m)}

    def equilibrium_defects(self):
        mu = self.equilibrium
        return {"invariance_defect": measures.invariance_defect(mu, self.f, self.dictionary),
                "support_distance": measures.support_distance(mu, self.julia),
                "support_tolerance": 10 * self.julia.mesh(), "atoms": len(mu)}

    def conformal_outputs(self):
        return {"conformal_measure.json": dumps(self.conformal[0].to_dict()),
                "conformal_defects.json": dumps(self.conformal_defects())}

    def equilibrium_outputs(self):
        return {"equilibrium_measure.json": dumps(self.equilibrium.to_dict()),
                "equilibrium_defects.json": dumps(self.equilibrium_defects())}

    def pressure_points(self):
        section = self.cfg.pressure
        if section is None:
            raise ConfigError("pressure-curve needs a 'pressure' section with psi and t_values")
        psi = Weight.from_dict(section.psi, self.f)
        config = thermo.PressureConfig(
            self.julia, self.evaluation_set, depth=self.cfg.n.measure,
            bracket_depth=self.cfg.n.bracket, atom_cap=self.cfg.atom_cap, seed=self.seed,
            power_tol=self.cfg.tolerances.power, workers=self.workers)
        return thermo.pressure_curve(self.f, self.w, psi, section.t_values, config)

    def pressure_outputs(self):
        rows = [[p.t, p.pressure, p.dP_fd, p.dP_measure, p.lambda_lo, p.lambda_hi]
                for p in self.pressure_points()]
        return {"pressure_curve.csv": _csv(thermo.PRESSURE_HEADER, rows)}

    def mixing_rows(self):
        g = measures.Mode(1, "re")
        rows = []
        for n in self.cfg.n.mixing:
            rows.append([int(n), thermo.correlation(self.f, self.equilibrium, g, g, n),
                         thermo.triple_correlation(self.f, self.equilibrium, g, g, g, n, 2 * n)])
        return rows

    def mixing_outputs(self):
        return {"mixing.csv": _csv(["n", "correlation", "triple_correlation"], self.mixing_rows())}

    @cached_property
    def periodic_selection(self):
        tol = self.cfg.tolerances
        n = self.cfg.n.periodic
        pts = periodic.periodic_points(self.f, n, tol.precision_bits, self.w, tol.degree_cap,
                                       self.seed, self.workers)
        return pts, periodic.select_repelling_near_julia(pts, self.julia)

    def periodic_summary(self):
        pts, selected = self.periodic_selection
        n = self.cfg.n.periodic
        mu_per = periodic.periodic_measure(self.f, self.w, self.lambda_hat, selected, n)
        disc = (measures.moment_discrepancy(mu_per.normalized_copy(), self.equilibrium,
                                            self.dictionary) if len(mu_per) else None)
        return {"period": n, "found": len(pts), "expected": pts.expected, "dropped": pts.dropped,
                "selected": len(selected), "unnormalized_mass": mu_per.total_mass,
                "moment_discrepancy": disc,
                "lyapunov": periodic.lyapunov_from_periodic(self.f, self.w, self.lambda_hat,
                                                            selected, n)}

    def periodic_outputs(self):
        pts, _ = self.periodic_selection
        return {"periodic.csv": periodic.periodic_csv(pts),
                "periodic_summary.json": dumps(self.periodic_summary())}

    def report_outputs(self):
        rep = thermo.thermo_report(self.f, self.w, self.lambda_hat, self.power.rho,
                                   self.equilibrium, tol=self.cfg.tolerances.entropy)
        states = self.bracket
        out = {
            "thermo": rep.to_dict(),
            "lambda": {"lambda_hat_bracket": transfer.point_estimate(states),
                       "bracket": [states[-1].lambda_lo, states[-1].lambda_hi],
                       "theta_sup": transfer.theta_sup(states),
                       "lambda_hat_ulam": self.lambda_hat},
            "rho": self.rho_summary(),
            "conformal": self.conformal_defects(),
            "equilibrium": self.equilibrium_defects(),
            "mixing": [{"n": r[0], "correlation": r[1], "triple_correlation": r[2]}
                       for r in self.mixing_rows()],
            "l2_ratio": thermo.l2_contraction_check(self.f, self.w, self.lambda_hat,
                                                    self.conformal[0], self.dictionary),
            "periodic": self.periodic_summary(),
        }
        if self.cfg.pressure is not None:
            out["pressure_curve"] = [p.__dict__ for p in self.pressure_points()]
        return {"report.json": dumps(out)}


SUBCOMMANDS = {
    "lambda": Pipeline.lambda_outputs,
    "rho": Pipeline.rho_outputs,
    "conformal": Pipeline.conformal_outputs,
    "equilibrium": Pipeline.equilibrium_outputs,
    "pressure-curve": Pipeline.pressure_outputs,
    "mixing": Pipeline.mixing_outputs,
    "periodic": Pipeline.periodic_outputs,
    "report": Pipeline.report_outputs,
}

NUMERICAL_ERRORS = (RootFindingError, TreeCapExceeded, periodic.DegreeCapExceeded,
                    ArithmeticError, MemoryError, FloatingPointError)
INVALID_ERRORS = (ConfigError, InvalidMapError, InadmissibleWeightError, ValueError, KeyError,
                  TypeError, OSError)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thermoscope",
                                     description="Transfer operators of rational maps.")
    parser.add_argument("command", choices=sorted(SUBCOMMANDS))
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--verbose", action="store_true")
    return parser


def run(command: str, cfg: RunConfig, workers: int = 1) -> dict[str, str]:
    """Execute a subcommand and return ``{filename: content}``."""
    prefix = cfg.outputs.get("prefix", "")
    files = SUBCOMMANDS[command](Pipeline(cfg, workers))
    return {prefix + name: text for name, text in files.items()}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s")
    log.setLevel(logging.INFO if args.verbose else logging.WARNING)
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        cfg = load_config(args.config)
        files = run(args.command, cfg, args.workers)
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except INVALID_ERRORS as exc:
        print(f"invalid input: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    os.makedirs(args.out, exist_ok=True)
    for name, text in files.items():
        with open(os.path.join(args.out, name), "w", newline="") as fh:
            fh.write(text)
    log.info("wrote %s", ", ".join(sorted(files)))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
