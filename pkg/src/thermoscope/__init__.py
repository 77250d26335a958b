"""Transfer operators, equilibrium states and periodic points of rational maps of the sphere."""
from .sphere import (EvaluationSet, GridKind, SpherePoint, chordal_dist, from_affine, make_grid,
                     point_at_infinity, to_affine)
from .rational import (PreimageSet, RationalMap, assumption_a_report, critical_points, evaluate,
                       exceptional_points, preimages, spherical_derivative)
from .weights import Weight, admissible, birkhoff_sum, logq_norm_estimate, oscillation
from .transfer import (SampledFunction, TransferState, UlamOperator, apply_exact,
                       apply_normalized, build_ulam, iterate_exact, lambda_bracket,
                       power_iteration, rho_cesaro)
from .measures import (EmpiricalMeasure, conformality_defect, integrate, invariance_defect,
                       jacobian, julia_sample, moment_discrepancy, pushforward,
                       sample_conformal, sample_equilibrium)
from .thermo import (ThermoReport, correlation, l2_contraction_check, pressure_curve,
                     thermo_report, triple_correlation)
from .periodic import (PeriodicPoint, lyapunov_from_periodic, periodic_measure, periodic_points,
                       select_repelling_near_julia)
from .oracles import arcsine_moment, doubling_pressure_oracle, haar_circle_moment

__version__ = "0.1.0"
