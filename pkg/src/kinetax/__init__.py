"""Kinetic model of income distribution under taxation, redistribution and tax evasion."""
from .dynamics import (EquilibriumReport, InitialSpec, IntegratorOptions, Trajectory,
                       equilibrium, integrate, make_initial, step)
from .errors import (BlowUpError, BracketError, ConfigError, DegenerateIncomeError,
                     DistributionError, InfeasibleIncomeError, InsufficientPointsError,
                     KinetaxError, ModelError, NotReachedError, SpanError)
from .model import (CoefficientSet, Distribution, ModelConfig, build_C, build_coefficients,
                    build_p, build_tax_schedule, build_theta, eval_rhs, mean_income)
from .observables import (ConvergenceSeries, LorenzCurve, PromotionProfile, class_delta,
                          convergence_norm, convergence_time, gini, lorenz, promotion_profile,
                          sign_changes, tail_exponent, tax_revenue)
from .sweep import (CoupledGrid, QGrid, SweepResult, SweepSpec, TauGrid, find_gini_minimum,
                    find_phase_threshold, middle_class_split_report, run_sweep)

__version__ = "0.1.0"
