"""Polynomial inequality solving by convex abstraction refinement."""

from .bench import (DuffingInstance, SofInstance, SwitchingInstance, char_poly_symbolic, discrete_lyapunov,
                    gen_duffing, gen_sof, gen_switching, routh_hurwitz)
from .convex import ConvexConstraint, feasible_point, is_nsd, is_psd, minimize_linear
from .engine import conv_solver, select_poly, solve
from .fileformat import ProblemFileError, parse_problem, write_problem
from .geometry import Box, Polytope, TemplateSet, box_difference, convex_hull_simplex, half_div, inscribed_box, volume
from .polynomial import Interval, Polynomial, Relaxation, interval_eval, lipschitz_bound, taylor_relax
from .problem import Config, ProblemF, Status, Verdict, check_model, rewrite_sense
from .refine import Classification, abst_refin
from .region_solver import RegionTask, branch_and_prune, export_smtlib, solve_parallel
from .smt import Link, PBRow, SmtProblem, sat_next, solve_problem, solve_smt, theory_check

__version__ = "0.1.0"
