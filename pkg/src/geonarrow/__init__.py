"""Geometric Narrowing for batched bandits on nondegenerate losses."""

from ._accel import backend
from .environment import BatchedEnvironment, BudgetExhausted, RunRecord
from .gn import GNParams, LSParams, check_ls_covering, run_gn, run_gn_prime, run_gn_static, run_uniform_baseline
from .instances import NoiseSpec, NondegenerateInstance, audit_nondegeneracy, make_piecewise_interval_instance, make_power_instance
from .metric import Ball, MetricDomain, distance, initial_cover, refine_ball, round_pow2, set_diameter
from .scheduler import RRSchedule, StaticGrid, choose_M, rr_schedule, simple_schedule, static_grid

__version__ = "0.1.0"
