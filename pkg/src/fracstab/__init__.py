"""Simulation and stabilizability certificates for nonlinear control systems
with Caputo fractional derivatives, a delayed gain and state-derivative
feedback."""
from .expr import evaluate, free_vars, parse, serialize
from .fracderiv import CaputoOrder, SampledFn, caputo_l1, caputo_l1_track, caputo_power_rule, empirical_order
from .matrix import eigenvalues, expm, invert, spectral_norm
from .model import SystemSpec, builtin_example, close_loop, dump_spec, load_spec, load_spec_file
from .sim import SimConfig, Trajectory, check_envelope, integrate, step_refinement_error
from .specfun import MLParams, gamma_fn, log_gamma, mittag_leffler, ml_exp_ratio
from .stability import (
    GronwallInstance, StabilityCertificate, certify, decay_envelope, estimate_M, estimate_M1,
    estimate_M2, gronwall_bound, perturbation_bound,
)

__version__ = "0.1.0"
