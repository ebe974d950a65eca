"""Reconstruct weighted contagion networks from infection times."""

from .diffusion import (Cascade, CascadeSet, Exponential, PowerLaw, Weibull, density,
                        generate_cascade_set, parse_model, perturb_times, read_cascades,
                        sample_delay, simulate_cascade, write_cascades)
from .estimator import NetworkInference
from .evaluation import EvalReport, PRPoint, break_even, mse, pr_sweep, precision_recall
from .graph import (Network, assign_uniform_weights, generate_erdos_renyi,
                    generate_preferential_attachment, read_network, weights_from_interactions,
                    write_network)
from .likelihood import (NodeSubproblem, build_subproblem, build_subproblems, gradient,
                         log_likelihood, objective)
from .solver import SolveReport, SolverError, SolverOptions, infer_network, minimize_box, solve_node

__version__ = "0.1.0"
