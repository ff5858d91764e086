"""Learned WalkSAT-style stochastic local search for SAT."""
from .cnf import CnfFormula, count_satisfied, evaluate, parse_dimacs, write_dimacs
from .engine import SlsConfig, SlsOutcome, WalkSAT, run_sls
from .evaluator import EvalConfig, EvalReport, compare
from .evaluator import evaluate as evaluate_solver
from .generate import DistributionSpec, build_dataset, dpll_sat, gen_random_ksat, load_dataset, save_dataset
from .policy import PolicyParams, PolicyPicker, load_policy, save_policy
from .trainer import TrainConfig, TrainReport, train

__version__ = "0.1.0"
