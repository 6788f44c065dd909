"""Finite Markov chains with rewinding: optimal hitting times, policies, generators and oracles."""

from .brute import brute_opt_sets, solves_24, verify_minimizer
from .chain import ChainError, MarkovChain, load, sample_successor, save, transition_mass, validate
from .game24 import Game24State, gen_game24
from .generators import LbTreeObservations, gen_dummy, gen_lb_tree, gen_random, gen_vgb
from .oracles import (
    AdversarialOracle,
    ExactOracle,
    LaplaceOracle,
    MeanMedianParams,
    evaluate,
    evaluate_infinite_policy,
    mean_median,
)
from .policies import (
    ObservedTree,
    RunRecord,
    is_caterpillar,
    run_aux,
    run_cat,
    run_k_parallel,
    run_no_rewind,
    run_softmax_cat,
    run_stable,
)
from .solver import (
    HittingTimeTable,
    compute_aux_opt,
    compute_opt,
    compute_opt_dense,
    compute_opt_heap,
    recursion_residual,
)

__version__ = "0.1.0"
