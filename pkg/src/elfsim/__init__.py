"""Compressed federated Langevin sampling: samplers, accounting, theory, CLI."""

from .compressors import KINDS, Compressor
from .ensemble import EnsembleResult, run_ensemble
from .federation import CommLedger, Message, closed_form_totals, cost_to_reach
from .metrics import (DivergenceReport, GaussianLaw, divergence_report,
                      empirical_moments, gaussian_fisher, gaussian_kl, gaussian_w2,
                      lmc_gaussian_propagation, lmc_gaussian_stationary,
                      pinsker_tv_bound, talagrand_w2_bound)
from .potentials import (FederatedPotential, GaussianTarget, LogisticClient,
                         MixtureClient, QuadraticClient, client_average, make_builtin)
from .runner import RunConfig, check_theory, run, sweep
from .samplers import (ALGORITHMS, DivergenceError, RoundDiagnostics, SamplerState,
                       belf_round, delf_round, init_state, lmc_round, pelf_round,
                       run_chain)
from .theory import (BidirectionalConstants, IterationBudget, OneSidedConstants,
                     bidirectional_constants, bidirectional_max_stepsize,
                     iteration_budget_bidirectional, iteration_budget_one_sided,
                     one_sided_constants, one_sided_max_stepsize)

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS", "KINDS", "Compressor", "CommLedger", "Message",
    "DivergenceError", "DivergenceReport", "EnsembleResult", "FederatedPotential",
    "GaussianLaw", "GaussianTarget", "IterationBudget", "LogisticClient",
    "MixtureClient", "OneSidedConstants", "BidirectionalConstants",
    "QuadraticClient", "RoundDiagnostics", "RunConfig", "SamplerState",
    "belf_round", "bidirectional_constants", "bidirectional_max_stepsize",
    "check_theory", "client_average", "closed_form_totals", "cost_to_reach",
    "delf_round", "divergence_report", "empirical_moments", "gaussian_fisher",
    "gaussian_kl", "gaussian_w2", "init_state", "iteration_budget_bidirectional",
    "iteration_budget_one_sided", "lmc_gaussian_propagation",
    "lmc_gaussian_stationary", "lmc_round", "make_builtin", "one_sided_constants",
    "one_sided_max_stepsize", "pelf_round", "pinsker_tv_bound", "run",
    "run_chain", "run_ensemble", "sweep", "talagrand_w2_bound",
]
