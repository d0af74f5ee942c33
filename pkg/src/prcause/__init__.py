"""Exact probability-raising cause analysis for Markov decision processes."""
from .errors import InputError, MInvalid, NotACause
from .gpr import check_gpr_cause, emit_smt, parse_smt_output, refutation_search
from .model import INF, FiniteMemoryScheduler, Mdp, MrScheduler, load_model, parse_model
from .optimal import (
    fscore_optimal_cause_mc, gpr_threshold, optimal_gpr, optimal_spr_fscore,
    optimal_spr_ratio_recall, spr_fscore_threshold,
)
from .quality import QualityReport, quality_report
from .spr import (
    canonical_spr_cause, check_spr_cause, exists_pr_cause, singleton_spr_states, spr_condition_holds,
)
from .transforms import mec_quotient, normalize
from .witness import CauseVerdict

__version__ = "0.1.0"

__all__ = [
    "INF", "CauseVerdict", "FiniteMemoryScheduler", "InputError", "MInvalid", "Mdp", "MrScheduler",
    "NotACause", "QualityReport", "canonical_spr_cause", "check_gpr_cause", "check_spr_cause",
    "emit_smt", "exists_pr_cause", "fscore_optimal_cause_mc", "gpr_threshold", "load_model",
    "mec_quotient", "normalize", "optimal_gpr", "optimal_spr_fscore", "optimal_spr_ratio_recall",
    "parse_model", "parse_smt_output", "quality_report", "refutation_search", "singleton_spr_states",
    "spr_condition_holds", "spr_fscore_threshold",
]
