from .appendix import concentration_check, gram_convergence, quadform_clt
from .harness import (ExperimentConfig, FluctuationSample, StickingSample, TrialRecord,
                      gamma_statistics, goe2_gap_mean, run_one, run_trials, sticking_distances)
from .hypotheses import H2Report, H3aReport, check_h2, check_h3a

__all__ = [
    "ExperimentConfig", "TrialRecord", "FluctuationSample", "StickingSample", "run_trials", "run_one",
    "gamma_statistics", "goe2_gap_mean", "sticking_distances", "check_h2", "check_h3a", "H2Report",
    "H3aReport", "quadform_clt", "concentration_check", "gram_convergence",
]
