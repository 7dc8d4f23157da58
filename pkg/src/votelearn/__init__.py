"""Exact voting rules, synthetic elections, and set-input networks that learn voting rules."""
from ._accel import BACKEND
from .elections import (DirichletParams, ElectionSpec, PreferenceProfile, UtilityProfile, make_rng,
                        profile_from_utilities, sample_election, sample_utility_profile)
from .errors import (CapacityError, DegenerateWelfareError, DistributionDegeneracyError, InvalidParameterError,
                     NonFiniteError, ParseError, VoteLearnError)
from .rules import (KemenyResult, PairwiseMatrix, WinnerResult, copeland_winner, kemeny_brute_force, kemeny_exact,
                    maximin_winner, pairwise_matrix, positional_winner, rule_winner)
from .welfare import WelfareFunction, estimate_optimal_score_vector, oracle_winner, social_welfare, welfare_ratio

__version__ = "0.1.0"
