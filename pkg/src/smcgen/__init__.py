"""Sequential Monte Carlo genealogies and their Kingman-coalescent limit."""

from .core import (AncestryMatrix, MalformedInputError, Partition, RngStream, SizeError,
                   falling_factorial, make_rng, offspring_counts, weight_vector)
from .genealogy import (GenealogyPath, extract_genealogy, multiple_merger_bound,
                        pair_merger_rate, rescaled_block_counts, simulate_neutral_genealogy, tau)
from .kingman import block_count_marginal, simulate_kingman
from .models import (DiscreteHmm, bounded_potential_model, hmm_exact_likelihood, hmm_model,
                     neutral_model, parse_model, two_state_hmm)
from .resampling import Scheme, assign_slots, is_two_point_support, resample, resample_counts
from .smc import (ImmortalPath, SmcTrace, marginal_likelihood, run_csmc, run_smc)

__version__ = "0.1.0"
