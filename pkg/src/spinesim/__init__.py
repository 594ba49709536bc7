"""Monte Carlo simulation of structured branching populations and their spine processes."""
from .auxiliary import sample_pi_t, simulate_auxiliary, simulate_tagged_cell
from .models import build_model, lambda_factor, mean_population, mean_population_mc
from .population import Caps, CapExceededError, lineage_of, population_snapshot, simulate_population
from .streams import Stream

__version__ = "0.1.0"

__all__ = [
    "Caps", "CapExceededError", "Stream", "build_model", "lambda_factor", "lineage_of",
    "mean_population", "mean_population_mc", "population_snapshot", "sample_pi_t",
    "simulate_auxiliary", "simulate_population", "simulate_tagged_cell",
]
