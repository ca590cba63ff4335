from .functional import (ModelSpec, ParisiParams, ParisiValue, Scheme, as_proportions,
                         check_monotone_q, covariance_factors, d_digest, functional,
                         increment_covariances, recursion_x0, replica_symmetric, y_levels, y_term)
from .optimize import (GroundStateFit, MinimizeOptions, MinimizeResult, Prediction, canonical_key,
                       default_nodes, free_energy_unconstrained, ground_state, leading_term,
                       maxcut_model, minimize, optimal_lambda, pad_levels, predict_maxcut, simplex_grid)

__all__ = [name for name in dir() if not name.startswith("_")]
