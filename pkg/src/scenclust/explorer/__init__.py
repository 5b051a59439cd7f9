from .gp import DEFAULT_HYPER_GRID, GPModel, fit_gp, se_kernel, standardize
from .loop import (ExplorationLog, LogEntry, StopReason, candidate_pool, explore, grid_explore,
                   minimize, thompson_next)
from .thompson import RandomFeatures, sample_posterior_function
