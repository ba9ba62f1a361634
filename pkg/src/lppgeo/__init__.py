"""Exponential directed last passage percolation on Z^2.

Simulation library for passage-time fluctuations, geodesic geometry,
coalescence of finite and semi-infinite geodesics, boundary-point densities
and barrier-event experiments, with a reproducible counter-based random
environment.
"""

from .errors import (CapacityError, DomainError, InsufficientDataError,
                     LppError, NoPathError, OrderError, ParameterError)
from .field import (FieldKey, Rect, WeightField, dump_block_binary,
                    dump_block_csv, field, read_block_binary, uniform_to_weight)
from .core import (Constraint, Parallelogram, PassageSurface, Path, Region,
                   Vertex, backward_surface, brute_force_passage,
                   constrained_passage_time, forward_surface, geodesic,
                   passage_time, path_from_steps, precedes, trace_geodesic)

__version__ = "0.1.0"
