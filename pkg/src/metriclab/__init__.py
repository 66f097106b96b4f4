"""metriclab: a workbench for similarity-search indexing in high dimensions.

Metric domains with measure, concentration diagnostics, VC/uniform-convergence
machinery, pivot/tree/graph index structures with exactness oracles,
dimensionality reductions, and an adversarial lower-bound oracle for black-box
nearest-neighbor search.
"""

__version__ = "0.1.0"

from . import (  # noqa: F401
    adversary,
    concentration,
    domains,
    graphs,
    pivots,
    reduction,
    trees,
    vc,
)
