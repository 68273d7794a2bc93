"""Monte Carlo and exact tools for bond percolation on nonunimodular transitive graphs."""
from .graph import (ORIGIN, EdgeKey, EdgeKind, Family, GraphSpec, MalformedInputError, SiteId,
                    SlabWindow, TreeVertex, descendant_fiber_representative, height_between,
                    modular, neighbors, origin, same_height_target)
from .sampler import (BatchResult, ClusterView, SampleCtx, edge_uniform, explore_batch,
                      explore_fiber_intersection, explore_slab)

__version__ = "0.1.0"
