"""mastlab: a simulation and verification laboratory for maximum agreement
subtrees of random cladograms and recursive mass decompositions of
Brownian-excursion trees.

Modules
-------
cladogram   leaf-labelled unrooted binary trees: counting, sampling,
            induced subtrees, canonical forms, regions, Newick
mast        exact MAST: directed-edge-pair DP plus a brute-force oracle
randkit     seeded substreams and the Dirichlet/Beta toolbox
cascade     ternary mass cascades, zoom traces, good scales, BRW envelopes
excursion   discretised excursion trees, tree metric, diameter, the
            backbone gluing coupling and glued-tree regions
audit       mismatch/martingale audits, kernel and tail bounds, the
            explicit-constants ledger
harness     experiment configs, Monte Carlo orchestration, persistence
cli         the ``mastlab`` command line tool
"""

__version__ = "0.1.0"

from . import audit, cascade, cladogram, excursion, harness, mast, randkit

__all__ = [
    "audit",
    "cascade",
    "cladogram",
    "excursion",
    "harness",
    "mast",
    "randkit",
    "__version__",
]
