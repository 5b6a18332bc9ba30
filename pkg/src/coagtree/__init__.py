"""Smoluchowski coagulation by exponential binary-tree series.

Submodules:

* :mod:`coagtree.trees`     -- rooted planar binary trees as level word-codes
* :mod:`coagtree.series`    -- exact exponential tree series and branching matrices
* :mod:`coagtree.spectral`  -- FFT realisation of the coagulation star product
* :mod:`coagtree.solver`    -- order-N time stepping over non-planar trees
* :mod:`coagtree.exact`     -- closed-form and characteristics oracles
* :mod:`coagtree.cli`       -- command line front end
"""

__version__ = "0.1.0"

from coagtree.trees import (  # noqa: F401
    LEAF,
    Tree,
    TreeTriple,
    Forest,
    parse_word_code,
    graft,
    split_root,
    weight,
    branch,
    enumerate_planar,
    enumerate_nonplanar,
    canonical_nonplanar,
    symmetry_count,
)
