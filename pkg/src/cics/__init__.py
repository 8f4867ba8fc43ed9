"""Costly-information combinatorial selection: amortized Markov chains,
ex-ante relaxations, frugal and semi-online selection, committing policies."""

from .chains import GuardExceeded, InstanceError, MarkovChainTree, Mdp, Node
from .constraints import (
    AtLeastK,
    ExplicitFamily,
    Knapsack,
    KSystem,
    PartitionMatroid,
    SingleSelection,
    UniformMatroid,
)
from .distributions import DiscreteDist, normalize
from .policies import CicsInstance, GapReport, PolicyEvaluation

__version__ = "0.1.0"

__all__ = [
    "AtLeastK", "CicsInstance", "DiscreteDist", "ExplicitFamily", "GapReport", "GuardExceeded",
    "InstanceError", "KSystem", "Knapsack", "MarkovChainTree", "Mdp", "Node",
    "PartitionMatroid", "PolicyEvaluation", "SingleSelection", "UniformMatroid", "normalize",
]
