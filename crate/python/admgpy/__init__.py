"""Causal modelling with acyclic directed mixed graphs (ADMGs).

Thin Python layer over the Rust core: graphs, separation queries,
causal-effect identification, exact structure learning, linear-Gaussian
SEMs and gated models.
"""

from admgpy._rustlib import (
    GatedModel,
    Graph,
    Sem,
    emit_asp,
    identify,
    learn_graphs,
    sep_oracle,
    separated,
    separation_witness,
)

__all__ = [
    "GatedModel",
    "Graph",
    "Sem",
    "emit_asp",
    "identify",
    "learn_graphs",
    "sep_oracle",
    "separated",
    "separation_witness",
]
