"""Desk-scale coarse geometry of finitely generated groups.

Build Cayley balls with normal-form oracles, measure hyperbolicity and
quasi-convexity constants, cone off families of subgraphs, verify factor
systems and the axioms of hierarchically hyperbolic structures, test
(hierarchically) hyperbolically embedded subgroups, absorb their structures
into an ambient structure, and check the combination hypotheses for graphs
of groups.
"""

__version__ = "0.1.0"
