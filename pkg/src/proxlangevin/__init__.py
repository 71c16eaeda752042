"""Proximal gradient Langevin sampling with certified inexact proximal operators.

A numerical library and CLI for sampling from log-concave posteriors
exp(-F-G)/Z by a forward-backward Langevin scheme in which the backward
(proximal) step may be computed inexactly, with explicit accuracy
certificates based on duality gaps or inner-iteration budgets.
"""

__version__ = "0.1.0"
