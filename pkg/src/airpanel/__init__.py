"""Airline market-structure panel pipeline.

Builds carrier-market-period panels from itinerary-level ticket data,
computes subcontracting-overlap and market-contact metrics, constructs
weather- and network-based excluded variables, and estimates two-way
fixed-effects price regressions with a control-function correction.
"""

__version__ = "0.1.0"
