"""Desk-scale closed-loop optimization platform for cell-formation protocols.

A coordination broker, a workflow manager, a record store with tag-triggered
plugins, a multi-objective Bayesian optimizer, and a simulated coin-cell
laboratory, wired into one deterministic in-process loop (or served over
HTTP for the interactive UI).
"""

__version__ = "0.1.0"

from importlib import resources


def reference_campaign_path():
    """Path to the packaged measured-campaign table (warm-start fixture)."""
    return resources.files("formloop.data") / "reference_campaign.csv"
