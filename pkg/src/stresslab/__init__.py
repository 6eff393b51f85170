"""Workbench for 14-item perceived-stress survey data.

Scores PSS-14 response sheets, derives stress / factor labels, generates
synthetic cohorts, trains from-scratch tree ensembles over repeated random
splits, and writes tabular plus figure reports.
"""

__version__ = "0.1.0"
