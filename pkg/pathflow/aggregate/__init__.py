"""
Patch-to-slide aggregation
"""

from pathflow.aggregate.slide_fusion import PatchPredictions, majority_vote, median_risk

__all__ = ['PatchPredictions', 'majority_vote', 'median_risk']
