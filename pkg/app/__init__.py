"""
MVKTrans - multi-omics classification with knowledge transfer.

This package provides the sample-graph construction, graph-contrastive
pretraining, attention fusion and cross-omics distillation pipeline, on a
small numpy autodiff engine.
"""

__version__ = "1.0.0"
