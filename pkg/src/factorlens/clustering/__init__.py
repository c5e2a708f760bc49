"""Clustering of row principal coordinates: Ward trees and EII mixtures."""
from .mixture import (
    DegenerateFitError,
    GmmFit,
    ModelSelection,
    bic_value,
    fit_eii,
    n_free_params,
    select_model,
)
from .ward import Dendrogram, Merge, Partition, cut, ward_cluster

__all__ = [
    "DegenerateFitError",
    "Dendrogram",
    "GmmFit",
    "Merge",
    "ModelSelection",
    "Partition",
    "bic_value",
    "cut",
    "fit_eii",
    "n_free_params",
    "select_model",
    "ward_cluster",
]
