"""scikit-learn style facade over the cell partition.

Fitting stores contact points ``X``, values ``y`` and outward normals;
``predict`` maps slopes to the index of the cell containing them.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .abp import abp_measure_exact
from .convexbody import ContactConfig
from .geom2d import cap_area_absolute
from .partition import build_cells, locate_first


class SubdifferentialPartition(BaseEstimator):
    def __init__(self, lam: float = 0.0, radius: float = 1.0):
        self.lam = lam
        self.radius = radius

    def fit(self, X, y, normals=None):
        if normals is None:
            raise ValueError("outward normals are required")
        self.config_ = ContactConfig(X, normals, y)
        self.partition_ = build_cells(self.config_)
        self.n_features_in_ = 2
        return self

    def predict(self, xi):
        xi = np.asarray(xi, dtype=float).reshape(-1, 2)
        return locate_first(self.config_, xi)

    def abp_measure(self) -> float:
        return abp_measure_exact(self.partition_, self.lam, self.radius).value

    def score(self, X=None, y=None) -> float:
        """Measure minus the area of ``{z in D_r : z_2 > lam}`` (non-negative in theory)."""
        return self.abp_measure() - cap_area_absolute(self.lam, self.radius)
