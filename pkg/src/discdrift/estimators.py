"""scikit-learn style wrappers around the state-space maps.

Both transformers act elementwise on arrays of states, so they can sit in a
``Pipeline`` in front of anything that prefers the transformed coordinates.
``fit`` ignores the data; it only builds the map from the parameters.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .drift import DriftSpec
from .lamperti import LampertiSpec
from .transform import build_transform


def _as_drift(drift):
    if isinstance(drift, DriftSpec):
        return drift
    if isinstance(drift, dict):
        return DriftSpec.from_dict(drift)
    if isinstance(drift, str):
        return DriftSpec.from_json(drift)
    raise TypeError(f"drift must be a DriftSpec, dict or JSON string, got {type(drift).__name__}")


class DriftTransformer(TransformerMixin, BaseEstimator):
    """Elementwise ``x -> G(x)`` for the drift's discontinuity-removing transform.

    Parameters
    ----------
    drift : DriftSpec or its dict or JSON form
        The drift, or its serialized form.

    Attributes
    ----------
    transform_ : TransformSpec
    half_width_ : float
    derivative_floor_ : float
    """

    def __init__(self, drift=None):
        self.drift = drift

    def fit(self, X=None, y=None):
        if self.drift is None:
            raise ValueError("drift is required")
        self.transform_ = build_transform(_as_drift(self.drift))
        self.half_width_ = self.transform_.half_width
        self.derivative_floor_ = self.transform_.derivative_floor
        return self

    def transform(self, X):
        check_is_fitted(self, "transform_")
        return np.asarray(self.transform_.g(np.asarray(X, dtype=float)))

    def inverse_transform(self, X):
        check_is_fitted(self, "transform_")
        return np.asarray(self.transform_.g_inverse(np.asarray(X, dtype=float)))


class LampertiTransformer(TransformerMixin, BaseEstimator):
    """Elementwise ``x -> phi(x) = int_0^x 1/sigma``.

    Parameters
    ----------
    sigma : DriftSpec or its dict or JSON form
        Positive diffusion coefficient as a piecewise polynomial.
    floor : float
        Required lower bound on ``sigma``.
    """

    def __init__(self, sigma=None, floor=1e-8):
        self.sigma = sigma
        self.floor = floor

    def fit(self, X=None, y=None):
        if self.sigma is None:
            raise ValueError("sigma is required")
        self.lamperti_ = LampertiSpec(_as_drift(self.sigma), floor=self.floor)
        return self

    def transform(self, X):
        check_is_fitted(self, "lamperti_")
        return np.asarray(self.lamperti_.phi(np.asarray(X, dtype=float)))

    def inverse_transform(self, X):
        check_is_fitted(self, "lamperti_")
        return np.asarray(self.lamperti_.phi_inverse(np.asarray(X, dtype=float)))
