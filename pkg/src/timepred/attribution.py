"""Relevance attribution for the time predictor.

Explains why a sample's predicted index y = f(x) deviates from a reference
value (0.5 by default, the expected output on change-free data) by
decomposing y - reference over input dimensions.

The propagation applies the epsilon rule layer by layer: each unit's
relevance is split over its inputs in proportion to their contribution
a_i * w_ij to the pre-activation z_j, with the bias share collected in an
explicit bucket rather than redistributed.  The reference is folded into the
output bias, so with epsilon = 0 input relevance plus the bias bucket equals
y - reference exactly, and a purely linear model yields w_i * x~_i per input.
Relevances are index-aligned with the original feature dimensions; the
standardizer's per-dimension scaling is folded into the input activations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidRangeError, ShapeMismatchError
from .model import TimePredictor, forward

DEFAULT_REFERENCE = 0.5

# Epsilon is applied relative to the mean absolute pre-activation of each
# layer so the stabilizer does not distort layers operating at small scales.
DEFAULT_EPSILON = 1e-6


@dataclass(frozen=True)
class AttributionMap:
    """Per-dimension relevance for one explained sample.

    ``relevance[i]`` is the share of ``explained_value`` attributed to input
    dimension i; ``bias_relevance`` is the share absorbed by bias terms
    (including the reference shift).  With epsilon = 0,
    ``relevance.sum() + bias_relevance == explained_value``.
    """

    relevance: np.ndarray
    explained_value: float
    reference: float
    bias_relevance: float


def _standardized_sample(model: TimePredictor, sample) -> np.ndarray:
    x = np.asarray(sample, dtype=np.float64).ravel()
    if x.shape[0] != model.input_dim:
        raise ShapeMismatchError(
            f"sample has {x.shape[0]} dimensions, model expects {model.input_dim}"
        )
    if not np.all(np.isfinite(x)):
        raise InvalidRangeError("sample contains NaN or Inf entries")
    return (x - model.input_mean) / model.input_std


def lrp_explain(model: TimePredictor, sample, reference: float = DEFAULT_REFERENCE,
                epsilon: float = DEFAULT_EPSILON) -> AttributionMap:
    """Epsilon-rule relevance propagation from y - reference down to the inputs."""
    if epsilon < 0:
        raise InvalidRangeError(f"epsilon must be >= 0, got {epsilon}")
    xs = _standardized_sample(model, sample)
    zs, acts = forward(model.weights, model.biases, xs[None, :])
    y = float(zs[-1][0, 0])
    explained = y - reference

    relevance = np.array([explained])
    bias_share = 0.0
    for l in range(model.n_weight_layers - 1, -1, -1):
        z = zs[l][0].copy()
        b = model.biases[l].astype(np.float64, copy=True)
        if l == model.n_weight_layers - 1:
            # Fold the reference into the output bias: explain f(x) - reference.
            z = z - reference
            b = b - reference
        scale = float(np.mean(np.abs(z)))
        eps = epsilon * (scale if scale > 0 else 1.0)
        denom = z + eps * np.sign(z)
        ratio = np.divide(relevance, denom, out=np.zeros_like(relevance), where=denom != 0)
        bias_share += float(b @ ratio)
        relevance = acts[l][0] * (model.weights[l] @ ratio)

    return AttributionMap(
        relevance=relevance,
        explained_value=explained,
        reference=float(reference),
        bias_relevance=bias_share,
    )


def gradient_input_explain(model: TimePredictor, sample) -> AttributionMap:
    """Gradient-times-input attribution, a sanity baseline for the epsilon rule.

    ``relevance[i] = dy/dx~_i * x~_i`` on the standardized sample; for a
    purely linear model this coincides with :func:`lrp_explain` at epsilon=0
    and reference equal to the bias.  The explained value is the sum of the
    relevances (the first-order score), so conservation holds by construction.
    """
    xs = _standardized_sample(model, sample)
    zs, _ = forward(model.weights, model.biases, xs[None, :])
    y = float(zs[-1][0, 0])

    grad = np.ones(1)
    for l in range(model.n_weight_layers - 1, -1, -1):
        grad = model.weights[l] @ grad
        if l > 0:
            grad = grad * (zs[l - 1][0] > 0.0)
    relevance = grad * xs
    explained = float(relevance.sum())
    return AttributionMap(
        relevance=relevance,
        explained_value=explained,
        reference=y - explained,
        bias_relevance=0.0,
    )
