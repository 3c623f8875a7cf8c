"""Magnitude pruning: zero the smallest-magnitude fraction of a model's parameters.

Ranking is global across all named parameter arrays (biases included), not
per layer. Exactly floor(fraction * total) positions are zeroed; ties on
absolute value are broken by ascending (array name, flat index). Pruned
positions keep their slots, so parameter counts are unchanged and sparsity is
reported separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BagkitError
from .predictor import Model

__all__ = ["PruneSpec", "prune_magnitude", "sparsity"]


@dataclass(frozen=True)
class PruneSpec:
    """Fraction of parameters to zero, in [0, 1]."""

    fraction: float

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise BagkitError(f"prune fraction must be in [0, 1], got {self.fraction}")


def zero_smallest(arrays: dict[str, np.ndarray], fraction: float) -> dict[str, np.ndarray]:
    """Zero the k = floor(fraction * total) smallest-|value| entries across arrays.

    Entries are ranked by absolute value with ties broken by ascending
    (array name, flat index); returns fresh arrays, inputs untouched.
    """
    names = sorted(arrays)
    sizes = [arrays[name].shape[0] for name in names]
    total = sum(sizes)
    k = math.floor(fraction * total)
    out = {name: arrays[name].copy() for name in names}
    if k == 0:
        return out

    flat_abs = np.concatenate([np.abs(out[name]) for name in names])
    # Stable sort on |value|: equal magnitudes keep concatenation order,
    # which is exactly ascending (name, index).
    victims = np.argsort(flat_abs, kind="stable")[:k]

    offsets = np.cumsum([0] + sizes)
    for name, lo, hi in zip(names, offsets[:-1], offsets[1:]):
        local = victims[(victims >= lo) & (victims < hi)] - lo
        out[name][local] = 0.0
    return out


def prune_magnitude(model: Model, spec: PruneSpec) -> Model:
    """Return a new model with the smallest-magnitude fraction of parameters zeroed."""
    pruned = zero_smallest(model.params, spec.fraction)
    return Model(
        spec=model.spec,
        hyper=model.hyper,
        num_classes=model.num_classes,
        params=pruned,
    )


def sparsity(model: Model) -> float:
    """Fraction of parameter positions exactly equal to zero."""
    total = sum(arr.shape[0] for arr in model.params.values())
    zeros = sum(int(np.count_nonzero(arr == 0.0)) for arr in model.params.values())
    return zeros / total
