"""Trainable classifiers over hashed bag-of-n-gram features.

Two built-in learners share one parameter layout and training loop:

* logistic regression (``hidden_size == 0``): a single linear layer;
* one-hidden-layer MLP (``hidden_size > 0``): tanh hidden layer, linear output.

Text is tokenized by whitespace, word n-grams up to ``ngram_max`` are hashed
into a power-of-two feature space with a stable keyed hash (text_a and text_b
get distinct field salts), and counts are used as-is. Training is plain
mini-batch gradient descent on softmax cross-entropy with an L2 penalty on
weight matrices (biases are not penalized). Everything is derived from the
hyperparameter seed, so a fit is bit-reproducible.

Parameters live in named flat float64 arrays. A flat index maps to the 2-D
weight position row-major: ``out_weight[k]`` is row ``k // C``, column
``k % C`` of the (inputs x classes) matrix. Layer order for initialization
and serialization is hidden_weight, hidden_bias, out_weight, out_bias.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .dataset import Dataset, Example
from .errors import BagkitError, DataError, TrainingDiverged

__all__ = [
    "FeatureSpec",
    "Hyperparams",
    "Model",
    "featurize",
    "initialize",
    "fit",
    "predict_proba",
    "predict_proba_dataset",
    "training_loss",
    "param_count",
    "save_model",
    "load_model",
]

_BATCH_SIZE = 32
_FIELD_SEP = "\x1f"
_MODEL_FORMAT = "bagkit-model-v1"


@dataclass(frozen=True)
class FeatureSpec:
    """Hashed feature space: size (power of two), n-gram order, case folding."""

    dims: int = 32768
    ngram_max: int = 1
    lowercase: bool = True

    def __post_init__(self):
        if self.dims < 2 or self.dims & (self.dims - 1) != 0:
            raise DataError(f"feature dims must be a power of two >= 2, got {self.dims}")
        if not 1 <= self.ngram_max <= 3:
            raise DataError(f"ngram_max must be in [1, 3], got {self.ngram_max}")


@dataclass(frozen=True)
class Hyperparams:
    """Training knobs. hidden_size 0 selects logistic regression, > 0 the MLP."""

    learning_rate: float = 0.5
    epochs: int = 30
    l2: float = 1e-4
    hidden_size: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise DataError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise DataError(f"epochs must be >= 1, got {self.epochs}")
        if self.l2 < 0:
            raise DataError(f"l2 must be non-negative, got {self.l2}")
        if self.hidden_size < 0:
            raise DataError(f"hidden_size must be >= 0, got {self.hidden_size}")
        if not 0 <= self.seed < 2**64:
            raise DataError("seed must fit in 64 unsigned bits")


def _expected_shapes(spec: FeatureSpec, hidden_size: int, num_classes: int) -> dict[str, int]:
    """Flat length per named parameter array, in layer order."""
    if hidden_size == 0:
        return {"out_weight": spec.dims * num_classes, "out_bias": num_classes}
    return {
        "hidden_weight": spec.dims * hidden_size,
        "hidden_bias": hidden_size,
        "out_weight": hidden_size * num_classes,
        "out_bias": num_classes,
    }


@dataclass(frozen=True)
class Model:
    """A trained (or freshly initialized) predictor with named flat parameter arrays."""

    spec: FeatureSpec
    hyper: Hyperparams
    num_classes: int
    params: dict[str, np.ndarray]

    def __post_init__(self):
        expected = _expected_shapes(self.spec, self.hyper.hidden_size, self.num_classes)
        if set(self.params) != set(expected):
            raise BagkitError(
                f"parameter arrays {sorted(self.params)} do not match "
                f"expected {sorted(expected)}"
            )
        for name, length in expected.items():
            arr = np.array(self.params[name], dtype=np.float64).reshape(-1)
            if arr.shape[0] != length:
                raise BagkitError(f"parameter {name!r} has length {arr.shape[0]}, expected {length}")
            if not np.all(np.isfinite(arr)):
                raise BagkitError(f"parameter {name!r} contains non-finite values")
            arr.flags.writeable = False
            self.params[name] = arr


def _tokens(text: str, lowercase: bool) -> list[str]:
    return (text.lower() if lowercase else text).split()


def _hash_index(key: str, dims: int) -> int:
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") & (dims - 1)


def featurize(example: Example, spec: FeatureSpec) -> dict[int, int]:
    """Map an example to sparse hashed n-gram counts (feature index -> count)."""
    counts: dict[int, int] = {}
    for salt, text in (("a", example.text_a), ("b", example.text_b)):
        if not text:
            continue
        toks = _tokens(text, spec.lowercase)
        for n in range(1, spec.ngram_max + 1):
            for i in range(len(toks) - n + 1):
                key = salt + _FIELD_SEP + " ".join(toks[i : i + n])
                idx = _hash_index(key, spec.dims)
                counts[idx] = counts.get(idx, 0) + 1
    return counts


def _design_matrix(dataset: Dataset, spec: FeatureSpec) -> sp.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for ex in dataset.examples:
        row = featurize(ex, spec)
        for idx in sorted(row):
            indices.append(idx)
            data.append(float(row[idx]))
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.array(data), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
        shape=(len(dataset), spec.dims),
    )


def _init_params(
    spec: FeatureSpec, hyper: Hyperparams, num_classes: int, rng: np.random.Generator
) -> dict[str, np.ndarray]:
    params: dict[str, np.ndarray] = {}
    if hyper.hidden_size > 0:
        params["hidden_weight"] = rng.normal(
            0.0, 1.0 / np.sqrt(spec.dims), size=spec.dims * hyper.hidden_size
        )
        params["hidden_bias"] = np.zeros(hyper.hidden_size)
        params["out_weight"] = rng.normal(
            0.0, 1.0 / np.sqrt(hyper.hidden_size), size=hyper.hidden_size * num_classes
        )
    else:
        params["out_weight"] = rng.normal(
            0.0, 1.0 / np.sqrt(spec.dims), size=spec.dims * num_classes
        )
    params["out_bias"] = np.zeros(num_classes)
    return params


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=1, keepdims=True)


def _loss_and_grads(
    params: dict[str, np.ndarray],
    x: sp.csr_matrix,
    labels: np.ndarray,
    num_classes: int,
    hidden_size: int,
    l2: float,
    want_grads: bool = True,
) -> tuple[float, dict[str, np.ndarray] | None]:
    """Mean cross-entropy plus 0.5 * l2 * ||weights||^2, and its gradients.

    Feeds both the training loop and the finite-difference gradient check, so
    the analytic gradients here are exactly what training uses.
    """
    batch = x.shape[0]
    dims = x.shape[1]

    # Overflow is detected via the finite-loss check, not warnings.
    with np.errstate(all="ignore"):
        return _loss_and_grads_inner(
            params, x, labels, num_classes, hidden_size, l2, want_grads, batch, dims
        )


def _loss_and_grads_inner(params, x, labels, num_classes, hidden_size, l2, want_grads, batch, dims):
    if hidden_size > 0:
        w_h = params["hidden_weight"].reshape(dims, hidden_size)
        b_h = params["hidden_bias"]
        w_o = params["out_weight"].reshape(hidden_size, num_classes)
        hidden = np.tanh(x @ w_h + b_h)
        logits = hidden @ w_o + params["out_bias"]
    else:
        w_o = params["out_weight"].reshape(dims, num_classes)
        logits = x @ w_o + params["out_bias"]

    probs = _softmax(logits)
    eps = np.finfo(np.float64).tiny
    data_loss = -np.mean(np.log(probs[np.arange(batch), labels] + eps))
    reg_loss = 0.5 * l2 * sum(
        float(params[name] @ params[name])
        for name in params
        if name.endswith("weight")
    )
    loss = float(data_loss + reg_loss)
    if not want_grads:
        return loss, None

    d_logits = probs
    d_logits[np.arange(batch), labels] -= 1.0
    d_logits /= batch

    grads: dict[str, np.ndarray] = {}
    if hidden_size > 0:
        grads["out_weight"] = (hidden.T @ d_logits + l2 * w_o).ravel()
        grads["out_bias"] = d_logits.sum(axis=0)
        d_hidden = (d_logits @ w_o.T) * (1.0 - hidden * hidden)
        grads["hidden_weight"] = (x.T @ d_hidden + l2 * w_h).ravel()
        grads["hidden_bias"] = d_hidden.sum(axis=0)
    else:
        grads["out_weight"] = (x.T @ d_logits + l2 * w_o).ravel()
        grads["out_bias"] = d_logits.sum(axis=0)
    return loss, grads


def initialize(spec: FeatureSpec, hyper: Hyperparams, num_classes: int) -> Model:
    """The model fit() starts from: seeded random weights, zero biases."""
    rng = np.random.default_rng(hyper.seed)
    params = _init_params(spec, hyper, num_classes, rng)
    return Model(spec=spec, hyper=hyper, num_classes=num_classes, params=params)


def fit(train: Dataset, spec: FeatureSpec, hyper: Hyperparams) -> Model:
    """Train a classifier on a dataset; deterministic for fixed inputs.

    Mini-batch gradient descent over ``hyper.epochs`` passes, batch order
    reshuffled each epoch from the stream of ``hyper.seed``. Raises
    TrainingDiverged if the loss ever goes non-finite.
    """
    if len(train) == 0:
        raise DataError("cannot fit on an empty dataset")
    x_all = _design_matrix(train, spec)
    y_all = train.labels()
    n = len(train)

    rng = np.random.default_rng(hyper.seed)
    params = _init_params(spec, hyper, train.num_classes, rng)

    for epoch in range(hyper.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, _BATCH_SIZE):
            batch_idx = perm[start : start + _BATCH_SIZE]
            loss, grads = _loss_and_grads(
                params,
                x_all[batch_idx],
                y_all[batch_idx],
                train.num_classes,
                hyper.hidden_size,
                hyper.l2,
            )
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss {loss} at epoch {epoch}, batch offset {start} "
                    f"(learning_rate={hyper.learning_rate})"
                )
            for name, grad in grads.items():
                params[name] = params[name] - hyper.learning_rate * grad

    for name, arr in params.items():
        if not np.all(np.isfinite(arr)):
            raise TrainingDiverged(f"non-finite parameters in {name!r} after training")
    return Model(spec=spec, hyper=hyper, num_classes=train.num_classes, params=params)


def predict_proba(model: Model, example: Example) -> np.ndarray:
    """Class-probability vector (softmax output) for one example."""
    row = featurize(example, model.spec)
    indices = np.array(sorted(row), dtype=np.int64)
    data = np.array([float(row[i]) for i in sorted(row)])
    x = sp.csr_matrix(
        (data, indices, np.array([0, len(indices)], dtype=np.int64)),
        shape=(1, model.spec.dims),
    )
    return _forward_proba(model, x)[0]


def predict_proba_dataset(model: Model, dataset: Dataset) -> np.ndarray:
    """Probability matrix (num_examples x num_classes) for a whole dataset."""
    x = _design_matrix(dataset, model.spec)
    return _forward_proba(model, x)


def _forward_proba(model: Model, x: sp.csr_matrix) -> np.ndarray:
    hidden_size = model.hyper.hidden_size
    if hidden_size > 0:
        w_h = model.params["hidden_weight"].reshape(model.spec.dims, hidden_size)
        hidden = np.tanh(x @ w_h + model.params["hidden_bias"])
        logits = hidden @ model.params["out_weight"].reshape(hidden_size, model.num_classes)
    else:
        logits = x @ model.params["out_weight"].reshape(model.spec.dims, model.num_classes)
    return _softmax(logits + model.params["out_bias"])


def training_loss(model: Model, dataset: Dataset) -> float:
    """Full-dataset training objective (cross-entropy + L2 term) for a model."""
    x = _design_matrix(dataset, model.spec)
    loss, _ = _loss_and_grads(
        model.params,
        x,
        dataset.labels(),
        model.num_classes,
        model.hyper.hidden_size,
        model.hyper.l2,
        want_grads=False,
    )
    return loss


def param_count(model: Model) -> int:
    """Total number of parameter positions; zeroed values still count."""
    return sum(arr.shape[0] for arr in model.params.values())


def save_model(model: Model, path: str | Path) -> None:
    """Write a self-describing .npz container; round-trips predictions bit-exactly."""
    meta = {
        "format": _MODEL_FORMAT,
        "spec": {
            "dims": model.spec.dims,
            "ngram_max": model.spec.ngram_max,
            "lowercase": model.spec.lowercase,
        },
        "hyper": {
            "learning_rate": model.hyper.learning_rate,
            "epochs": model.hyper.epochs,
            "l2": model.hyper.l2,
            "hidden_size": model.hyper.hidden_size,
            "seed": model.hyper.seed,
        },
        "num_classes": model.num_classes,
        "param_order": sorted(model.params),
    }
    arrays = {f"param:{name}": model.params[name] for name in sorted(model.params)}
    np.savez(path, meta=np.array(json.dumps(meta)), **arrays)


def load_model(path: str | Path) -> Model:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"model file not found: {path}")
    with np.load(path, allow_pickle=False) as archive:
        try:
            meta = json.loads(str(archive["meta"][()]))
        except (KeyError, json.JSONDecodeError) as exc:
            raise DataError(f"{path}: not a model container: {exc}") from exc
        if meta.get("format") != _MODEL_FORMAT:
            raise DataError(f"{path}: unrecognized model format {meta.get('format')!r}")
        params = {name: np.array(archive[f"param:{name}"]) for name in meta["param_order"]}
    return Model(
        spec=FeatureSpec(**meta["spec"]),
        hyper=Hyperparams(**meta["hyper"]),
        num_classes=meta["num_classes"],
        params=params,
    )
