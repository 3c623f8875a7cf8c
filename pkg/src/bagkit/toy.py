"""Deterministic toy tasks and the bundled 5-config demo batch.

Texts are token soups: each example mixes tokens from its class's vocabulary
with shared filler tokens, and a slice of labels is flipped to inject noise.
Small enough that a full batch runs in seconds, structured enough that the
learners beat chance comfortably.

``python -m bagkit.toy OUTDIR`` materializes a ready-to-run workspace:
OUTDIR/data/<task>/{train,val,test}.jsonl + task.json and OUTDIR/configs.json
with five configurations covering the ensemble types.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

from .dataset import Dataset, Example
from .experiment import TaskData
from .ioutil import atomic_write_text

__all__ = ["synthetic_task", "noisy_binary_task", "write_toy_workspace", "TOY_TASKS"]


def _make_examples(
    rng: np.random.Generator,
    vocab_prefix: str,
    id_prefix: str,
    count: int,
    num_classes: int,
    noise: float,
    with_text_b: bool,
    tokens_per_text: int = 8,
    class_token_prob: float = 0.6,
    vocab_size: int = 24,
    filler_size: int = 40,
) -> list[Example]:
    class_vocab = [
        [f"{vocab_prefix}c{c}w{k}" for k in range(vocab_size)] for c in range(num_classes)
    ]
    filler = [f"{vocab_prefix}f{k}" for k in range(filler_size)]

    def text_for(c: int) -> str:
        toks = []
        for _ in range(tokens_per_text):
            if rng.random() < class_token_prob:
                toks.append(class_vocab[c][rng.integers(vocab_size)])
            else:
                toks.append(filler[rng.integers(filler_size)])
        return " ".join(toks)

    examples = []
    for i in range(count):
        true_class = int(rng.integers(num_classes))
        label = true_class
        if rng.random() < noise:
            label = int((true_class + 1 + rng.integers(num_classes - 1)) % num_classes)
        examples.append(
            Example(
                id=f"{id_prefix}-{i}",
                text_a=text_for(true_class),
                text_b=text_for(true_class) if with_text_b else None,
                label=label,
            )
        )
    return examples


def synthetic_task(
    name: str,
    seed: int,
    num_classes: int = 2,
    n_train: int = 240,
    n_val: int = 80,
    n_test: int = 80,
    noise: float = 0.1,
    with_text_b: bool = False,
    metric: str = "accuracy",
    vocab_size: int = 24,
    filler_size: int = 40,
) -> TaskData:
    """Generate one deterministic toy task."""
    rng = np.random.default_rng(seed)
    parts = {}
    for part, count in (("train", n_train), ("val", n_val), ("test", n_test)):
        examples = _make_examples(
            rng,
            name,
            f"{name}-{part}",
            count,
            num_classes,
            noise,
            with_text_b,
            vocab_size=vocab_size,
            filler_size=filler_size,
        )
        parts[part] = Dataset(name=name, examples=tuple(examples), num_classes=num_classes)
    return TaskData(train=parts["train"], val=parts["val"], test=parts["test"], metric=metric)


def noisy_binary_task(
    seed: int = 0,
    n_train: int = 1600,
    n_test: int = 400,
    noise: float = 0.20,
) -> TaskData:
    """High-label-noise binary task for the variance protocol.

    Plenty of training data (so resampling perturbs a fit only mildly) and a
    noisy label stream. Paired with briefly trained members, per-model
    stochasticity dominates the single-model spread, which is the regime the
    two-level protocol is built to expose.
    """
    return synthetic_task(
        "noisy2",
        seed=seed,
        num_classes=2,
        n_train=n_train,
        n_val=60,
        n_test=n_test,
        noise=noise,
    )


# Task name -> (seed, num_classes, noise, with_text_b, metric, label names).
TOY_TASKS = {
    "topics2": (11, 2, 0.10, False, "accuracy", ["no", "yes"]),
    "topics3": (22, 3, 0.10, False, "macro_f1", ["neutral", "entailment", "contradiction"]),
    "pairs2": (33, 2, 0.10, True, "accuracy", ["false", "true"]),
}


def _toy_configs() -> dict:
    logreg_1k = {"model_kind": "logreg", "feature_spec": {"dims": 1024}}
    tasks = sorted(TOY_TASKS)
    return {
        "configs": [
            {
                "config_id": "t1-single-logreg",
                "config_type": "single",
                "tasks": tasks,
                "base_seed": 2024,
                "members": [dict(logreg_1k)],
            },
            {
                "config_id": "t2-homo-bagged",
                "config_type": "homo",
                "tasks": tasks,
                "base_seed": 2024,
                "members": [dict(logreg_1k, bagged=True) for _ in range(3)],
            },
            {
                "config_id": "t3-homo-pruned",
                "config_type": "homo_pruned",
                "tasks": tasks,
                "base_seed": 2024,
                "members": [
                    dict(logreg_1k, bagged=True, prune_fraction=0.05) for _ in range(3)
                ],
            },
            {
                "config_id": "t4-same-family",
                "config_type": "hetero_same_family",
                "tasks": tasks,
                "base_seed": 2024,
                "members": [
                    {"model_kind": "logreg", "feature_spec": {"dims": 512}},
                    {"model_kind": "logreg", "feature_spec": {"dims": 2048}},
                ],
            },
            {
                "config_id": "t5-diff-family",
                "config_type": "hetero_diff_family",
                "tasks": tasks,
                "base_seed": 2024,
                "members": [
                    dict(logreg_1k),
                    {
                        "model_kind": "mlp",
                        "feature_spec": {"dims": 512},
                        "hyper_override": {
                            "learning_rate": 0.5,
                            "epochs": 40,
                            "l2": 1e-4,
                            "hidden_size": 8,
                            "seed": 0,
                        },
                    },
                ],
            },
        ]
    }


def _dump_jsonl(dataset: Dataset, label_names: list[str], path: Path) -> None:
    lines = []
    for ex in dataset.examples:
        record = {"id": ex.id, "text_a": ex.text_a, "label": label_names[ex.label]}
        if ex.text_b is not None:
            record["text_b"] = ex.text_b
        lines.append(json.dumps(record))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_toy_workspace(dest: str | Path) -> Path:
    """Materialize the toy data directory and 5-config batch file under dest."""
    dest = Path(dest)
    data_dir = dest / "data"
    for task, (seed, num_classes, noise, with_b, metric, label_names) in TOY_TASKS.items():
        task_data = synthetic_task(
            task,
            seed=seed,
            num_classes=num_classes,
            noise=noise,
            with_text_b=with_b,
            metric=metric,
        )
        task_dir = data_dir / task
        for part, dataset in (
            ("train", task_data.train),
            ("val", task_data.val),
            ("test", task_data.test),
        ):
            _dump_jsonl(dataset, label_names, task_dir / f"{part}.jsonl")
        meta = {
            "num_classes": num_classes,
            "label_map": {name: idx for idx, name in enumerate(label_names)},
            "metric": metric,
        }
        atomic_write_text(task_dir / "task.json", json.dumps(meta, indent=2) + "\n")

    atomic_write_text(dest / "configs.json", json.dumps(_toy_configs(), indent=2) + "\n")
    return dest


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print("usage: python -m bagkit.toy OUTDIR", file=sys.stderr)
        return 2
    dest = write_toy_workspace(argv[0])
    print(f"toy workspace written to {dest}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
