import json

import pytest

from bagkit.dataset import Dataset, Example


def make_dataset(labels, num_classes=2, name="tiny", text=None):
    """Dataset with one distinct token per example (plus optional fixed text)."""
    examples = tuple(
        Example(id=f"{name}-{i}", text_a=text or f"tok{i} filler", label=lab)
        for i, lab in enumerate(labels)
    )
    return Dataset(name=name, examples=examples, num_classes=num_classes)


@pytest.fixture
def jsonl_file(tmp_path):
    def write(records, filename="data.jsonl"):
        path = tmp_path / filename
        path.write_text("\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8")
        return path

    return write


@pytest.fixture(scope="session")
def toy_workspace(tmp_path_factory):
    from bagkit.toy import write_toy_workspace

    return write_toy_workspace(tmp_path_factory.mktemp("toyws"))
