import pytest

from prisam import TableModel, Vocabulary


@pytest.fixture
def abc_vocab():
    return Vocabulary(["A", "B", "<eos>"])


@pytest.fixture
def m1(abc_vocab):
    """Three-token toy model, depth capped at 3 so every depth-2 prefix is
    forced to emit EOS by the length rule."""
    return TableModel(
        abc_vocab,
        3,
        {
            (): [0.6, 0.3, 0.1],
            (0,): [0.1, 0.2, 0.7],
            (1,): [0.5, 0.1, 0.4],
        },
    )
