import numpy as np
import pytest

from stemmaplace.collation import Collation, load_collation
from stemmaplace.stemma import Stemma


@pytest.fixture(scope="session")
def balanced_tree():
    """21 nodes, 12 leaves, max pairwise distance 6 (leaf to leaf across
    the root): the shape used throughout the paired-count examples."""
    edges = [("R", "A"), ("R", "B")]
    for top in ("A", "B"):
        for i in (1, 2, 3):
            mid = f"{top}{i}"
            edges.append((top, mid))
            edges.append((mid, f"{mid}x"))
            edges.append((mid, f"{mid}y"))
    return Stemma(edges)


@pytest.fixture(scope="session")
def path_tree():
    """r -> a -> b chain: minimal backbone for hand-enumerated placement."""
    return Stemma([("r", "a"), ("a", "b")])


@pytest.fixture()
def tiny_collation():
    return Collation(
        witnesses=("W1", "W2", "W3"),
        rows=(
            ("cat", "cat", "cat"),
            ("dog", "doc", "dog"),
            ("sun", "sun", "son"),
            ("-", "ink", "ink"),
        ),
    )


@pytest.fixture()
def tiny_letter_collation(tiny_collation):
    from stemmaplace.collation import recode_letters

    return recode_letters(tiny_collation)


def random_tree(n_nodes, rng):
    """Uniform sequential attachment; independent of the library's own
    generator so generator bugs cannot hide from the property tests."""
    edges = []
    for i in range(1, n_nodes):
        parent = int(rng.integers(0, i))
        edges.append((f"v{parent}", f"v{i}"))
    return Stemma(edges)


@pytest.fixture(scope="session")
def rng_factory():
    def make(seed):
        return np.random.default_rng(seed)

    return make


@pytest.fixture(scope="session")
def demo_collation_text():
    return (
        "W1\tW2\tW3\n"
        "the\tthe\tthe\n"
        "cat\tcat\tbat\n"
        "sat\tsit\tsat\n"
    )


@pytest.fixture(scope="session")
def demo_collation(demo_collation_text):
    return load_collation(demo_collation_text)
