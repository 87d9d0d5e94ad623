import pytest

from cfiwb.cfi import TwistAssignment, build, strip_labels
from cfiwb.graphs import catalog_graph


def make(gname: str, variant: str, m: int, terms: dict | None = None, strip_seed: int | None = None):
    g = catalog_graph(gname)
    lam = TwistAssignment.from_terms(g, m, terms or {})
    s = build(variant, g, m, lam)
    return strip_labels(s, strip_seed) if strip_seed is not None else s


@pytest.fixture
def k4():
    return catalog_graph("k4")
