import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from cfiwb.errors import UsageError
from cfiwb.estimators import CfiBuilder, IMEquivalence, WLRefiner, check_pairs, check_structures
from cfiwb.graphs import catalog_graph


@pytest.fixture(scope="module")
def structures():
    g = catalog_graph("k4")
    a = CfiBuilder(twist="e0=1").fit_transform([g])[0]
    b = CfiBuilder(twist="e5=1", strip=True, seed=2).fit_transform([g])[0]
    c = CfiBuilder().fit_transform(g)[0]
    return a, b, c


def test_builder(structures):
    a, b, c = structures
    assert a.n == 16 and b.provenance is None and c.provenance.twist == (0,) * 6
    with pytest.raises(UsageError):
        CfiBuilder(variant="middle").fit()
    with pytest.raises(UsageError):
        CfiBuilder(modulus=1).fit()


def test_params_and_clone():
    est = IMEquivalence(k=3, primes=(2, 3))
    assert est.get_params()["primes"] == (2, 3)
    twin = clone(est).set_params(k=2)
    assert twin.k == 2 and est.k == 3


def test_not_fitted(structures):
    with pytest.raises(NotFittedError):
        WLRefiner().predict([structures[:2]])


def test_wl_and_im_predictions(structures):
    a, b, c = structures
    assert WLRefiner(k=1).fit().predict([(a, c)]).tolist() == [True]
    colorings = WLRefiner(k=1).fit().transform([a, c])
    assert len(colorings) == 2
    est = IMEquivalence(k=2, primes=(2,)).fit()
    assert est.predict([(a, b), (a, c)]).tolist() == ["equivalent", "not_equivalent"]
    assert est.verdicts_[1].certificate["verified"]


def test_validation_helpers(structures):
    with pytest.raises(UsageError):
        check_structures([])
    with pytest.raises(UsageError):
        check_pairs([(structures[0],)])
    with pytest.raises(UsageError):
        IMEquivalence(k=1).fit()
    with pytest.raises(UsageError):
        WLRefiner(k=np.float64(2.0)).fit()
