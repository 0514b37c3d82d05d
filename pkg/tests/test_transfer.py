import numpy as np
import pytest

from ssvep_xfer.signal import default_filterbank
from ssvep_xfer.selection import SelectionConfig
from ssvep_xfer.transfer import (classify, combine_feature, fb_combine, features, fit_itrca,
                                 labels_from, predict)

FS = 250.0
BANK = default_filterbank(FS, 2)


@pytest.fixture(scope="module")
def split(small_dataset):
    data, _ = small_dataset
    target = data[0]
    return target[..., 1:], target[..., 0].copy(), data[1:]


def test_combine_feature_oracle():
    assert combine_feature(0.5, -0.4) == pytest.approx(0.25 - 0.16)
    assert combine_feature(0.0, 0.3) == pytest.approx(0.09)
    assert fb_combine([1.0, 2.0], [1.25, 0.5]) == pytest.approx(2.25)
    with pytest.raises(ValueError):
        fb_combine([1.0, 2.0], [1.0])


def test_trca_pipeline_has_zero_general_feature(split):
    train, test, _ = split
    model = fit_itrca(train, None, BANK, FS, algorithm="trca")
    fv = features(model, test)
    assert all(np.all(f.rho1 == 0) for f in fv)
    for f in fv:
        np.testing.assert_allclose(f.rho, np.sign(f.rho2) * f.rho2 ** 2)
        np.testing.assert_allclose(f.r, np.asarray(BANK.weights) @ f.rho)


def test_degeneration_identities(split):
    train, test, sources = split
    it = fit_itrca(train, sources, BANK, FS, algorithm="itrca")
    ss0 = fit_itrca(train, sources, BANK, FS, selection=SelectionConfig(c_lb=0.0))
    ss1 = fit_itrca(train, sources, BANK, FS, selection=SelectionConfig(c_lb=1.0))
    tr = fit_itrca(train, None, BANK, FS, algorithm="trca")
    np.testing.assert_array_equal(predict(ss0, test)[0], predict(it, test)[0])
    np.testing.assert_array_equal(predict(ss1, test)[0], predict(tr, test)[0])
    for a, b in zip(features(ss0, test), features(it, test)):
        np.testing.assert_array_equal(a.r, b.r)


def test_scale_invariance_and_determinism(split):
    train, test, sources = split
    model = fit_itrca(train, sources, BANK, FS)
    for trial in test:
        k, fv = classify(model, trial)
        k2, fv2 = classify(model, 3.7 * trial)
        assert k == k2 == classify(model, trial)[0]
        np.testing.assert_allclose(fv.rho1, fv2.rho1, atol=1e-9)
        np.testing.assert_allclose(fv.rho2, fv2.rho2, atol=1e-9)


def test_selection_reports_present(split):
    train, _, sources = split
    model = fit_itrca(train, sources, BANK, FS)
    for row in model.per_subband:
        for sm in row:
            assert sm.report is not None
            assert set(sm.source_ids) <= set(range(len(sources)))


def test_shared_selection(split):
    train, _, sources = split
    model = fit_itrca(train, sources, BANK, FS, selection=SelectionConfig(shared=True))
    first = [sm.source_ids for sm in model.per_subband[0]]
    for row in model.per_subband[1:]:
        assert [sm.source_ids for sm in row] == first


def test_ties_go_to_lowest_index():
    from ssvep_xfer.transfer import FeatureVector
    z = np.zeros((1, 3))
    fv = FeatureVector(z, z, z, np.array([0.2, 0.5, 0.5]))
    assert labels_from([fv])[0] == 1


def test_input_validation(split):
    train, test, sources = split
    with pytest.raises(ValueError):
        fit_itrca(train[..., :1], sources, BANK, FS)
    with pytest.raises(ValueError):
        fit_itrca(train, [sources[0][:, :3]], BANK, FS)
    model = fit_itrca(train, None, BANK, FS, algorithm="trca")
    with pytest.raises(ValueError):
        features(model, test[..., :-5])
