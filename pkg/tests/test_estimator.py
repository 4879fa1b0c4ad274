import pytest
from sklearn.base import clone

from ocgnet.data import load_manifest
from ocgnet.detection import PredictedBox
from ocgnet.errors import InvalidInputError
from ocgnet.estimator import ClickGeoLocalizer


class TestParams:
    def test_get_params_covers_constructor(self):
        est = ClickGeoLocalizer(batch_size=4, learning_rate=0.01)
        params = est.get_params()
        assert params["batch_size"] == 4
        assert params["learning_rate"] == 0.01
        assert params["model_size"] == "full"
        assert ClickGeoLocalizer(**params).get_params() == params

    def test_set_params_chains(self):
        est = ClickGeoLocalizer()
        out = est.set_params(epochs=3, seed=11)
        assert out is est
        assert est.epochs == 3 and est.seed == 11

    def test_unknown_param_rejected(self):
        with pytest.raises(InvalidInputError):
            ClickGeoLocalizer().set_params(momentum=0.9)

    def test_sklearn_clone_compatible(self):
        est = ClickGeoLocalizer(model_size="tiny", max_steps=7, sigma_drone=0.05)
        cloned = clone(est)
        assert cloned is not est
        assert cloned.get_params() == est.get_params()


@pytest.fixture(scope="module")
def fitted(fixture_corpus, tmp_path_factory):
    _, manifest = fixture_corpus
    est = ClickGeoLocalizer(
        model_size="tiny",
        batch_size=8,
        learning_rate=1e-3,
        epochs=2,
        max_steps=4,
        seed=0,
        query_size=(64, 64),
        satellite_size=(128, 128),
        work_dir=str(tmp_path_factory.mktemp("est")),
    )
    return est.fit(manifest), manifest


class TestFitPredictScore:
    def test_fit_sets_fitted_attributes(self, fitted):
        est, _ = fitted
        assert est.checkpoint_path_.exists()
        assert est.model_ is not None and est.anchors_ is not None

    def test_predict_one_box_per_sample_in_order(self, fitted):
        est, manifest = fitted
        samples, _ = load_manifest(manifest)
        preds = est.predict(manifest)
        assert len(preds) == len(samples)
        assert all(isinstance(p, PredictedBox) for p in preds)
        assert all(p.box.w > 0 and p.box.h > 0 for p in preds)

    def test_predict_accepts_sample_list(self, fitted, fixture_corpus):
        est, manifest = fitted
        root, _ = fixture_corpus
        samples, _ = load_manifest(manifest)
        import os

        cwd = os.getcwd()
        os.chdir(root)  # sample paths are relative to the corpus root
        try:
            preds = est.predict(samples[:3])
        finally:
            os.chdir(cwd)
        assert len(preds) == 3

    def test_score_fraction_range(self, fitted):
        est, manifest = fitted
        s = est.score(manifest)
        assert 0.0 <= s <= 1.0

    def test_predict_deterministic(self, fitted):
        est, manifest = fitted
        a = est.predict(manifest)
        b = est.predict(manifest)
        for p, q in zip(a, b):
            assert p.to_dict() == q.to_dict()


class TestErrors:
    def test_not_fitted(self, fixture_corpus):
        _, manifest = fixture_corpus
        est = ClickGeoLocalizer()
        with pytest.raises(InvalidInputError, match="not fitted"):
            est.predict(manifest)

    def test_bad_input_type(self, fitted):
        est, _ = fitted
        with pytest.raises(InvalidInputError):
            est.predict(42)
        with pytest.raises(InvalidInputError):
            est.predict([1, 2, 3])
