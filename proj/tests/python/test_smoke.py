import math

import numpy as np
import pytest

import tlvcore


def unit_rows(rng, shape):
    z = rng.normal(size=shape)
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def test_softmax():
    out = tlvcore.softmax([0.0, math.log(3.0)])
    np.testing.assert_allclose(out, [0.25, 0.75], atol=1e-12)
    sharp = tlvcore.softmax([1.0, 0.9], temp=0.05)
    assert sharp[0] == pytest.approx(1.0 / (1.0 + math.exp(-2.0)), abs=1e-12)


def test_l2_normalize_and_cosine():
    np.testing.assert_allclose(tlvcore.l2_normalize([3.0, 4.0]), [0.6, 0.8], atol=1e-12)
    assert tlvcore.cosine([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0, abs=1e-12)
    assert tlvcore.cosine([1.0, 2.0], [2.0, 4.0]) == pytest.approx(1.0, abs=1e-12)


def test_pair_infonce_floor_and_symmetry():
    z = unit_rows(np.random.default_rng(0), (1, 8))
    assert tlvcore.pair_infonce(z, z, 0.05) == 0.0
    a = unit_rows(np.random.default_rng(1), (5, 8))
    b = unit_rows(np.random.default_rng(2), (5, 8))
    assert tlvcore.pair_infonce(a, b, 0.1) == pytest.approx(
        tlvcore.pair_infonce(b, a, 0.1), abs=1e-12
    )
    with pytest.raises(ValueError):
        tlvcore.pair_infonce(a * 2.0, b, 0.1)


def test_condition_number():
    assert tlvcore.condition_number(np.diag([3.0, 1.0])) == pytest.approx(3.0, rel=1e-6)
    assert tlvcore.condition_number(np.eye(4)) == pytest.approx(1.0, rel=1e-6)


SMALL = {
    "dataset.classes": 2,
    "dataset.samples_per_cell": 10,
    "dataset.image_size": 8,
}

TINY_MODEL = {
    "model.dim": 8,
    "model.heads": 2,
    "model.t_layers": 1,
    "model.v_layers": 1,
    "model.l_layers": 1,
    "model.patch_size": 4,
    "model.uba_levels": 1,
    "model.uba_rank": 2,
    "train.epochs": 1,
    "train.batch_size": 8,
}


@pytest.fixture(scope="module")
def dataset():
    return tlvcore.Dataset.generate(SMALL, seed=5)


def test_dataset_counts_and_io(dataset, tmp_path_factory):
    counts = dataset.counts()
    assert counts == {"train": 32, "val": 4, "test": 4}
    root = tmp_path_factory.mktemp("ds")
    dataset.save(str(root))
    again = tlvcore.Dataset.load(str(root))
    assert again.counts() == counts
    t = dataset.triplet("train", 0)
    assert set(t) >= {"label", "sensor", "tactile", "vision", "tokens"}
    assert t["tactile"].ndim == 3
    with pytest.raises(ValueError):
        tlvcore.Dataset.generate({"dataset.classes": 0})


def test_model_roundtrip(dataset, tmp_path):
    model = tlvcore.Model(dataset, TINY_MODEL, seed=5)
    records = model.fit(dataset)
    assert len(records) == 4  # 32 rows / batch 8
    assert all(math.isfinite(r["l_total"]) for r in records)

    t = dataset.triplet("test", 0)
    z = model.embed_tactile(t["tactile"], t["sensor"])
    assert z.shape == (8,)
    assert np.linalg.norm(z) == pytest.approx(1.0, abs=1e-9)
    zv = model.embed_vision(t["vision"])
    assert np.linalg.norm(zv) == pytest.approx(1.0, abs=1e-9)

    rows = model.eval_rss(dataset)
    protocols = {r["protocol"] for r in rows}
    assert protocols == {"intra", "multi", "synergy"}
    assert all(0.0 <= r["accuracy"] <= 1.0 for r in rows)

    assert 0.0 < model.adapter_fraction() < 1.0

    path = tmp_path / "model.tlvc"
    model.save(str(path))
    loaded = tlvcore.Model.load(str(path))
    z2 = loaded.embed_tactile(t["tactile"], t["sensor"])
    np.testing.assert_array_equal(z, z2)
    assert loaded.epoch() == model.epoch()
    assert loaded.step() == model.step()


def test_grad_check():
    assert tlvcore.grad_check(seeds=2) < 1e-4
