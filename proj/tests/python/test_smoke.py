import math

import numpy as np
import pytest

carl_lab = pytest.importorskip("carl_lab")


def finite_difference(fn, arrays, index, h=1e-6):
    base = [a.copy() for a in arrays]
    grad = np.zeros_like(base[index])
    flat = grad.reshape(-1)
    for k in range(flat.size):
        plus = [a.copy() for a in base]
        minus = [a.copy() for a in base]
        plus[index].reshape(-1)[k] += h
        minus[index].reshape(-1)[k] -= h
        flat[k] = (fn(*plus)[0] - fn(*minus)[0]) / (2 * h)
    return grad


def random_rows(rng, b, k):
    x = rng.random((b, k)) + 0.1
    return x / x.sum(axis=1, keepdims=True)


def test_kl_values():
    for k in (2, 3, 16):
        value, _ = carl_lab.kl_to_uniform(np.full(k, 1.0 / k))
        assert abs(value) < 1e-9
        one_hot = np.zeros(k)
        one_hot[0] = 1.0
        value, _ = carl_lab.kl_to_uniform(one_hot)
        assert abs(value - math.log(k)) < 1e-9


def test_consistency_matches_numpy():
    rng = np.random.default_rng(0)
    pa, pp = random_rows(rng, 4, 5), random_rows(rng, 4, 5)
    value, grads = carl_lab.consistency_loss(pa, pp)
    assert value == pytest.approx(-np.mean(np.log((pa * pp).sum(axis=1))), rel=1e-12)
    assert len(grads) == 2 and grads[0].shape == pa.shape


@pytest.mark.parametrize("seed", range(3))
def test_total_loss_gradient(seed):
    rng = np.random.default_rng(seed)
    pa, pp = random_rows(rng, 3, 4), random_rows(rng, 3, 4)

    def fn(a, b):
        return carl_lab.carl_total_loss(a, b, epoch=25)

    _, grads = fn(pa, pp)
    for i in range(2):
        np.testing.assert_allclose(grads[i], finite_difference(fn, [pa, pp], i), rtol=1e-5, atol=1e-7)


def test_infonce_gradient():
    rng = np.random.default_rng(4)
    a, p = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
    _, grads = carl_lab.infonce_loss(a, p, tau=0.5)
    np.testing.assert_allclose(
        grads[0], finite_difference(lambda x, y: carl_lab.infonce_loss(x, y, tau=0.5), [a, p], 0), rtol=1e-5, atol=1e-7
    )


def test_assign_rows_sum_to_one():
    rng = np.random.default_rng(1)
    p = carl_lab.assign(rng.normal(size=(5, 3)), rng.normal(size=(7, 3)), energy="raw")
    assert p.shape == (5, 7)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)


def test_schedules():
    assert [carl_lab.decay_weight(e) for e in (0, 50, 100, 150)] == [2.0, 1.5, 1.0, 1.0]
    assert carl_lab.cosine_learning_rate(0, 150, 0.6, 0.0006) == 0.6
    assert carl_lab.cosine_learning_rate(150, 150, 0.6, 0.0006) == 0.0006


def test_gradcheck_suite():
    worst = carl_lab.gradcheck(trials=2)
    assert worst and max(worst.values()) < 1e-4


def test_config_round_trip_and_errors():
    cfg = carl_lab.RunConfig()
    cfg["num_prototypes"] = "12"
    assert cfg["objective.num_prototypes"] == "12"
    again = carl_lab.RunConfig.parse(cfg.serialize())
    assert again.serialize() == cfg.serialize()
    with pytest.raises(carl_lab.ConfigError):
        carl_lab.RunConfig.parse("[trainer]\nbogus = 1\n")
    assert "trainer.epochs" in carl_lab.config_keys()


TINY = """[data]
num_classes = 3
per_class = 20
dim = 5
noise_std = 0.3
[model]
hidden_dims = 8
embedding_dim = 4
energy = raw
[objective]
num_prototypes = 6
[trainer]
epochs = 3
batch_size = 20
lr_start = 0.05
lr_end = 0.0005
[eval]
probe_epochs = 5
probe_seeds = 2
"""


def test_train_resume_and_evaluate(tmp_path):
    cfg = carl_lab.RunConfig.parse(TINY)
    seen = []
    full, records = carl_lab.train(cfg, on_epoch=seen.append)
    assert [r["epoch"] for r in records] == [0, 1, 2]
    assert len(seen) == 3
    for r in records:
        assert 1.0 <= r["perplexity"] <= 6.0
        assert 0.0 < r["max_cluster_share"] <= 1.0

    part, _ = carl_lab.train(cfg, stop_after=1)
    path = tmp_path / "ckpt.bin"
    part.save(path)
    loaded = carl_lab.TrainState.load(path)
    assert loaded.epoch == 1 and loaded.checksum() == part.checksum()
    resumed, rest = carl_lab.train(cfg, resume=loaded)
    assert resumed.checksum() == full.checksum()
    assert [r["total_loss"] for r in rest] == [r["total_loss"] for r in records[1:]]

    mean, std = carl_lab.evaluate(cfg, full)
    assert 0.0 <= mean <= 1.0 and std >= 0.0

    x, y = carl_lab.gaussian_mixture(3, 20, 5, 6.0)
    z = full.embed(x)
    assert z.shape == (60, 4)
    assert 0.0 <= carl_lab.linear_probe(z, y, 3, epochs=5) <= 1.0


def test_bad_checkpoint(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"not a checkpoint")
    with pytest.raises(carl_lab.FormatError):
        carl_lab.TrainState.load(path)
