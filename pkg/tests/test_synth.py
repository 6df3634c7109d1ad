import io

import numpy as np
import pytest

from nc_meter.accumulate import accumulate_batches, finalize, global_mean_from_stats
from nc_meter.errors import UsageError
from nc_meter.formats import read_classifier, read_embedding_batches
from nc_meter.pairwise import build_geometry, interference_summary, norm_summary
from nc_meter.synth import (
    SynthSpec,
    class_directions,
    generate,
    ground_truth,
    make_instance,
    stream_bytes,
    true_checkpoint,
)


def etf_spec(c, d, **kw):
    base = dict(num_classes=c, dim=d, samples_per_class=10, geometry="simplex_etf", noise_sigma=0.0)
    base.update(kw)
    return SynthSpec(**base)


@pytest.mark.parametrize("c,d", [(3, 3), (3, 2), (5, 5), (5, 4), (16, 40), (17, 16)])
def test_simplex_directions_are_an_exact_tight_frame(c, d):
    dirs = class_directions(etf_spec(c, d))
    assert np.abs(np.linalg.norm(dirs, axis=1) - 1.0).max() < 1e-12
    gram = dirs @ dirs.T
    off = gram[~np.eye(c, dtype=bool)]
    assert np.abs(off - (-1.0 / (c - 1))).max() < 1e-12
    assert np.abs(dirs.mean(axis=0)).max() < 1e-12


def test_orthonormal_directions_are_basis_rows():
    dirs = class_directions(SynthSpec(4, 7, 1, geometry="orthonormal"))
    expect = np.zeros((4, 7))
    expect[:, :4] = np.eye(4)
    assert np.array_equal(dirs, expect)


def test_sphere_directions_are_unit_and_seeded():
    spec = SynthSpec(6, 9, 1, geometry="uniform_sphere", seed=11)
    dirs = class_directions(spec)
    assert np.abs(np.linalg.norm(dirs, axis=1) - 1.0).max() < 1e-12
    assert np.array_equal(dirs, class_directions(spec))
    assert not np.array_equal(dirs, class_directions(SynthSpec(6, 9, 1, geometry="uniform_sphere", seed=12)))


def test_generate_is_deterministic():
    spec = SynthSpec(5, 8, 40, geometry="uniform_sphere", noise_sigma=0.3, classifier_mode="random", seed=7)
    a, b = generate(spec), generate(spec)
    assert a.embeddings == b.embeddings
    assert a.classifiers == b.classifiers
    assert a.truth == b.truth


def test_stream_counts_and_labels_match_spec():
    spec = SynthSpec(4, 6, [5, 0, 3, 9], geometry="random_gaussian", noise_sigma=0.2, seed=3)
    out = generate(spec)
    dim, batches = read_embedding_batches(io.BytesIO(out.embeddings))
    assert dim == 6
    labels = np.concatenate([lab for lab, _ in batches])
    assert np.array_equal(np.bincount(labels, minlength=4), [5, 0, 3, 9])


def test_noiseless_stream_reproduces_means_at_storage_precision():
    spec = etf_spec(5, 8, samples_per_class=3, mean_scale=2.0)
    inst = make_instance(spec)
    dim, batches = read_embedding_batches(io.BytesIO(stream_bytes(inst)))
    for labels, vectors in batches:
        expect = inst.means[labels].astype(np.float32)
        assert np.array_equal(vectors, expect)


def test_validation_stream_uses_fresh_noise():
    spec = SynthSpec(3, 4, 20, geometry="uniform_sphere", noise_sigma=0.5, seed=2)
    inst = make_instance(spec)
    assert stream_bytes(inst, 0) != stream_bytes(inst, 1)
    assert stream_bytes(inst, 1) == stream_bytes(inst, 1)


def test_tied_classifier_copies_means():
    inst = make_instance(etf_spec(4, 4, mean_scale=1.5))
    assert np.array_equal(inst.weights, inst.means)
    cls = read_classifier(io.BytesIO(generate(etf_spec(4, 4, mean_scale=1.5)).classifiers))
    assert not cls.has_bias
    assert np.array_equal(cls.weights, inst.means.astype(np.float32))


def test_perturbed_classifier_stays_near_means():
    spec = etf_spec(6, 8, classifier_mode="perturbed", perturbation=0.01, seed=5)
    inst = make_instance(spec)
    drift = np.linalg.norm(inst.weights - inst.means, axis=1)
    assert 0 < drift.max() < 0.1


def test_true_checkpoint_requires_noiseless_spec():
    with pytest.raises(UsageError):
        true_checkpoint(make_instance(etf_spec(3, 3, noise_sigma=0.5)))


def test_true_checkpoint_feeds_exact_frame_measurements():
    spec = etf_spec(9, 12, samples_per_class=4, mean_scale=2.0)
    inst = make_instance(spec)
    stats = true_checkpoint(inst)
    geom = build_geometry(stats, global_mean_from_stats(stats), min_count=1)
    interf = interference_summary(geom)
    assert abs(interf.values.mean - (-1.0 / 8)) < 1e-12
    assert interf.values.variance < 1e-24
    norms = norm_summary(geom)
    assert norms.log_norms.cov() < 1e-12


def test_ground_truth_closed_forms():
    truth = ground_truth(etf_spec(4, 8, noise_sigma=0.1))
    expected = truth["expected"]
    assert expected["interference_mean"] == -1.0 / 3
    assert expected["equinorm_cov"] == 0.0
    assert abs(expected["pair_distance_sq"] - 8.0 / 3) < 1e-15
    assert abs(expected["cdnv_pair_mean"] - 0.01 * 8 / (8.0 / 3)) < 1e-15
    assert expected["alignment_mean"] == 1.0
    assert expected["agreement_rate"] == 1.0
    free = ground_truth(SynthSpec(4, 8, 1, geometry="random_gaussian"))["expected"]
    assert free["interference_mean"] is None
    assert free["cdnv_pair_mean"] is None


def test_noisy_stream_lands_near_frame_interference():
    spec = etf_spec(6, 10, samples_per_class=2000, noise_sigma=0.05, seed=21)
    out = generate(spec)
    dim, batches = read_embedding_batches(io.BytesIO(out.embeddings))
    acc = accumulate_batches(batches, num_classes=6, dim=dim)
    stats, gmean, _ = finalize(acc)
    geom = build_geometry(stats, gmean)
    interf = interference_summary(geom)
    assert abs(interf.values.mean - (-0.2)) < 0.01


@pytest.mark.parametrize(
    "kw",
    [
        dict(num_classes=1, dim=4, samples_per_class=1),
        dict(num_classes=6, dim=4, samples_per_class=1, geometry="simplex_etf"),
        dict(num_classes=5, dim=4, samples_per_class=1, geometry="orthonormal"),
        dict(num_classes=3, dim=4, samples_per_class=1, geometry="moebius"),
        dict(num_classes=3, dim=4, samples_per_class=1, classifier_mode="psychic"),
        dict(num_classes=3, dim=4, samples_per_class=1, noise_sigma=-0.1),
        dict(num_classes=3, dim=4, samples_per_class=[1, 2]),
        dict(num_classes=3, dim=4, samples_per_class=[1, 2, -1]),
        dict(num_classes=3, dim=4, samples_per_class=1, mean_scale=0.0),
    ],
)
def test_bad_specs_are_rejected(kw):
    with pytest.raises(UsageError):
        make_instance(SynthSpec(**kw))
