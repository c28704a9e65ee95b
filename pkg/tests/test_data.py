"""Image loading, augmentation, the stratified split and the synthetic generator."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from cxr.config.schema import SynthConfig
from cxr.data import (
    LabeledDataset,
    apply_augmentation,
    class_counts,
    generate_synthetic,
    load_image_dataset,
    random_horizontal_flip,
    random_rotation,
    read_pgm,
    resize,
    rotate,
    stratified_split,
    write_image_dataset,
    write_pgm,
)
from cxr.errors import ConfigurationError, DatasetError

TINY_SYNTH = SynthConfig(counts=(5, 6, 7, 8), image_size=16, seed=3)


def _blank_dataset(counts: tuple[int, ...]) -> LabeledDataset:
    labels = np.repeat(np.arange(len(counts)), counts)
    return LabeledDataset(
        sample_ids=tuple(f"img{i:05d}" for i in range(labels.size)),
        images=np.zeros((labels.size, 3, 1, 1)),
        labels=labels,
    )


def _write_labels(directory: Path, rows: list[str]) -> Path:
    path = directory / "labels.csv"
    path.write_text("filename,class\n" + "".join(f"{row}\n" for row in rows), encoding="utf-8")
    return path


def test_black_and_white_pgm_decode(tmp_path: Path) -> None:
    write_pgm(np.zeros((3, 4, 5)), tmp_path / "black.pgm")
    write_pgm(np.ones((3, 4, 5)), tmp_path / "white.pgm")
    black = read_pgm(tmp_path / "black.pgm")
    white = read_pgm(tmp_path / "white.pgm")
    assert black.shape == (3, 4, 5)
    assert not black.any()
    assert np.all(white == 1.0)


def test_pgm_round_trip_is_quantised_to_eight_bits(tmp_path: Path) -> None:
    image = np.random.default_rng(0).uniform(size=(3, 6, 6))
    image[1:] = image[0]
    write_pgm(image, tmp_path / "x.pgm")
    restored = read_pgm(tmp_path / "x.pgm")
    np.testing.assert_allclose(restored, image, atol=0.5 / 255 + 1e-12)
    assert np.array_equal(restored[0], restored[2])


@pytest.mark.parametrize("content", [b"P2\n2 2\n255\n0 0 0 0\n", b"P5\nxx yy\n255\n", b""])
def test_malformed_pgm_rejected(tmp_path: Path, content: bytes) -> None:
    path = tmp_path / "bad.pgm"
    path.write_bytes(content)
    with pytest.raises(DatasetError):
        read_pgm(path)


@pytest.mark.parametrize(
    ("maxval", "pixels"),
    [(100, bytes([0, 50, 100, 25])), (1023, bytes([0, 0, 3, 255, 1, 0, 2, 0]))],
)
def test_pgm_with_other_maxval_rejected(tmp_path: Path, maxval: int, pixels: bytes) -> None:
    path = tmp_path / "deep.pgm"
    path.write_bytes(b"P5\n# scanner export\n2 2\n" + str(maxval).encode() + b"\n" + pixels)
    with pytest.raises(DatasetError, match=f"maxval 255, got {maxval}"):
        read_pgm(path)


def test_pgm_header_comments_are_skipped(tmp_path: Path) -> None:
    path = tmp_path / "commented.pgm"
    path.write_bytes(b"P5\n# scanner export\n2 2\n255\n" + bytes([0, 255, 51, 102]))
    image = read_pgm(path)
    np.testing.assert_allclose(image[0], [[0.0, 1.0], [0.2, 0.4]], atol=1e-12)


def test_load_dataset_follows_csv_order_and_case_insensitive_names(tmp_path: Path) -> None:
    for name, level in (("a.pgm", 0.0), ("b.pgm", 1.0), ("c.pgm", 0.5)):
        write_pgm(np.full((3, 8, 8), level), tmp_path / name)
    _write_labels(tmp_path, ["c.pgm,Viral", "a.pgm,SILICOSIS", "b.pgm, normal "])
    dataset = load_image_dataset(tmp_path, workers=3)
    assert dataset.sample_ids == ("c.pgm", "a.pgm", "b.pgm")
    assert dataset.labels.tolist() == [3, 0, 1]
    assert dataset.images[1].max() == 0.0
    assert dataset.images[2].min() == 1.0


def test_load_dataset_resizes_mixed_sizes(tmp_path: Path) -> None:
    write_pgm(np.full((3, 8, 8), 0.2), tmp_path / "a.pgm")
    write_pgm(np.full((3, 12, 10), 0.2), tmp_path / "b.pgm")
    _write_labels(tmp_path, ["a.pgm,normal", "b.pgm,bacterial"])
    with pytest.raises(DatasetError):
        load_image_dataset(tmp_path)
    dataset = load_image_dataset(tmp_path, image_size=16)
    assert dataset.images.shape == (2, 3, 16, 16)


@pytest.mark.parametrize(
    "rows",
    [
        ["a.pgm,pneumonia"],
        ["missing.pgm,normal"],
        ["a.pgm,normal", "a.pgm,viral"],
        ["a.pgm"],
        [],
    ],
)
def test_bad_label_files_rejected(tmp_path: Path, rows: list[str]) -> None:
    write_pgm(np.zeros((3, 8, 8)), tmp_path / "a.pgm")
    _write_labels(tmp_path, rows)
    with pytest.raises(DatasetError):
        load_image_dataset(tmp_path)


def test_labels_header_required(tmp_path: Path) -> None:
    write_pgm(np.zeros((3, 8, 8)), tmp_path / "a.pgm")
    (tmp_path / "labels.csv").write_text("a.pgm,normal\n", encoding="utf-8")
    with pytest.raises(DatasetError):
        load_image_dataset(tmp_path)


def test_resize_constant_and_identity() -> None:
    constant = np.full((3, 20, 20), 0.3)
    np.testing.assert_allclose(resize(constant, 32), 0.3, atol=1e-12)
    image = np.random.default_rng(1).uniform(size=(3, 16, 16))
    np.testing.assert_allclose(resize(image, 16), image, atol=1e-12)


def test_resize_checkerboard_centre_is_midpoint() -> None:
    board = np.tile(np.array([[0.0, 1.0], [1.0, 0.0]]), (3, 1, 1))
    out = resize(board, 9)
    assert out.shape == (3, 9, 9)
    assert out[0, 4, 4] == pytest.approx(0.5, abs=1e-12)
    assert out[0, 0, 0] == 0.0 and out[0, 0, 8] == 1.0


def test_resize_rejects_tiny_target() -> None:
    with pytest.raises(ConfigurationError):
        resize(np.zeros((3, 4, 4)), 7)


def test_horizontal_flip() -> None:
    rng = np.random.default_rng(2)
    image = np.array([0.1, 0.2, 0.3]).reshape(1, 1, 3)
    assert random_horizontal_flip(image, 1.0, rng).ravel().tolist() == [0.3, 0.2, 0.1]
    twice = random_horizontal_flip(random_horizontal_flip(image, 1.0, rng), 1.0, rng)
    assert np.array_equal(twice, image)
    for _ in range(20):
        assert np.array_equal(random_horizontal_flip(image, 0.0, rng), image)
    with pytest.raises(ConfigurationError):
        random_horizontal_flip(image, 1.5, rng)


def test_zero_rotation_is_identity() -> None:
    image = np.random.default_rng(3).uniform(size=(3, 9, 9))
    assert np.array_equal(random_rotation(image, 0.0, np.random.default_rng(0)), image)
    with pytest.raises(ConfigurationError):
        random_rotation(image, 181.0, np.random.default_rng(0))


def test_rotation_keeps_constant_interior() -> None:
    out = rotate(np.full((3, 32, 32), 0.7), 15.0)
    np.testing.assert_allclose(out[:, 8:24, 8:24], 0.7, atol=1e-12)
    assert out[0, 0, 0] < 0.7


def test_quarter_turn_moves_a_delta_pixel() -> None:
    image = np.zeros((3, 5, 5))
    image[:, 1, 3] = 1.0
    out = rotate(image, 90.0)
    # counter-clockwise about the centre (2, 2): (row 1, col 3) lands on (row 1, col 1)
    assert out[0, 1, 1] == pytest.approx(1.0, abs=1e-9)
    assert out[0].sum() == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_augmentation_preserves_shape_and_range(seed: int) -> None:
    rng = np.random.default_rng(seed)
    image = rng.uniform(size=(3, 16, 16))
    out = apply_augmentation(image, rng)
    assert out.shape == image.shape
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_split_of_ten_and_partition() -> None:
    dataset = _blank_dataset((10, 12, 15, 7))
    train, test = stratified_split(dataset, seed=4)
    assert train.counts_per_class() == (8, 9, 12, 5)
    assert test.counts_per_class() == (2, 3, 3, 2)
    assert set(train.sample_ids).isdisjoint(test.sample_ids)
    assert set(train.sample_ids) | set(test.sample_ids) == set(dataset.sample_ids)
    assert list(train.sample_ids) == sorted(train.sample_ids)


def test_split_is_deterministic_per_seed() -> None:
    dataset = _blank_dataset((20, 20, 20, 20))
    first, _ = stratified_split(dataset, seed=1)
    again, _ = stratified_split(dataset, seed=1)
    other, _ = stratified_split(dataset, seed=2)
    assert first.sample_ids == again.sample_ids
    assert first.sample_ids != other.sample_ids


def test_split_of_reference_class_totals() -> None:
    train, test = stratified_split(_blank_dataset((535, 1554, 2772, 1493)), seed=0)
    for got, expected in zip(train.counts_per_class(), (428, 1244, 2218, 1195)):
        assert abs(got - expected) <= 1
    assert sum(train.counts_per_class()) + sum(test.counts_per_class()) == 6354


def test_split_rejects_sparse_class() -> None:
    with pytest.raises(DatasetError):
        stratified_split(_blank_dataset((4, 10, 10, 10)), seed=0)


def test_default_synthetic_split_sizes() -> None:
    counts = SynthConfig().counts
    train, test = stratified_split(_blank_dataset(counts), seed=0)
    assert train.counts_per_class() == (85, 248, 444, 239)
    assert test.counts_per_class() == (22, 63, 111, 60)
    assert class_counts(train).n == (85, 248, 444, 239)


def test_synthetic_generation_is_deterministic() -> None:
    first = generate_synthetic(TINY_SYNTH)
    second = generate_synthetic(TINY_SYNTH)
    assert first.sample_ids == second.sample_ids
    assert np.array_equal(first.images, second.images)
    assert first.counts_per_class() == (5, 6, 7, 8)
    assert first.images.shape == (26, 3, 16, 16)
    assert first.images.min() >= 0.0 and first.images.max() <= 1.0
    reseeded = generate_synthetic(TINY_SYNTH.model_copy(update={"seed": 4}))
    assert not np.array_equal(first.images, reseeded.images)


def test_synthetic_classes_separate_on_mean_intensity() -> None:
    dataset = generate_synthetic(SynthConfig(counts=(20, 20, 20, 20), image_size=32, seed=9))
    features = dataset.images[:, 0].mean(axis=(1, 2))
    centroids = np.array([features[dataset.labels == k].mean() for k in range(4)])
    predicted = np.abs(features[:, None] - centroids[None, :]).argmin(axis=1)
    assert (predicted == dataset.labels).mean() > 0.25


def test_synthetic_dataset_survives_disk_round_trip(tmp_path: Path) -> None:
    dataset = generate_synthetic(TINY_SYNTH)
    write_image_dataset(dataset, tmp_path)
    loaded = load_image_dataset(tmp_path)
    assert loaded.labels.tolist() == dataset.labels.tolist()
    assert loaded.sample_ids == tuple(f"{sid}.pgm" for sid in dataset.sample_ids)
    np.testing.assert_allclose(loaded.images, dataset.images, atol=0.5 / 255 + 1e-12)


def test_synth_config_validation() -> None:
    with pytest.raises(ValueError):
        SynthConfig(counts=(0, 1, 1, 1))
    with pytest.raises(ValueError):
        SynthConfig(image_size=8)
