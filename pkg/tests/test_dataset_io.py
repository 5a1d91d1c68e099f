import math

import numpy as np
import pytest

from softts.dataset_io import (
    LabeledDataset,
    UcrParseError,
    build_label_map,
    load_dataset_dir,
    parse_ucr_file,
    preprocess,
)


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def test_parse_basic_records_in_order(tmp_path):
    path = write_lines(tmp_path / "a.tsv", ["2\t0.5\t-0.5\t1.25", "1\t3\t4\t5"])
    records = parse_ucr_file(path)
    assert [r.label for r in records] == ["2", "1"]
    assert np.array_equal(records[0].values, [0.5, -0.5, 1.25])
    assert np.array_equal(records[1].values, [3.0, 4.0, 5.0])


def test_parse_nan_marker_becomes_missing(tmp_path):
    path = write_lines(tmp_path / "a.tsv", ["1\t1.0\tNaN\t3.0"])
    values = parse_ucr_file(path)[0].values
    assert math.isnan(values[1])
    assert values[0] == 1.0 and values[2] == 3.0


def test_parse_skips_blank_lines(tmp_path):
    path = write_lines(tmp_path / "a.tsv", ["1\t1\t2", "", "2\t3\t4"])
    assert len(parse_ucr_file(path)) == 2


def test_parse_malformed_token_names_line(tmp_path):
    path = write_lines(tmp_path / "a.tsv", ["1\t1\t2", "2\t1\tfoo"])
    with pytest.raises(UcrParseError, match="line 2"):
        parse_ucr_file(path)


def test_parse_rejects_infinite_values(tmp_path):
    path = write_lines(tmp_path / "a.tsv", ["1\t1\tinf"])
    with pytest.raises(UcrParseError, match="non-finite"):
        parse_ucr_file(path)


def test_parse_rejects_label_only_line(tmp_path):
    path = write_lines(tmp_path / "a.tsv", ["1"])
    with pytest.raises(UcrParseError):
        parse_ucr_file(path)


def test_parse_empty_file_is_error(tmp_path):
    path = tmp_path / "a.tsv"
    path.write_text("")
    with pytest.raises(UcrParseError, match="no records"):
        parse_ucr_file(str(path))


def test_label_map_numeric_ordering():
    assert build_label_map(["1", "-1", "1", "2"]) == {"-1": 0, "1": 1, "2": 2}


def test_label_map_lexicographic_when_non_numeric():
    assert build_label_map(["b", "a", "c", "a"]) == {"a": 0, "b": 1, "c": 2}


def test_znormalize_uses_population_std(tmp_path):
    path = write_lines(tmp_path / "a.tsv", ["1\t1\t2\t3", "2\t5\t5\t5"])
    ds = preprocess(parse_ucr_file(path), "a")
    # population std of [1,2,3] is sqrt(2/3)
    expected = (np.array([1.0, 2.0, 3.0]) - 2.0) / math.sqrt(2.0 / 3.0)
    assert np.allclose(ds.samples[0], expected, atol=1e-12)
    assert np.allclose(ds.samples[0], [-1.2247, 0.0, 1.2247], atol=5e-5)


def test_znormalize_mean_and_std_invariants():
    rng = np.random.default_rng(11)
    from softts.dataset_io import RawRecord

    records = [RawRecord(str(i % 2), rng.standard_normal(30) * 5 + 2) for i in range(12)]
    ds = preprocess(records, "r")
    assert np.abs(ds.samples.mean(axis=1)).max() < 1e-6
    assert np.abs(ds.samples.std(axis=1) - 1.0).max() < 1e-4


def test_constant_series_normalizes_to_zeros(tmp_path):
    path = write_lines(tmp_path / "a.tsv", ["1\t5\t5\t5", "2\t1\t2\t3"])
    ds = preprocess(parse_ucr_file(path), "a")
    assert np.array_equal(ds.samples[0], np.zeros(3))


def test_interior_missing_is_linearly_interpolated(tmp_path):
    path = write_lines(tmp_path / "a.tsv", ["1\t1\tNaN\t3", "2\t0\t0\t1"])
    ds = preprocess(parse_ucr_file(path), "a", normalize=False)
    assert np.array_equal(ds.samples[0], [1.0, 2.0, 3.0])


def test_edge_missing_extends_nearest(tmp_path):
    path = write_lines(tmp_path / "a.tsv", ["1\tNaN\t2\t4", "2\t1\t3\tNaN"])
    ds = preprocess(parse_ucr_file(path), "a", normalize=False)
    assert np.array_equal(ds.samples[0], [2.0, 2.0, 4.0])
    assert np.array_equal(ds.samples[1], [1.0, 3.0, 3.0])


def test_no_normalize_round_trips_exactly(tmp_path):
    rng = np.random.default_rng(3)
    rows = []
    values = rng.standard_normal((4, 7))
    for i in range(4):
        rows.append(str(i % 2 + 1) + "\t" + "\t".join(repr(float(v)) for v in values[i]))
    path = write_lines(tmp_path / "a.tsv", rows)
    ds = preprocess(parse_ucr_file(path), "a", normalize=False)
    assert np.array_equal(ds.samples, values)


def test_preprocess_is_deterministic(tmp_path):
    path = write_lines(tmp_path / "a.tsv", ["1\t1\t2\t3", "2\t4\tNaN\t6", "1\t7\t8\t9"])
    a = preprocess(parse_ucr_file(path), "a")
    b = preprocess(parse_ucr_file(path), "a")
    assert np.array_equal(a.samples, b.samples)
    assert np.array_equal(a.labels, b.labels)
    assert a.label_map == b.label_map


def test_differing_lengths_rejected(tmp_path):
    path = write_lines(tmp_path / "a.tsv", ["1\t1\t2\t3", "2\t1\t2"])
    with pytest.raises(ValueError, match="lengths differ"):
        preprocess(parse_ucr_file(path), "a")


def test_test_split_reuses_train_label_map(tmp_path):
    train = write_lines(tmp_path / "tr.tsv", ["3\t1\t2", "1\t0\t1", "2\t2\t2"])
    test = write_lines(tmp_path / "te.tsv", ["2\t1\t1"])
    train_ds = preprocess(parse_ucr_file(train), "a", "train")
    test_ds = preprocess(parse_ucr_file(test), "a", "test", label_map=train_ds.label_map)
    assert test_ds.labels.tolist() == [1]
    assert test_ds.num_classes == 3


def test_unknown_test_label_rejected(tmp_path):
    train = write_lines(tmp_path / "tr.tsv", ["1\t1\t2", "2\t0\t1"])
    test = write_lines(tmp_path / "te.tsv", ["9\t1\t1"])
    train_ds = preprocess(parse_ucr_file(train), "a", "train")
    with pytest.raises(ValueError, match="absent"):
        preprocess(parse_ucr_file(test), "a", "test", label_map=train_ds.label_map)


def test_test_split_without_label_map_rejected(tmp_path):
    path = write_lines(tmp_path / "a.tsv", ["1\t1\t2", "2\t0\t1"])
    with pytest.raises(ValueError, match="label_map"):
        preprocess(parse_ucr_file(path), "a", "test")


def test_single_class_rejected(tmp_path):
    path = write_lines(tmp_path / "a.tsv", ["1\t1\t2", "1\t0\t1"])
    with pytest.raises(ValueError, match="2 distinct"):
        preprocess(parse_ucr_file(path), "a")


def test_dataset_invariants_enforced():
    with pytest.raises(ValueError):
        LabeledDataset("x", "train", np.ones((2, 3)), np.array([0, 1]), {"a": 0, "b": 2})
    with pytest.raises(ValueError):
        LabeledDataset(
            "x", "train", np.array([[1.0, np.nan]]), np.array([0]), {"a": 0, "b": 1}
        )


def test_load_dataset_dir_round_trip(tmp_path):
    d = tmp_path / "Toy"
    d.mkdir()
    write_lines(d / "Toy_TRAIN.tsv", ["1\t1\t2\t3", "2\t3\t2\t1"])
    write_lines(d / "Toy_TEST.tsv", ["2\t0\t1\t2"])
    train, test = load_dataset_dir(str(d))
    assert train.name == "Toy" and test.split == "test"
    assert train.label_map == test.label_map
    with pytest.raises(FileNotFoundError):
        load_dataset_dir(str(tmp_path / "Missing"))
