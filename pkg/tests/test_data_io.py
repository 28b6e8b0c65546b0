import io
import os

import numpy as np
import pytest
from numpy.testing import assert_allclose
from sklearn.datasets import load_svmlight_file

from sntool.data_io import (
    LABEL_FLIP_RATE,
    PreprocessOptions,
    load_problem,
    parse_libsvm,
    preprocess,
    serialize_libsvm,
    synth_least_squares,
    synth_logistic,
)
from sntool.errors import DataError
from sntool.model import lmax


def test_parse_tiny_fixture(fixtures_dir):
    with open(os.path.join(fixtures_dir, "tiny.libsvm")) as fh:
        raw = parse_libsvm(fh)
    assert raw.n == 4
    assert raw.max_index == 2
    assert raw.labels == [1.0, 2.0, 1.0, 2.0]
    assert raw.rows[2] == [(2, 2.0)]


def test_preprocess_maps_labels_and_adds_intercept(fixtures_dir):
    with open(os.path.join(fixtures_dir, "tiny.libsvm")) as fh:
        rows, labels, d = preprocess(parse_libsvm(fh))
    assert d == 3
    assert_allclose(labels, [-1, 1, -1, 1])
    assert_allclose(rows.toarray(), [[0.5, -1, 1], [1.5, 0, 1], [0, 2, 1], [-0.25, 0.75, 1]])


def test_preprocess_without_intercept():
    raw = parse_libsvm(["-1 1:1\n", "1 2:3\n"])
    rows, labels, d = preprocess(raw, PreprocessOptions(add_intercept=False))
    assert d == 2
    assert_allclose(rows.toarray(), [[1, 0], [0, 3]])


def test_loader_agrees_with_sklearn(fixtures_dir):
    path = os.path.join(fixtures_dir, "tiny.libsvm")
    X, y = load_svmlight_file(path, n_features=2)
    problem = load_problem(path)
    assert_allclose(problem.rows.toarray()[:, :2], X.toarray())
    assert_allclose(problem.labels, np.where(y == y.min(), -1.0, 1.0))
    assert_allclose(problem.reg.lam, 1.0 / 4)


@pytest.mark.parametrize("text, line, column", [
    ("1 1:0.5\nfoo 1:1\n", 2, 1),
    ("1 1:0.5 2-1\n", 1, 9),
    ("1 0:1\n", 1, 3),
    ("1 x:1\n", 1, 3),
    ("1 1:abc\n", 1, 5),
])
def test_parse_errors_report_position(text, line, column):
    with pytest.raises(DataError) as excinfo:
        parse_libsvm(io.StringIO(text))
    assert excinfo.value.line == line
    assert excinfo.value.column == column


def test_non_increasing_indices_fixture(fixtures_dir):
    with open(os.path.join(fixtures_dir, "bad_index.libsvm")) as fh:
        with pytest.raises(DataError) as excinfo:
            parse_libsvm(fh)
    assert (excinfo.value.line, excinfo.value.column) == (2, 8)
    assert "line 2, column 8" in str(excinfo.value)


def test_three_labels_rejected():
    with pytest.raises(DataError):
        preprocess(parse_libsvm(["1 1:1\n", "2 1:1\n", "3 1:1\n"]))


def test_missing_file_is_data_error(tmp_path):
    with pytest.raises(DataError):
        load_problem(str(tmp_path / "absent.libsvm"))


def test_serialize_is_canonical(fixtures_dir):
    with open(os.path.join(fixtures_dir, "tiny.libsvm")) as fh:
        raw = parse_libsvm(fh)
    out = io.StringIO()
    serialize_libsvm(raw, out)
    assert out.getvalue().splitlines()[0] == "1 1:0.5 2:-1"
    again = parse_libsvm(io.StringIO(out.getvalue()))
    assert again.rows == raw.rows and again.labels == raw.labels


def test_synth_logistic_is_seeded():
    a = synth_logistic(500, 7, seed=3)
    b = synth_logistic(500, 7, seed=3)
    assert (a.rows != b.rows).nnz == 0
    assert_allclose(a.labels, b.labels)
    assert set(np.unique(a.labels)) <= {-1.0, 1.0}
    assert_allclose(a.reg.lam, 1.0 / 500)
    assert LABEL_FLIP_RATE == 0.05


def test_synth_logistic_smoothness_constant():
    problem = synth_logistic(1000, 20, seed=1)
    assert problem.rows.shape == (1000, 20)
    assert 0.2 <= lmax(problem) <= 5.0


def test_synth_least_squares():
    problem = synth_least_squares(40, 3, seed=0)
    assert problem.loss.kind == "squared"
    assert problem.rows.shape == (40, 3)


def test_unreadable_dataset_is_data_error(fixtures_dir, tmp_path):
    with pytest.raises(DataError):
        load_problem(os.path.join(fixtures_dir, "binary.libsvm"))
    with pytest.raises(DataError):
        load_problem(str(tmp_path))


def test_featureless_dataset_rejected():
    raw = parse_libsvm(["1\n", "-1\n"])
    with pytest.raises(DataError):
        preprocess(raw, PreprocessOptions(add_intercept=False))
    rows, _, d = preprocess(raw)
    assert d == 1 and rows.shape == (2, 1)
