import numpy as np
import pytest

from mmdiff.samples import SampleSet, read_samples, write_samples


def test_round_trip(tmp_path, rng):
    s = SampleSet(rng.normal(size=(7, 3)), rng.integers(0, 2, 7), "generator")
    p = write_samples(s, tmp_path / "s.csv")
    assert p.read_text().splitlines()[0] == "dim=3 component provenance"
    back = read_samples(p)
    assert np.array_equal(back.points, s.points)
    assert np.array_equal(back.labels, s.labels)
    assert back.provenance == "generator"


def test_scalar_label_broadcasts():
    s = SampleSet(np.zeros((4, 2)), 3)
    assert s.labels.tolist() == [3, 3, 3, 3]
    assert len(s.component(3)) == 4 and len(s.component(0)) == 0


def test_bad_provenance():
    with pytest.raises(ValueError):
        SampleSet(np.zeros((1, 2)), provenance="magic")


def test_missing_file_names_path(tmp_path):
    with pytest.raises(FileNotFoundError, match="nope.csv"):
        read_samples(tmp_path / "nope.csv")


def test_malformed_rows(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("dim=2 component provenance\n1.0,2.0,0\n")
    with pytest.raises(ValueError, match="expected 4 fields"):
        read_samples(p)
    p.write_text("dim=2 component provenance\n")
    with pytest.raises(ValueError, match="no samples"):
        read_samples(p)
