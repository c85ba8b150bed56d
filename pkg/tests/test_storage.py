import numpy as np
import pytest

from dualnorm.storage import SnapshotStore, mu_key, read_array, read_matrix_bundle, write_array, write_matrix_bundle


def test_array_round_trip_is_bitwise(tmp_path, rng):
    a = rng.standard_normal(37)
    write_array(tmp_path / "a.bin", a)
    np.testing.assert_array_equal(read_array(tmp_path / "a.bin"), a)
    raw = (tmp_path / "a.bin").read_bytes()
    assert int.from_bytes(raw[:8], "little") == 37 and len(raw) == 8 + 8 * 37


def test_truncated_array_is_reported(tmp_path):
    write_array(tmp_path / "a.bin", np.arange(4.0))
    data = (tmp_path / "a.bin").read_bytes()
    (tmp_path / "a.bin").write_bytes(data[:-8])
    with pytest.raises(OSError, match="truncated"):
        read_array(tmp_path / "a.bin")


def test_bundle_keeps_shapes(tmp_path, rng):
    arrays = {"m": rng.standard_normal((3, 4, 2)), "v": np.arange(5.0)}
    write_matrix_bundle(tmp_path / "b", arrays, {"tag": "x"})
    back, meta = read_matrix_bundle(tmp_path / "b")
    assert meta["tag"] == "x"
    for k in arrays:
        np.testing.assert_array_equal(back[k], arrays[k])


def test_mu_key_is_exact():
    mu = np.array([0.1, 1 / 3])
    assert [float(s) for s in mu_key(mu).split(",")] == mu.tolist()


def test_store_is_idempotent_and_persistent(tmp_path):
    s = SnapshotStore(tmp_path, "ns")
    mu = np.array([0.8, 1.2])
    s.put(mu, np.arange(3.0))
    s.put(mu, np.arange(3.0) + 1)
    assert s.writes == 1 and len(s) == 1
    again = SnapshotStore(tmp_path, "ns")
    assert mu in again
    np.testing.assert_array_equal(again.get(mu), np.arange(3.0))
    assert again.get(np.array([1.0, 1.0])) is None
    assert again.digest() == s.digest()
