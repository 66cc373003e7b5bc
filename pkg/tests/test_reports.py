import numpy as np

from lipvar import kernels as K
from lipvar import reports


def test_canonical_json_deterministic(tmp_path):
    obj = {"b": 1.0 / 3.0, "a": [1, 2.5], "nested": {"z": np.float64(0.1)}}
    s1 = reports.canonical_json(obj)
    s2 = reports.canonical_json({"nested": {"z": 0.1}, "a": [1, 2.5], "b": 1 / 3})
    assert s1 == s2
    assert "0.3333333333333333" in s1


def test_content_hash_changes_with_content():
    a = reports.content_hash({"h": 0.1})
    b = reports.content_hash({"h": 0.05})
    assert a != b and len(a) == 16


def test_csv_writer_roundtrips_floats(tmp_path):
    p = tmp_path / "t.csv"
    reports.write_csv(p, ["i", "v"], [[0, 0.1], [1, 1 / 3]])
    lines = p.read_text().strip().splitlines()
    assert lines[0] == "i,v"
    assert float(lines[2].split(",")[1]) == 1 / 3


def test_kernel_binary_roundtrip(tmp_path, flat_small):
    domain, _ = flat_small
    k = K.build_k(domain, 0.4)
    path = tmp_path / "k.lvkb"
    reports.write_kernel_binary(path, k)
    entries, kind, (lo, hi), eps = reports.read_kernel_binary(path)
    assert kind == "k"
    assert (lo, hi) == (0.4, 0.4)
    assert np.array_equal(entries, k.entries)


def test_kernel_csv_export(tmp_path, flat_small):
    domain, u = flat_small
    from lipvar.omega import Segment

    b = K.build_b_segment(domain, u, Segment(0.3, 0.4))
    path = tmp_path / "b.csv"
    reports.write_kernel_csv(path, b)
    first = path.read_text().splitlines()
    assert first[0] == "i,j,value"
    assert len(first) == 1 + domain.nx * domain.nx
