"""Binary format round-trip and malformed-input tests."""

import numpy as np
import pytest

from lutsr import formats, mapping, model


def test_container_round_trip():
    topo = model.builtin_topology("S", 8)
    c = model.random_container(topo, 41)
    blob = formats.serialize_container(c)
    back = formats.parse_container(blob)
    assert model.containers_equal(c, back)
    assert formats.serialize_container(back) == blob


def test_weights_round_trip():
    topo = model.builtin_topology("1-2", 12)
    w = mapping.random_weights(topo, 9)
    blob = formats.serialize_weights(w)
    back = formats.parse_weights(blob)
    assert back.topology == topo
    for key, m in w.modules.items():
        m2 = back.modules[key]
        for (wa, ba), (wb, bb) in zip(m.layers, m2.layers):
            assert np.array_equal(wa, wb) and np.array_equal(ba, bb)
    assert formats.serialize_weights(back) == blob


def test_container_bad_magic():
    topo = model.builtin_topology("S", 8)
    blob = bytearray(formats.serialize_container(model.zero_container(topo)))
    blob[:4] = b"XXXX"
    with pytest.raises(formats.BadMagic):
        formats.parse_container(bytes(blob))
    # weight magic on a container parse is also wrong
    with pytest.raises(formats.BadMagic):
        formats.parse_container(formats.WEIGHTS_MAGIC + bytes(blob[4:]))


def test_container_bad_version():
    topo = model.builtin_topology("S", 8)
    blob = bytearray(formats.serialize_container(model.zero_container(topo)))
    blob[4] = 99
    with pytest.raises(formats.UnsupportedVersion):
        formats.parse_container(bytes(blob))


def test_container_truncated():
    topo = model.builtin_topology("S", 8)
    blob = formats.serialize_container(model.zero_container(topo))
    with pytest.raises(formats.Truncated):
        formats.parse_container(blob[: len(blob) // 2])
    with pytest.raises(formats.Truncated):
        formats.parse_container(blob[:3])


def test_container_trailing_garbage():
    topo = model.builtin_topology("S", 8)
    blob = formats.serialize_container(model.zero_container(topo))
    with pytest.raises(formats.InvalidStructure):
        formats.parse_container(blob + b"\0")


def test_container_structure_lies():
    topo = model.builtin_topology("S", 8)
    blob = bytearray(formats.serialize_container(model.zero_container(topo)))
    # flip the stored table count (directly after the topology section)
    count_at = blob.index(len(list(model.table_specs(topo))).to_bytes(2, "little"), 6)
    blob[count_at] = 1
    with pytest.raises(formats.FormatError):
        formats.parse_container(bytes(blob))


def test_weights_bad_magic_version_truncation():
    topo = model.builtin_topology("S", 8)
    w = mapping.random_weights(topo, 1)
    blob = formats.serialize_weights(w)
    bad = b"ABCD" + blob[4:]
    with pytest.raises(formats.BadMagic):
        formats.parse_weights(bad)
    v = bytearray(blob)
    v[4] = 7
    with pytest.raises(formats.UnsupportedVersion):
        formats.parse_weights(bytes(v))
    with pytest.raises(formats.Truncated):
        formats.parse_weights(blob[:-10])


def test_file_helpers(tmp_path):
    topo = model.builtin_topology("M", 8)
    c = model.random_container(topo, 5)
    p = tmp_path / "m.splc"
    formats.save_container(p, c)
    assert model.containers_equal(formats.load_container(p), c)
    w = mapping.random_weights(topo, 5)
    pw = tmp_path / "m.spwt"
    formats.save_weights(pw, w)
    back = formats.load_weights(pw)
    assert back.topology == topo


def test_round_trip_across_variants_and_bins():
    seed = 100
    for name in model.BUILTIN_NAMES:
        for v_f in (8, 12):
            topo = model.builtin_topology(name, v_f)
            c = model.random_container(topo, seed)
            assert model.containers_equal(formats.parse_container(formats.serialize_container(c)), c)
            w = mapping.random_weights(topo, seed)
            blob = formats.serialize_weights(w)
            assert formats.serialize_weights(formats.parse_weights(blob)) == blob
            seed += 1
