"""Weight-file round-trip and malformed-input tests."""

import numpy as np
import pytest

from lutsr_trainer import builtin_topology, module_specs
from lutsr_trainer.weights_io import layer_shapes, parse, serialize


def random_modules(topology, seed):
    rng = np.random.default_rng(seed)
    modules = {}
    for branch, stage, slot, kind, out_ch in module_specs(topology):
        modules[(branch, stage, slot)] = [
            (
                rng.standard_normal((rows, cols)).astype(np.float32),
                rng.standard_normal(rows).astype(np.float32),
            )
            for rows, cols in layer_shapes(out_ch)
        ]
    return modules


def test_module_count_two_branches_of_five():
    for name in ("S", "M"):
        specs = list(module_specs(builtin_topology(name)))
        assert len(specs) == 10
        for branch in (0, 1):
            assert sum(1 for s in specs if s[0] == branch) == 5


def test_first_module_is_the_spatial_table():
    topo = builtin_topology("S")
    branch, stage, slot, kind, out_ch = next(iter(module_specs(topo)))
    assert (branch, stage, slot) == (0, 0, 0)
    assert out_ch == topo.c_f


def test_final_stage_outputs_one_channel_per_subpixel():
    topo = builtin_topology("S")
    last = len(topo.blocks) - 1
    finals = [s for s in module_specs(topo) if s[1] == last]
    assert finals and all(s[4] == topo.scale * topo.scale for s in finals)


def test_round_trip_identical():
    topo = builtin_topology("S", v_f=8)
    modules = random_modules(topo, 3)
    blob = serialize(topo, modules)
    back_topo, back = parse(blob)
    assert back_topo == topo
    for key, layers in modules.items():
        for (w, b), (w2, b2) in zip(layers, back[key]):
            assert np.array_equal(w, w2) and np.array_equal(b, b2)
            assert w2.dtype == np.float32 and b2.dtype == np.float32
    assert serialize(back_topo, back) == blob


def test_round_trip_other_variants():
    for name, v_f in (("M", 16), ("1-2", 12)):
        topo = builtin_topology(name, v_f=v_f)
        modules = random_modules(topo, 5)
        back_topo, back = parse(serialize(topo, modules))
        assert back_topo == topo
        assert set(back) == set(modules)


def test_rejects_bad_magic():
    blob = serialize(builtin_topology("S"), random_modules(builtin_topology("S"), 0))
    with pytest.raises(ValueError, match="not a weight file"):
        parse(b"XXXX" + blob[4:])


def test_rejects_unknown_version():
    blob = serialize(builtin_topology("S"), random_modules(builtin_topology("S"), 0))
    bad = blob[:4] + b"\x09\x00" + blob[6:]
    with pytest.raises(ValueError, match="version"):
        parse(bad)


def test_rejects_truncation_and_trailing_bytes():
    blob = serialize(builtin_topology("S"), random_modules(builtin_topology("S"), 0))
    with pytest.raises(ValueError, match="truncated"):
        parse(blob[:-3])
    with pytest.raises(ValueError, match="trailing"):
        parse(blob + b"\x00")


def test_serialize_rejects_wrong_layer_shape():
    topo = builtin_topology("S")
    modules = random_modules(topo, 1)
    w, b = modules[(0, 0, 0)][1]
    modules[(0, 0, 0)][1] = (w[:, :-1], b)
    with pytest.raises(ValueError, match="shape"):
        serialize(topo, modules)
