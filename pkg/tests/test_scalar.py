"""Audited scalar kernel: must agree with the vectorized engine bit for bit
while touching no multiply or divide on the lookup path."""

import numpy as np
import pytest

from lutsr import engine, model, scalar
from lutsr.rng import SplitMix64


def _random_image(stream, w, h):
    return stream.fill_bytes(h * w * 3).reshape(h, w, 3)


@pytest.mark.parametrize("name", ["S", "M", "1-2"])
def test_scalar_matches_engine(name):
    topo = model.builtin_topology(name, 8)
    container = model.random_container(topo, seed=90)
    stream = SplitMix64(91)
    img = _random_image(stream, 6, 5)
    want = engine.super_resolve(img, container)
    got = scalar.super_resolve_scalar(img, container)
    assert got.dtype == np.uint8 and got.shape == want.shape
    assert np.array_equal(got, want)


def test_scalar_matches_engine_quad():
    # the quad query block exercises four-group packing
    topo = model.builtin_topology("1-4", 8)
    container = model.random_container(topo, seed=92)
    img = _random_image(SplitMix64(93), 4, 4)
    assert np.array_equal(
        scalar.super_resolve_scalar(img, container),
        engine.super_resolve(img, container),
    )


def test_audit_counts_no_mul_no_div():
    topo = model.builtin_topology("S", 8)
    container = model.random_container(topo, seed=94)
    img = _random_image(SplitMix64(95), 4, 3)
    audit = scalar.OpAudit()
    scalar.super_resolve_scalar(img, container, audit=audit)
    assert audit.muls == 0
    assert audit.divs == 0
    assert audit.lookups > 0
    assert audit.adds > 0
    assert audit.shifts > 0
    assert audit.total() == (
        audit.adds + audit.shifts + audit.compares + audit.lookups
    )


def test_audit_scales_with_pixels():
    topo = model.builtin_topology("S", 8)
    container = model.random_container(topo, seed=96)
    a1, a2 = scalar.OpAudit(), scalar.OpAudit()
    scalar.super_resolve_scalar(_random_image(SplitMix64(97), 2, 2), container, audit=a1)
    scalar.super_resolve_scalar(_random_image(SplitMix64(97), 4, 4), container, audit=a2)
    assert a2.lookups > a1.lookups
    assert a2.total() > a1.total()


def test_scalar_zero_tables_nearest_neighbor():
    topo = model.builtin_topology("S", 8)
    container = model.zero_container(topo)
    img = _random_image(SplitMix64(98), 5, 4)
    got = scalar.super_resolve_scalar(img, container)
    assert np.array_equal(got, np.repeat(np.repeat(img, 4, axis=0), 4, axis=1))
