import numpy as np
import pytest

from gfdetect import _backend
from gfdetect.rng import (
    RNG_ALGORITHM,
    TrialStream,
    complex_normal_from_uniforms,
    philox4x32,
    uniform_block,
)

# Random123 known-answer vectors for philox4x32-10
KAT = [
    ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
    ((0xFFFFFFFF,) * 4, (0xFFFFFFFF,) * 2, (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
    ((0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344), (0xA4093822, 0x299F31D0),
     (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1)),
]


@pytest.mark.parametrize("ctr,key,expect", KAT)
def test_philox_known_answers(ctr, key, expect):
    out = philox4x32(*ctr, *key)
    assert tuple(int(w) for w in out) == expect


def test_uniforms_open_interval_and_mean():
    u = uniform_block(3, 0, np.arange(200), 0, 500)
    assert u.shape == (200, 500)
    assert u.min() > 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.002


def test_uniform_block_offsets_consistent():
    full = uniform_block(11, 1, [5], 0, 9)[0]
    for start in range(9):
        np.testing.assert_array_equal(uniform_block(11, 1, [5], start, 9 - start)[0], full[start:])


def test_streams_differ_by_seed_trial_tag():
    base = uniform_block(1, 0, [0], 0, 8)[0]
    for args in ((2, 0, [0]), (1, 1, [0]), (1, 0, [1]), (1 + 2**32, 0, [0]), (1, 0, [2**32])):
        assert not np.array_equal(uniform_block(*args, 0, 8)[0], base)


def test_trial_stream_sequential():
    s = TrialStream(seed=9, trial=4, tag=1)
    a = s.uniforms(3)
    b = s.uniforms(4)
    assert s.position == 7
    np.testing.assert_array_equal(np.concatenate([a, b]), uniform_block(9, 1, [4], 0, 7)[0])
    z = s.complex_normals(2)
    assert s.position == 11
    np.testing.assert_array_equal(z, complex_normal_from_uniforms(uniform_block(9, 1, [4], 7, 4)[0]))


def test_trial_stream_seed_range():
    with pytest.raises(ValueError):
        TrialStream(seed=-1, trial=0)
    with pytest.raises(ValueError):
        TrialStream(seed=2**64, trial=0)


def test_complex_normal_moments():
    z = complex_normal_from_uniforms(uniform_block(5, 0, np.arange(400), 0, 1000))
    assert abs(np.mean(np.abs(z) ** 2) - 1.0) < 0.01
    assert abs(np.mean(z)) < 0.01
    assert abs(np.mean(z.real**2) - 0.5) < 0.01
    assert abs(np.mean(z.real * z.imag)) < 0.01


def test_algorithm_tag():
    assert RNG_ALGORITHM == "philox4x32-10/v1"


@pytest.mark.parametrize("name", _backend.available())
def test_backend_uniforms_bitwise(name):
    mod = _backend.load(name)
    for seed, tag, trial, start, n in ((0, 0, 0, 0, 7), (2**63 + 5, 1, 2**40, 3, 12)):
        np.testing.assert_array_equal(
            np.asarray(mod.uniforms(seed, tag, trial, start, n)),
            uniform_block(seed, tag, [trial], start, n)[0],
        )
