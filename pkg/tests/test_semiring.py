import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fisum.errors import IngestionError
from fisum.semiring import (MAX_PLUS, REAL, Semiring, decode_value, encode_value,
                            get_semiring, register, sadd, smul, sone, szero)

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)
maxplus_vals = st.one_of(finite, st.just(-math.inf))


def test_units():
    assert szero("real") == 0.0
    assert szero("max-plus") == -math.inf
    assert sone("real") == 1.0
    assert sone("max-plus") == 0.0


@pytest.mark.parametrize("tag, a, b, add, mul", [
    ("real", 2, 3, 5, 6),
    ("max-plus", 2, 3, 3, 5),
    ("max-plus", -math.inf, 7, 7, -math.inf),
    ("max-plus", -math.inf, 3, 3, -math.inf),
])
def test_operations(tag, a, b, add, mul):
    assert sadd(tag, a, b) == add
    assert smul(tag, a, b) == mul


@pytest.mark.parametrize("tag", ["real", "max-plus"])
@given(v=finite)
def test_unit_laws(tag, v):
    assert sadd(tag, szero(tag), v) == v
    assert smul(tag, sone(tag), v) == v
    assert smul(tag, szero(tag), v) == szero(tag)


@given(a=maxplus_vals, b=maxplus_vals, c=maxplus_vals)
def test_maxplus_laws_exact(a, b, c):
    t = "max-plus"
    assert sadd(t, a, b) == sadd(t, b, a)
    assert smul(t, a, b) == smul(t, b, a)
    assert sadd(t, sadd(t, a, b), c) == sadd(t, a, sadd(t, b, c))
    assert smul(t, a, sadd(t, b, c)) == sadd(t, smul(t, a, b), smul(t, a, c))


@given(a=finite, b=finite, c=finite)
def test_real_laws(a, b, c):
    t = "real"
    assert sadd(t, a, b) == sadd(t, b, a)
    assert smul(t, a, b) == smul(t, b, a)
    lhs = smul(t, a, sadd(t, b, c))
    rhs = sadd(t, smul(t, a, b), smul(t, a, c))
    scale = abs(a) * (abs(b) + abs(c))
    assert abs(lhs - rhs) <= 1e-12 * max(scale, 1e-300)


def test_associativity_real_tolerance():
    rng = np.random.default_rng(3)
    for a, b, c in rng.standard_normal((1000, 3)):
        x = sadd("real", sadd("real", a, b), c)
        y = sadd("real", a, sadd("real", b, c))
        assert abs(x - y) <= 1e-12 * (abs(a) + abs(b) + abs(c))


@given(v=maxplus_vals)
def test_value_roundtrip(v):
    back = decode_value(json.loads(json.dumps(encode_value(v))))
    assert np.float64(back).tobytes() == np.float64(v).tobytes()


def test_ingestion_rejects_bad_values():
    with pytest.raises(IngestionError):
        REAL.check([1.0, np.nan])
    with pytest.raises(IngestionError):
        REAL.check([-np.inf])
    with pytest.raises(IngestionError):
        MAX_PLUS.check([np.inf])
    MAX_PLUS.check([-np.inf, 0.0])


def test_tags_and_extension():
    assert get_semiring("real") is REAL
    assert get_semiring("max-plus") is MAX_PLUS
    with pytest.raises(ValueError):
        get_semiring("min-plus")

    class MinPlus(Semiring):
        name = "min-plus-test"
        zero = math.inf
        one = 0.0
        add = np.minimum
        mul = np.add

    register(MinPlus())
    assert sadd("min-plus-test", 2, 3) == 2
