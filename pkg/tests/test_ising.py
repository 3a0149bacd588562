import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qasbias.errors import DegenerateModelError, DimensionError
from qasbias.exact_cover import ProblemInstance, SpinConfiguration, cost_vector, generate_instance, total_cost
from qasbias.ising import (
    H_RANGE,
    J_RANGE,
    IsingModel,
    encode_ising,
    energy_vector,
    ising_energy,
    load_model,
    rescale,
    save_model,
)


def single_clause():
    return encode_ising(ProblemInstance(3, ((0, 1, 2),)))


def test_encode_single_clause():
    m = single_clause()
    assert m.couplings == {(0, 1): 2, (0, 2): 2, (1, 2): 2}
    assert m.fields == (-2, -2, -2)
    assert m.offset == 4


def test_encode_two_clauses():
    m = encode_ising(ProblemInstance(4, ((0, 1, 2), (1, 2, 3))))
    assert m.couplings == {(0, 1): 2, (0, 2): 2, (1, 2): 4, (1, 3): 2, (2, 3): 2}
    assert m.fields == (-2, -4, -4, -2)
    assert m.offset == 8


def test_encode_empty():
    m = encode_ising(ProblemInstance(5, ()))
    assert m.is_zero() and m.offset == 0


def test_ising_energy_examples():
    m = single_clause()
    assert ising_energy(m, SpinConfiguration((1, 1, -1))) == 0
    assert ising_energy(m, SpinConfiguration((1, 1, 1))) == 4
    z = IsingModel(3, {}, (0, 0, 0), 0)
    assert ising_energy(z, SpinConfiguration((1, -1, 1))) == 0
    with pytest.raises(DimensionError):
        ising_energy(m, SpinConfiguration((1, 1)))


instances = st.integers(4, 10).flatmap(
    lambda n: st.tuples(
        st.just(n),
        st.sets(st.sampled_from(list(itertools.combinations(range(n), 3))), max_size=14),
    )
)


@settings(max_examples=40)
@given(instances)
def test_energy_equals_cost_everywhere(cs):
    n, clauses = cs
    inst = ProblemInstance(n, tuple(clauses))
    m = encode_ising(inst)
    e = energy_vector(m)
    assert e.dtype == np.int64
    np.testing.assert_array_equal(e, cost_vector(inst))
    for k in (0, (1 << n) - 1, 5 % (1 << n)):
        c = SpinConfiguration.from_int(k, n)
        assert ising_energy(m, c) == total_cost(inst, c)


@given(instances, instances)
def test_encoding_is_additive(a, b):
    n = max(a[0], b[0])
    ia, ib = ProblemInstance(n, tuple(a[1])), ProblemInstance(n, tuple(b[1] - a[1]))
    union = ProblemInstance(n, tuple(set(a[1]) | set(b[1])))
    ea, eb, eu = encode_ising(ia), encode_ising(ib), encode_ising(union)
    keys = set(ea.couplings) | set(eb.couplings)
    assert {k: ea.couplings.get(k, 0) + eb.couplings.get(k, 0) for k in keys} == {
        k: v for k, v in eu.couplings.items()
    }
    assert tuple(x + y for x, y in zip(ea.fields, eb.fields)) == eu.fields
    assert ea.offset + eb.offset == eu.offset


def test_rescale_examples():
    m = IsingModel(3, {(0, 1): 2, (1, 2): -1}, (-4, 0, -1), 0)
    scaled, k = rescale(m)
    # J bound 1/2, h bound 2/4
    assert k == 0.5
    assert scaled.couplings[(0, 1)] == 1.0
    assert scaled.fields[0] == -2.0

    inside = IsingModel(2, {(0, 1): 1}, (-1, 0.5), 0)
    _, k = rescale(inside)
    assert k == 1.0

    stretched = IsingModel(2, {(0, 1): 0.25}, (0.1, 0), 0)
    _, k = rescale(stretched)
    assert k == pytest.approx(4.0)

    s, k = rescale(single_clause())
    assert k == 0.5
    assert set(s.couplings.values()) == {1.0}
    assert s.fields == (-1.0, -1.0, -1.0)
    assert s.offset == 2.0
    assert s.scale_factor == 0.5


def test_rescale_degenerate():
    with pytest.raises(DegenerateModelError):
        rescale(IsingModel(3, {}, (0, 0, 0), 5))


def test_rescale_joint_fields():
    m = single_clause()
    # bias contribution -mu = -1 on spin 0 makes the field -3 before scaling
    _, k = rescale(m, extra_fields=[-1.0, 0.0, 0.0])
    assert k == pytest.approx(min(Fraction(1, 2), Fraction(2, 3)))
    _, k = rescale(m, extra_fields=[-3.0, 0.0, 0.0])
    assert k == pytest.approx(2 / 5)


@settings(max_examples=30, deadline=None)
@given(st.integers(5, 11), st.integers(0, 2**31))
def test_rescale_box_and_argmin(n, seed):
    inst = generate_instance(n, seed)
    m = encode_ising(inst)
    s, k = rescale(m)
    assert k > 0
    J = np.array(list(s.couplings.values()))
    h = np.array(s.fields)
    tol = 1e-12
    assert np.all(J >= J_RANGE[0] - tol) and np.all(J <= J_RANGE[1] + tol)
    assert np.all(h >= H_RANGE[0] - tol) and np.all(h <= H_RANGE[1] + tol)
    tight = (
        np.isclose(J.max(), J_RANGE[1]) or np.isclose(J.min(), J_RANGE[0])
        or np.isclose(h.max(), H_RANGE[1]) or np.isclose(h.min(), H_RANGE[0])
    )
    assert tight
    e0, e1 = energy_vector(m), energy_vector(s)
    assert set(np.flatnonzero(e0 == e0.min())) == set(np.flatnonzero(np.isclose(e1, e1.min())))
    np.testing.assert_allclose(e1, k * e0, atol=1e-9)


def test_model_round_trip(tmp_path):
    s, _ = rescale(encode_ising(generate_instance(8, 3)))
    path = tmp_path / "m.json"
    save_model(s, path)
    back = load_model(path)
    assert back == s
    assert back.scale_factor == s.scale_factor
