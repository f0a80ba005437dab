import pytest
from hypothesis import given, strategies as st

from regenquorum.code_model import (
    CodeParams,
    FootprintMatrix,
    ParamViolation,
    QuorumValues,
    footprint,
    gifford_check,
    quorum_values,
    validate_params,
)


def test_nccloud_quorums():
    p = validate_params(CodeParams(N=8, n=8, k=2, d=3, alpha=1, beta=1, q=8))
    assert quorum_values(p) == QuorumValues(r=2, w=8, rep=3)


def test_partial_footprint_quorums():
    p = CodeParams(N=10, n=20, k=4, d=6, alpha=2, beta=1, q=6)
    qv = quorum_values(p)
    assert (qv.r, qv.w, qv.rep) == (8, 6, 6)
    assert qv.for_kind("read") == 8 and qv.for_kind("repair") == 6


@pytest.mark.parametrize("bad, rule", [
    (dict(k=0), "0 < k"),
    (dict(d=1), "k <= d"),
    (dict(d=8), "d < N"),
    (dict(beta=3), "beta <= alpha"),
    (dict(q=17), "q <= N*alpha"),
    (dict(alpha=1, n=9, beta=1), "alpha == 1 implies n == N"),
])
def test_each_rule_is_named(bad, rule):
    base = dict(N=8, n=16, k=2, d=3, alpha=2, beta=1, q=4)
    base.update(bad)
    with pytest.raises(ParamViolation, match=rule.replace("*", r"\*")):
        validate_params(CodeParams(**base))


@given(st.integers(2, 12), st.integers(1, 4), st.data())
def test_valid_params_give_quorums_within_bounds(N, alpha, data):
    k = data.draw(st.integers(1, N - 1))
    d = data.draw(st.integers(k, N - 1))
    beta = data.draw(st.integers(1, alpha))
    q = data.draw(st.integers(1, N * alpha))
    n = N if alpha == 1 else data.draw(st.integers(k + 1, N * alpha))
    qv = quorum_values(validate_params(CodeParams(N, n, k, d, alpha, beta, q)))
    assert qv.r == k * alpha <= N * alpha
    assert qv.w == q
    assert qv.rep == d * beta < N * alpha


def test_dense_footprint_is_all_chunks():
    f = FootprintMatrix.dense(3, 8)
    assert all(footprint(f, u) == frozenset(range(8)) for u in range(3))


def test_uniform_footprint_is_seeded_and_sized():
    a = FootprintMatrix.uniform(4, 5, 12, seed=7)
    b = FootprintMatrix.uniform(4, 5, 12, seed=7)
    assert a == b
    assert all(len(r) == 5 for r in a.rows)
    assert FootprintMatrix.uniform(4, 5, 12, seed=8) != a


def test_footprint_csv_round_trip():
    f = FootprintMatrix([[0, 3], [1, 2, 5]], 6)
    assert FootprintMatrix.from_csv(f.to_csv(), 6) == f


def test_footprint_rejects_bad_rows():
    with pytest.raises(ValueError):
        FootprintMatrix([[0, 9]], 6)
    with pytest.raises(ValueError):
        FootprintMatrix([[]], 6)
    with pytest.raises(IndexError):
        FootprintMatrix.dense(2, 4).footprint(2)


def test_gifford_is_informational():
    qv = QuorumValues(r=2, w=8, rep=3)
    rep = gifford_check(qv, 8)
    assert rep.read_write_overlap and rep.write_write_overlap and rep.satisfied
    weak = gifford_check(QuorumValues(r=2, w=3, rep=2), 8)
    assert not weak.satisfied
    assert not weak.read_write_overlap and not weak.write_write_overlap
