import itertools
import math

import numpy as np
import pytest

from adasg.multiindex import (
    CurvedWeights,
    IndexSet,
    is_lower,
    lambda_classic,
    lambda_curved,
    lower_completion,
    margin,
    read_index_set_csv,
    write_index_set_csv,
)


def brute_is_lower(members):
    """Definition-level oracle: every componentwise-smaller index is present."""
    s = set(members)
    d = len(next(iter(members)))
    for nu in members:
        for j in itertools.product(*[range(v + 1) for v in nu]):
            if j not in s:
                return False
    return True


def brute_completion(members):
    out = set()
    for nu in members:
        out.update(itertools.product(*[range(v + 1) for v in nu]))
    return out


def random_lower_set(rng, d, n):
    """Grow a lower set by repeatedly adding a random margin index."""
    s = IndexSet(d, [(0,) * d])
    while len(s) < n:
        cands = margin(s)
        pick = cands[rng.integers(len(cands))]
        s = IndexSet(d, set(s.members) | {pick}, lower_flag=True)
    return s


def test_is_lower_examples():
    assert is_lower(IndexSet(2, [(0, 0), (1, 0), (0, 1)]))
    assert not is_lower(IndexSet(2, [(1, 1)]))
    assert not is_lower(IndexSet(2, [(0, 0), (2, 0)]))


def test_is_lower_matches_bruteforce():
    rng = np.random.default_rng(11)
    for _ in range(40):
        d = int(rng.integers(1, 4))
        members = {tuple(rng.integers(0, 4, d)) for _ in range(rng.integers(1, 8))}
        assert is_lower(IndexSet(d, members)) == brute_is_lower(members)


def test_lower_completion_examples():
    got = lower_completion(IndexSet(2, [(1, 1)]))
    assert set(got.members) == {(0, 0), (1, 0), (0, 1), (1, 1)}
    got2 = lower_completion(IndexSet(2, [(2, 0), (0, 1)]))
    assert set(got2.members) == {(0, 0), (1, 0), (2, 0), (0, 1)}


def test_lower_completion_idempotent_monotone():
    rng = np.random.default_rng(3)
    for _ in range(25):
        d = int(rng.integers(1, 4))
        members = {tuple(rng.integers(0, 4, d)) for _ in range(rng.integers(1, 6))}
        s = IndexSet(d, members)
        comp = lower_completion(s)
        assert set(comp.members) == brute_completion(members)
        assert lower_completion(comp) == comp
        bigger = IndexSet(d, set(members) | {tuple(rng.integers(0, 4, d))})
        assert comp.issubset(lower_completion(bigger))


def test_lower_input_unchanged():
    rng = np.random.default_rng(4)
    s = random_lower_set(rng, 2, 7)
    assert lower_completion(s) == s


def test_lambda_curved_isotropic_reduces_to_td():
    w = CurvedWeights((1.0, 1.0), (0.0, 0.0))
    got = lambda_curved(w, 2.0)
    assert set(got.members) == {(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)}


def test_lambda_curved_negative_beta_dip():
    # alpha=1, beta=-2: weight dips below L=1 out to nu=4 and exceeds at nu=5
    got = lambda_curved(CurvedWeights((1.0,), (-2.0,)), 1.0)
    assert set(got.members) == {(0,), (1,), (2,), (3,), (4,)}


def test_lambda_curved_membership_oracle():
    # direct inequality scan over a safe box
    rng = np.random.default_rng(12)
    for _ in range(20):
        d = int(rng.integers(1, 4))
        alpha = tuple(rng.uniform(0.4, 2.0, d))
        beta = tuple(rng.uniform(-1.5, 1.5, d))
        L = float(rng.uniform(0.0, 4.0))
        got = lambda_curved(CurvedWeights(alpha, beta), L)
        cap = 40
        raw = set()
        for nu in itertools.product(range(cap), repeat=d):
            w = sum(alpha[k] * nu[k] + beta[k] * math.log(nu[k] + 1) for k in range(d))
            if w <= L:
                raw.add(nu)
        assert set(got.members) == brute_completion(raw) if raw else len(got) == 0


def test_lambda_curved_empty_below_origin():
    assert len(lambda_curved(CurvedWeights((1.0, 2.0), (0.5, -0.5)), -0.1)) == 0


def test_lambda_curved_rejects_nonpositive_alpha():
    with pytest.raises(ValueError):
        lambda_curved(CurvedWeights((0.0, 1.0), (0.0, 0.0)), 1.0)


def test_lambda_curved_nested_in_level():
    w = CurvedWeights((0.8, 1.7), (-0.9, 0.4))
    for L1, L2 in [(0.5, 1.0), (1.0, 3.0), (3.0, 3.0)]:
        assert lambda_curved(w, L1).issubset(lambda_curved(w, L2))


def test_lambda_curved_beta_zero_equals_total_degree_exactly():
    rng = np.random.default_rng(9)
    for _ in range(10):
        d = int(rng.integers(1, 4))
        alpha = tuple(rng.uniform(0.3, 2.5, d))
        L = float(rng.uniform(0.0, 5.0))
        a = lambda_curved(CurvedWeights(alpha, (0.0,) * d), L)
        b = lambda_classic("total_degree", alpha, L)
        assert a == b


def test_lambda_curved_scale_invariance_power_of_two():
    # doubling (alpha, beta, L) is exact in floating point
    w = CurvedWeights((0.7, 1.3), (-0.6, 0.2))
    for L in (0.9, 2.3, 4.0):
        base = lambda_curved(w, L)
        for c in (2.0, 0.5, 4.0):
            scaled = CurvedWeights(tuple(c * a for a in w.alpha),
                                   tuple(c * b for b in w.beta))
            assert lambda_curved(scaled, c * L) == base


def test_lambda_classic_examples():
    td = lambda_classic("total_degree", (1.0, 1.0), 1.0)
    assert set(td.members) == {(0, 0), (1, 0), (0, 1)}
    hc = lambda_classic("hyperbolic", (1.0, 1.0), 3.0)
    assert set(hc.members) == {(0, 0), (1, 0), (0, 1), (2, 0), (0, 2)}
    sm = lambda_classic("smolyak", (1.0,), 2.0)
    assert set(sm.members) == {(0,), (1,), (2,), (3,)}


def test_lambda_classic_tensor_cardinality():
    for d in (1, 2, 3):
        for L in (0.0, 1.0, 2.0, 3.5):
            got = lambda_classic("tensor", (1.0,) * d, L)
            assert len(got) == (int(L) + 1) ** d


def test_lambda_classic_oracle():
    rng = np.random.default_rng(21)
    defs = {
        "tensor": lambda a, nu, L: max(a[k] * nu[k] for k in range(len(nu))) <= L,
        "total_degree": lambda a, nu, L: sum(a[k] * nu[k] for k in range(len(nu))) <= L,
        "hyperbolic": lambda a, nu, L: math.prod((nu[k] + 1) ** a[k] for k in range(len(nu))) <= L,
        "smolyak": lambda a, nu, L: sum(a[k] * math.log2(nu[k] + 1) for k in range(len(nu))) <= L,
    }
    for kind, member in defs.items():
        for _ in range(6):
            d = int(rng.integers(1, 3))
            alpha = tuple(rng.uniform(0.5, 1.5, d))
            L = float(rng.uniform(0.5, 4.0))
            got = set(lambda_classic(kind, alpha, L).members)
            ref = {nu for nu in itertools.product(range(30), repeat=d) if member(alpha, nu, L)}
            assert got == ref, (kind, alpha, L)


def test_margin_of_lower_set():
    s = IndexSet(2, [(0, 0), (1, 0)])
    assert margin(s) == [(0, 1), (2, 0)] or set(margin(s)) == {(0, 1), (2, 0)}
    assert margin(IndexSet(2, [])) == [(0, 0)]


def test_graded_lex_storage_order():
    s = IndexSet(2, [(2, 0), (0, 0), (1, 1), (0, 1), (1, 0)])
    assert s.members == ((0, 0), (0, 1), (1, 0), (1, 1), (2, 0))


def test_duplicates_rejected():
    with pytest.raises(ValueError):
        IndexSet(2, [(0, 0), (0, 0)])


def test_csv_round_trip(tmp_path):
    s = lambda_curved(CurvedWeights((1.0, 1.4), (-0.3, 0.2)), 3.0)
    path = tmp_path / "set.csv"
    write_index_set_csv(s, path)
    assert path.read_text().splitlines()[0] == "nu_1,nu_2"
    assert read_index_set_csv(path) == s
