"""Exact disintegration, refinement, and moment-transfer checks."""

import numpy as np
import pytest

from towerlab._rat import Q, ONE, ZERO
from towerlab.coding import TrivialWordLaw, Word
from towerlab.disintegration import (
    refine,
    trivial_disintegration,
    verify_moment_transfer,
    verify_pushforward_identity,
    verify_refinement_consistency,
)
from towerlab.schemes import (
    TailProfile,
    build_doubling_first_return,
    build_lsv_induced,
    build_piecewise_linear_gm,
)


def test_trivial_doubling_masses_and_supports():
    s = build_doubling_first_return(depth=10)
    d = trivial_disintegration(s)
    for w, m in d.word_law.items():
        n = w.height
        assert m == Q(1, 2) ** n
        cyl = d.conditionals[w]
        assert cyl.exact_mass == m
    assert d.residual == Q(1, 2) ** 10  # tail-closure mass beyond the alphabet


def test_trivial_full_shift_bernoulli():
    s = build_piecewise_linear_gm([Q(1, 2), Q(1, 2)], [1, 1])
    d = trivial_disintegration(s)
    masses = sorted(m for _, m in d.word_law.items())
    assert masses == [Q(1, 2), Q(1, 2)]
    assert d.residual == 0


def test_trivial_rejects_nonaffine():
    s = build_lsv_induced(0.5, 10)
    with pytest.raises(ValueError, match="Jacobian"):
        trivial_disintegration(s)


def test_refine_doubling_products():
    s = build_doubling_first_return(depth=6)
    d = trivial_disintegration(s)
    r = refine(d, 1)
    for (w, m) in r.word_law.items():
        if len(w) == 2:
            i, j = (int(a[1:]) for a in w.letters)
            assert m == Q(1, 2) ** (i + j)
    assert refine(d, 0) is d


def test_refine_full_shift_uniform_cells():
    s = build_piecewise_linear_gm([Q(1, 2), Q(1, 2)], [1, 1])
    d = trivial_disintegration(s)
    r = refine(d, 2)
    items = r.word_law.items()
    assert len(items) == 8
    assert all(m == Q(1, 8) for _, m in items)
    assert r.residual == 0


def test_refinement_marginal_consistency():
    s = build_doubling_first_return(depth=6)
    d = trivial_disintegration(s)
    r = refine(d, 1)
    assert verify_refinement_consistency(d, r)


def test_pushforward_identity_exact():
    s = build_doubling_first_return(depth=6)
    d = trivial_disintegration(s)
    rep = verify_pushforward_identity(d, depth=2, symbols=["a1", "a2", "a3"])
    assert rep["ok"] and rep["checked"] > 0


def test_conditional_supported_on_cylinder():
    s = build_doubling_first_return(depth=6)
    d = trivial_disintegration(s)
    w = Word.of(["a2"], s)
    other = Word.of(["a3"], s)
    assert d.conditional_mass_on(w, w.concat(w)) == Q(1, 4)
    assert d.conditional_mass_on(w, other) == ZERO


# -- moment transfer -----------------------------------------------------------


def test_moment_transfer_polynomial_lsv():
    s = build_lsv_induced(0.5, 50)
    # adapted trivial law: represented branches renormalized (h = tau)
    masses = {Word((b.symbol,), b.tau): b.measure for b in s.branches}
    total = sum(masses.values())
    from towerlab.coding import FiniteWordLaw

    law = FiniteWordLaw({w: Q(m / total) for w, m in masses.items()})
    profile = TailProfile("polynomial", beta=2.0)
    rep = verify_moment_transfer(s, law, profile, n_samples=200_000, seed=1)
    assert not rep["inconclusive"]
    assert abs(rep["fitted_exponent"] - rep["tau_tail_exponent"]) <= 0.3
    assert rep["ok"]


def test_moment_transfer_exponential_doubling():
    s = build_doubling_first_return(depth=20)
    law = TrivialWordLaw(s)
    profile = TailProfile("exponential", beta=0.4)  # beta' = 0.2 < log 2
    rep = verify_moment_transfer(s, law, profile, n_samples=100_000, seed=2)
    assert rep["ok"]
    assert np.isfinite(rep["moment_estimate"])


def test_moment_transfer_survival_at_one():
    s = build_doubling_first_return(depth=8)
    law = TrivialWordLaw(s)
    rep = verify_moment_transfer(s, law, TailProfile("exponential", beta=0.4),
                                 n_samples=1000, seed=3)
    assert rep["survival_at_1"] == 1.0


def test_disintegration_json_export():
    s = build_doubling_first_return(depth=5)
    d = trivial_disintegration(s)
    doc = d.to_json()
    assert doc["depth"] == 1
    assert len(doc["words"]) == 5
    assert all(set(w) == {"letters", "prob", "support"} for w in doc["words"])
