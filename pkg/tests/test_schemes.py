"""Induced-scheme constructors, validation, and tail masses."""

import numpy as np
import pytest

from towerlab._rat import Q, ONE
from towerlab.schemes import (
    TailProfile,
    build_doubling_first_return,
    build_lsv_induced,
    build_piecewise_linear_gm,
    tail_mass,
    truncate_and_renormalize,
    validate_scheme,
)


# -- doubling first-return scheme ------------------------------------------


def test_doubling_branch_measures_by_direct_iteration():
    # oracle: enumerate first-return branches of 2x mod 1 to [0,1/2) directly
    # by refining [0,1/2) into dyadic cells and iterating exactly.
    scheme = build_doubling_first_return(depth=8)
    cells = 2 ** 12
    counts = {}
    for k in range(cells // 2):  # cells inside [0, 1/2)
        x = Q(2 * k + 1, 2 * cells)  # cell midpoint
        y = x
        for n in range(1, 13):
            y = 2 * y
            if y >= 1:
                y -= 1
            if y < Q(1, 2):
                counts[n] = counts.get(n, 0) + 1
                break
    total = cells // 2
    assert Q(counts[1], total) == Q(1, 2)
    assert Q(counts[2], total) == Q(1, 4)
    assert scheme.branch("a1").measure == Q(1, 2)
    assert scheme.branch("a2").measure == Q(1, 4)


def test_doubling_represented_mass_geometric_series():
    scheme = build_doubling_first_return(depth=20)
    assert scheme.represented_mass() == 1 - Q(1, 2) ** 20
    assert scheme.total_measure() == 1
    assert scheme.mean_return_time() == 2


def test_doubling_passes_validation():
    scheme = build_doubling_first_return(depth=12)
    report = validate_scheme(scheme, samples=2000, seed=1)
    assert report.ok
    assert report.violations == {"expansion": 0, "intermediate": 0,
                                 "bijectivity": 0, "distortion": 0}


def test_overstated_lambda_is_caught():
    scheme = build_doubling_first_return(depth=6)
    report = validate_scheme(scheme, samples=2000, seed=2, lambda_override=Q(3))
    assert report.violations["expansion"] > 0


# -- synthetic piecewise-linear schemes ------------------------------------


def test_gm_basic_construction():
    s = build_piecewise_linear_gm([Q(1, 2), Q(1, 2)], [1, 2])
    assert [b.slope for b in s.branches] == [2, 2]
    assert s.lambda_factor == 2


def test_gm_word_height_additivity():
    s = build_piecewise_linear_gm([Q(1, 4), Q(1, 4), Q(1, 2)], [1, 3, 2])
    assert s.lambda_factor == 2
    assert s.branch("b0").tau + s.branch("b1").tau == 4  # height of "b0 b1"


def test_gm_full_shift_degenerate_roof():
    s = build_piecewise_linear_gm([Q(1, 2), Q(1, 2)], [1, 1])
    assert s.max_tau == 1
    assert s.ambient is not None  # induced map == ambient map


def test_gm_rejections():
    with pytest.raises(ValueError):
        build_piecewise_linear_gm([Q(1, 2), Q(1, 3)], [1, 2])  # mass != 1
    with pytest.raises(ValueError):
        build_piecewise_linear_gm([ONE], [1])  # lambda <= 1


# -- LSV scheme --------------------------------------------------------------


def test_lsv_tau1_branch_endpoint():
    s = build_lsv_induced(0.5, 20)
    b = s.branch("a1")
    # tau=1 branch is [3/4, 1] in original coords = [1/2, 1] rescaled
    assert abs(float(b.lo) - 0.5) < 1e-10
    assert abs(float(b.hi) - 1.0) < 1e-12


def test_lsv_tail_exponent_matches_simulation():
    s = build_lsv_induced(0.5, 50)
    # oracle: simulate first-return times directly by iterating the map
    rng = np.random.default_rng(3)
    n_sim = 4000
    taus = np.empty(n_sim)
    for i in range(n_sim):
        x = rng.uniform(0.5, 1.0)
        for n in range(1, 2000):
            x = x * (1.0 + (2.0 * x) ** 0.5) if x < 0.5 else 2.0 * x - 1.0
            if x >= 0.5:
                taus[i] = n
                break
        else:
            taus[i] = 2000
    ells = np.arange(10, 51)
    emp = np.array([(taus >= l).mean() for l in ells])
    sch = np.array([float(tail_mass(s, int(l))[0]) for l in ells])
    fit_emp = np.polyfit(np.log(ells), np.log(emp), 1)[0]
    fit_sch = np.polyfit(np.log(ells), np.log(sch), 1)[0]
    assert abs(fit_sch - (-2.0)) < 0.3
    assert abs(fit_emp - fit_sch) < 0.35


def test_lsv_truncation_warning_and_validation():
    s1 = build_lsv_induced(0.5, 1)
    assert len(s1.branches) == 1 and float(s1.truncation_deficit) > 0
    assert s1.mass_warning
    s = build_lsv_induced(0.5, 30)
    report = validate_scheme(s, samples=1500, seed=4)
    assert report.violations["expansion"] == 0
    assert report.violations["bijectivity"] == 0


# -- tail masses --------------------------------------------------------------


def test_tail_mass_doubling_exact():
    s = build_doubling_first_return(depth=20)
    val, deficit = tail_mass(s, 3)
    assert val == Q(1, 4) and deficit == 0
    assert tail_mass(s, 1)[0] == 1


def test_tail_mass_pwl():
    s = build_piecewise_linear_gm([Q(1, 2), Q(1, 2)], [1, 2])
    assert tail_mass(s, 2)[0] == Q(1, 2)
    assert tail_mass(s, 1)[0] == 1


def test_tail_mass_monotone():
    s = build_doubling_first_return(depth=10)
    vals = [tail_mass(s, l)[0] for l in range(1, 15)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_truncate_and_renormalize():
    s = build_doubling_first_return(depth=20)
    t = truncate_and_renormalize(s, 6)
    assert t.represented_mass() == 1
    assert t.truncation_deficit == Q(1, 64)
    assert [b.tau for b in t.branches] == [1, 2, 3, 4, 5, 6]


def test_tail_profile_validation():
    TailProfile("exponential", beta=0.7)
    TailProfile("polynomial", beta=2.0)
    with pytest.raises(ValueError):
        TailProfile("polynomial", beta=0.9)
    with pytest.raises(ValueError):
        TailProfile("nope", beta=1.0)


def test_scheme_json_roundtrip():
    from towerlab.schemes import InducedScheme

    s = build_doubling_first_return(depth=5)
    doc = s.to_json()
    s2 = InducedScheme.from_json(doc)
    assert s2.branch("a3").measure == Q(1, 8)
    assert s2.total_measure() == 1
