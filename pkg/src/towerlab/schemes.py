"""Concrete induced schemes for nonuniformly expanding interval maps.

An induced scheme is the data of a full-branch expanding return map on a
reference interval Y (rescaled here to [0,1]): an at most countable family of
branch domains with return times tau(a), branch measures m(a) summing to 1, a
uniform expansion factor lambda > 1, a distortion bound K, and the constant
C_ell controlling intermediate iterates.

Three families are provided:

* the first-return scheme of the doubling map x -> 2x mod 1 to Y = [0, 1/2)
  (geometric return-time tail, exact dyadic branch data),
* synthetic piecewise-linear full-branch schemes with prescribed branch
  measures and return times (exact rational data),
* the first-return scheme of the intermittent (LSV) map to Y = [1/2, 1]
  (polynomial tail; float branch data found by bisection).

Affine schemes carry exact rational endpoints/measures and constant branch
slopes, so downstream modules can verify measure identities as exact rational
equalities.  Countable alphabets are truncated at a configured depth; the
residual mass is tracked, and for the doubling scheme an exact geometric tail
closure keeps totals exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from ._rat import Q, ONE, ZERO, rat_str, parse_rat, geometric_tail

__all__ = [
    "Branch",
    "GeometricTail",
    "InducedScheme",
    "TailProfile",
    "ValidationReport",
    "build_doubling_first_return",
    "build_piecewise_linear_gm",
    "build_lsv_induced",
    "validate_scheme",
    "tail_mass",
    "truncate_and_renormalize",
]


@dataclass(frozen=True)
class Branch:
    """One full branch of the induced map, in Y-rescaled coordinates [0,1]."""

    symbol: str
    tau: int
    lo: object
    hi: object
    measure: object
    slope: object = None  # 1/measure for affine full branches, None otherwise
    branch_lambda: float = None  # inf |T_Y'| over the branch (non-affine schemes)

    def contains(self, x) -> bool:
        return self.lo <= x < self.hi or (x == self.hi and self.hi == 1)


@dataclass(frozen=True)
class GeometricTail:
    """Exact closure for an untruncated geometric alphabet tail.

    Represents branch measures m(a_n) = first * ratio^(n - start_tau) for all
    return times n >= start_tau, so that mass totals stay exact rationals.
    """

    start_tau: int
    first: object
    ratio: object

    def mass_from(self, ell: int):
        """Exact sum of m(a_n) over n >= max(ell, start_tau)."""
        if ell <= self.start_tau:
            return geometric_tail(self.first, self.ratio)
        return geometric_tail(self.first * self.ratio ** (ell - self.start_tau), self.ratio)

    def measure_of(self, tau: int):
        if tau < self.start_tau:
            raise ValueError("tau below tail start")
        return self.first * self.ratio ** (tau - self.start_tau)


@dataclass(frozen=True)
class TailProfile:
    """Declared return-time tail family: exponential(beta), polynomial(beta),
    or stretched_exponential(beta, gamma)."""

    kind: str
    beta: float
    gamma: float = 1.0
    constant: float = 1.0

    def __post_init__(self):
        if self.kind not in ("exponential", "polynomial", "stretched_exponential"):
            raise ValueError(f"unknown tail kind {self.kind!r}")
        if self.beta <= 0 or self.constant <= 0 or self.gamma <= 0:
            raise ValueError("tail parameters must be strictly positive")
        if self.kind == "polynomial" and self.beta <= 1:
            raise ValueError("polynomial tail requires beta > 1")
        if self.kind == "stretched_exponential" and not (0 < self.gamma <= 1):
            raise ValueError("stretched exponential requires gamma in (0,1]")


class AmbientMap:
    """Concrete ambient dynamics T on Lambda = [0,1] together with the
    embedding of the (rescaled) reference set Y into Lambda."""

    def __init__(self, step, y_lo, y_hi, exact: bool, step_slope_sup=2):
        self.step = step
        self.y_lo = y_lo
        self.y_hi = y_hi
        self.exact = exact
        self.step_slope_sup = step_slope_sup  # sup |T'| over Lambda

    def to_lambda(self, x_resc):
        return self.y_lo + x_resc * (self.y_hi - self.y_lo)

    def from_lambda(self, x):
        return (x - self.y_lo) / (self.y_hi - self.y_lo)

    def iterate(self, x, n: int):
        for _ in range(n):
            x = self.step(x)
        return x


@dataclass
class InducedScheme:
    """Induced full-branch scheme on Y rescaled to [0,1] with unit total mass."""

    name: str
    branches: list
    lambda_factor: object
    eta: object = ONE
    distortion_K: object = ZERO
    C_ell: object = ONE
    diam_Lambda: object = ONE
    tail: Optional[GeometricTail] = None
    ambient: Optional[AmbientMap] = None
    is_affine: bool = True
    truncation_deficit: object = ZERO
    truncated_by_tau: bool = True  # unrepresented mass all has tau > max_tau
    mass_warning: bool = False
    _by_symbol: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._by_symbol = {b.symbol: b for b in self.branches}

    # -- basic queries ----------------------------------------------------

    def branch(self, symbol: str) -> Branch:
        return self._by_symbol[symbol]

    @property
    def symbols(self):
        return [b.symbol for b in self.branches]

    @property
    def max_tau(self) -> int:
        return max(b.tau for b in self.branches)

    @property
    def distortion_K_clamped(self):
        """K clamped to >= 1 for the inequalities that demand K >= 1; the
        true (possibly 0) constant stays available as distortion_K."""
        return self.distortion_K if self.distortion_K >= 1 else ONE

    def represented_mass(self):
        total = ZERO if self.is_affine else 0.0
        for b in self.branches:
            total = total + b.measure
        return total

    def total_measure(self):
        """Mass of the represented alphabet plus the exact tail closure."""
        total = self.represented_mass()
        if self.tail is not None:
            total = total + self.tail.mass_from(self.branches[-1].tau + 1)
        return total

    def mean_return_time(self):
        """Exact integral of tau over the represented alphabet + tail closure."""
        s = ZERO if self.is_affine else 0.0
        for b in self.branches:
            s = s + b.tau * b.measure
        if self.tail is not None:
            # sum_{n>=n0} n * first * ratio^(n-n0) = first*(n0 + r/(1-r))/(1-r)
            n0 = self.branches[-1].tau + 1
            r = self.tail.ratio
            first = self.tail.measure_of(n0)
            s = s + first * (Q(n0) + r / (ONE - r)) / (ONE - r)
        return s

    # -- branch maps -------------------------------------------------------

    def branch_map(self, symbol: str, x):
        """T_{Y,a} in rescaled coordinates, a bijection of the branch onto [0,1]."""
        b = self._by_symbol[symbol]
        if self.is_affine:
            return (x - b.lo) * b.slope
        return self._nonaffine_map(b, x)

    def branch_inverse(self, symbol: str, y):
        b = self._by_symbol[symbol]
        if self.is_affine:
            return b.lo + y / b.slope
        return self._nonaffine_inverse(b, y)

    def _nonaffine_map(self, b, x):
        raise NotImplementedError

    def _nonaffine_inverse(self, b, y):
        raise NotImplementedError

    def intermediate_map(self, symbol: str, x_resc, ell: int):
        """T_a^ell applied to a point of the branch, returned in Lambda coords.

        For schemes with a concrete ambient map this iterates T; synthetic
        schemes use the identity embedding (which satisfies the intermediate
        bound with C_ell = 1 because the final branch map expands).
        """
        if ell == 0:
            return self.ambient.to_lambda(x_resc) if self.ambient else x_resc
        if self.ambient is None:
            return x_resc
        return self.ambient.iterate(self.ambient.to_lambda(x_resc), ell)

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        def enc(v):
            return rat_str(v) if self.is_affine else float(v)

        doc = {
            "name": self.name,
            "alphabet": [
                {"symbol": b.symbol, "domain": [enc(b.lo), enc(b.hi)], "tau": b.tau,
                 "measure": enc(b.measure)}
                for b in self.branches
            ],
            "lambda": enc(self.lambda_factor) if self.is_affine else float(self.lambda_factor),
            "eta": rat_str(Q(self.eta)) if self.is_affine else float(self.eta),
            "K": enc(self.distortion_K) if self.is_affine else float(self.distortion_K),
            "C_ell": rat_str(Q(self.C_ell)) if self.is_affine else float(self.C_ell),
            "affine": self.is_affine,
            "truncation_deficit": enc(self.truncation_deficit),
        }
        if self.tail is not None:
            doc["tail"] = {
                "start_tau": self.tail.start_tau,
                "first": rat_str(self.tail.first),
                "ratio": rat_str(self.tail.ratio),
            }
        return doc

    @staticmethod
    def from_json(doc: dict) -> "InducedScheme":
        if not doc.get("affine", True):
            raise ValueError("only affine schemes round-trip through JSON")
        branches = [
            Branch(
                symbol=e["symbol"],
                tau=int(e["tau"]),
                lo=parse_rat(e["domain"][0]),
                hi=parse_rat(e["domain"][1]),
                measure=parse_rat(e["measure"]),
                slope=ONE / parse_rat(e["measure"]),
            )
            for e in doc["alphabet"]
        ]
        tail = None
        if "tail" in doc:
            t = doc["tail"]
            tail = GeometricTail(int(t["start_tau"]), parse_rat(t["first"]), parse_rat(t["ratio"]))
        return InducedScheme(
            name=doc.get("name", "scheme"),
            branches=branches,
            lambda_factor=parse_rat(doc["lambda"]),
            eta=parse_rat(doc["eta"]),
            distortion_K=parse_rat(doc["K"]),
            C_ell=parse_rat(doc["C_ell"]),
            tail=tail,
            truncation_deficit=parse_rat(doc.get("truncation_deficit", "0")),
        )


class _LsvScheme(InducedScheme):
    """Induced scheme with LSV branch maps evaluated through the ambient orbit."""

    def __init__(self, gamma: float, **kw):
        self.gamma = gamma
        super().__init__(**kw)

    def _lsv_step(self, x: float) -> float:
        if x < 0.5:
            return x * (1.0 + (2.0 * x) ** self.gamma)
        return 2.0 * x - 1.0

    def _lsv_left_derivative(self, x: float) -> float:
        return 1.0 + (1.0 + self.gamma) * (2.0 ** self.gamma) * x ** self.gamma

    def _nonaffine_map(self, b, x):
        # rescaled branch map: embed, iterate tau steps, rescale back
        z = 0.5 + 0.5 * x
        for _ in range(b.tau):
            z = self._lsv_step(z)
        return 2.0 * (z - 0.5)

    def _nonaffine_inverse(self, b, y):
        # monotone increasing branch: bisection on the branch domain
        lo, hi = float(b.lo), float(b.hi)
        target = float(y)
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if self._nonaffine_map(b, mid) < target:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-15:
                break
        return 0.5 * (lo + hi)

    def branch_derivative(self, b, x_resc: float) -> float:
        """|T_Y'| at a rescaled point of the branch (chain rule along the orbit)."""
        z = 0.5 + 0.5 * x_resc
        deriv = 1.0
        for _ in range(b.tau):
            deriv *= 2.0 if z >= 0.5 else self._lsv_left_derivative(z)
            z = self._lsv_step(z)
        return deriv


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def build_doubling_first_return(depth: int = 20) -> InducedScheme:
    """First-return scheme of the doubling map to Y = [0, 1/2).

    Branch a_n has tau = n, measure 2^-n, affine slope 2^n; the alphabet is
    represented up to `depth` with an exact geometric tail closure, so total
    mass is exactly 1.
    """
    if depth < 1:
        raise ValueError("depth >= 1 required")
    half = Q(1, 2)
    branches = []
    for n in range(1, depth + 1):
        lo = ONE - Q(2) ** (1 - n)
        hi = ONE - half ** n
        branches.append(Branch(f"a{n}", n, lo, hi, half ** n, slope=Q(2) ** n))
    tail = GeometricTail(start_tau=depth + 1, first=half ** (depth + 1), ratio=half)

    def step(x):
        y = 2 * x
        return y - 1 if y >= 1 else y

    ambient = AmbientMap(step, y_lo=ZERO, y_hi=half, exact=True, step_slope_sup=Q(2))
    return InducedScheme(
        name="doubling_first_return",
        branches=branches,
        lambda_factor=Q(2),
        eta=ONE,
        distortion_K=ZERO,
        C_ell=ONE,
        tail=tail,
        ambient=ambient,
        is_affine=True,
        truncation_deficit=ZERO,
    )


def build_piecewise_linear_gm(measures, taus) -> InducedScheme:
    """Synthetic affine full-branch scheme with prescribed measures/return times.

    Branch slopes are 1/m(a); lambda = min_a 1/m(a) must exceed 1.
    """
    measures = [Q(m) for m in measures]
    if len(measures) != len(taus):
        raise ValueError("measures and taus must have the same length")
    if any(m <= 0 for m in measures):
        raise ValueError("branch measures must be positive")
    total = sum(measures, ZERO)
    if total != 1:
        raise ValueError(f"branch measures must sum to 1 exactly, got {rat_str(total)}")
    if any(int(t) < 1 for t in taus):
        raise ValueError("return times must be positive integers")
    lam = min(ONE / m for m in measures)
    if lam <= 1:
        raise ValueError("expansion factor <= 1: some branch has measure >= 1")
    branches = []
    lo = ZERO
    for i, (m, t) in enumerate(zip(measures, taus)):
        hi = lo + m
        branches.append(Branch(f"b{i}", int(t), lo, hi, m, slope=ONE / m))
        lo = hi
    ambient = None
    if all(int(t) == 1 for t in taus):
        # roof identically 1: the induced map is the ambient map itself
        scheme_branches = branches

        def step(x, _b=scheme_branches):
            for br in _b:
                if br.lo <= x < br.hi:
                    return (x - br.lo) * br.slope
            return (x - _b[-1].lo) * _b[-1].slope

        ambient = AmbientMap(step, y_lo=ZERO, y_hi=ONE, exact=True)
    return InducedScheme(
        name="piecewise_linear_gm",
        branches=branches,
        lambda_factor=lam,
        eta=ONE,
        distortion_K=ZERO,
        C_ell=ONE,
        ambient=ambient,
        is_affine=True,
    )


def build_lsv_induced(gamma: float, depth: int) -> InducedScheme:
    """First-return scheme of the LSV intermittent map to Y = [1/2, 1].

    T(x) = x(1 + 2^gamma x^gamma) on [0,1/2), 2x-1 on [1/2,1].  Branch
    endpoints are preimages of 1/2 under the left branch, found by bisection
    to 1e-12.  Return-time tails are polynomial with exponent ~ 1/gamma.
    """
    if not (0 < gamma < 1):
        raise ValueError("gamma must lie in (0,1)")
    if depth < 1:
        raise ValueError("depth >= 1 required")

    def left(x):
        return x * (1.0 + (2.0 * x) ** gamma)

    # xi[k] = k-th preimage of 1/2 under the left branch (xi[0] = 1/2)
    xi = [0.5]
    for _ in range(depth):
        lo, hi = 0.0, xi[-1]
        target = xi[-1]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if left(mid) < target:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-14:
                break
        if hi - lo > 1e-10:
            raise RuntimeError(f"bisection failed to converge for preimage {len(xi)}")
        xi.append(0.5 * (lo + hi))

    # branch tau=n in original coords: x in [(1+xi[n-1])/2, (1+xi[n-2])/2),
    # with the convention xi[-1] ~ 1 for the tau=1 branch.
    branches = []
    scheme = _LsvScheme(
        gamma,
        name=f"lsv_gamma{gamma}",
        branches=[],
        lambda_factor=2.0,
        eta=1.0,
        distortion_K=0.0,
        C_ell=1.0,
        is_affine=False,
    )
    min_lambda = math.inf
    for n in range(1, depth + 1):
        upper = 1.0 if n == 1 else xi[n - 2]
        lo_orig = 0.5 * (1.0 + xi[n - 1])
        hi_orig = 0.5 * (1.0 + upper)
        lo_r, hi_r = 2.0 * (lo_orig - 0.5), 2.0 * (hi_orig - 0.5)
        b = Branch(f"a{n}", n, lo_r, hi_r, measure=hi_r - lo_r)
        # inf |T_Y'| sits at the left endpoint (derivative increases along branch)
        bl = scheme.branch_derivative(b, lo_r + 1e-15)
        b = replace(b, branch_lambda=bl)
        branches.append(b)
        min_lambda = min(min_lambda, bl)

    deficit = 1.0 - sum(b.measure for b in branches)
    # distortion constant: sampled bound on |log zeta(x)-log zeta(y)| / d(TY x, TY y)
    scheme.branches = branches
    scheme.__post_init__()
    k_hat = 0.0
    rng = np.random.default_rng(7)
    for b in branches[: min(len(branches), 12)]:
        xs = np.sort(rng.uniform(float(b.lo), float(b.hi), size=24))
        for x, y in zip(xs[:-1], xs[1:]):
            dz = abs(scheme._nonaffine_map(b, x) - scheme._nonaffine_map(b, y))
            if dz < 1e-9:
                continue
            dlog = abs(math.log(scheme.branch_derivative(b, x))
                       - math.log(scheme.branch_derivative(b, y)))
            k_hat = max(k_hat, dlog / dz)

    def step(x):
        if x < 0.5:
            return x * (1.0 + (2.0 * x) ** gamma)
        return 2.0 * x - 1.0

    scheme.lambda_factor = min_lambda
    scheme.distortion_K = 1.5 * k_hat  # sampled estimate with safety margin
    scheme.ambient = AmbientMap(step, y_lo=0.5, y_hi=1.0, exact=False,
                                step_slope_sup=2.0 + gamma)
    scheme.truncation_deficit = deficit
    scheme.mass_warning = bool(deficit > 0.01)
    return scheme


def truncate_and_renormalize(scheme: InducedScheme, depth: int) -> InducedScheme:
    """Affine scheme on the first `depth` branches with measures renormalized
    to total 1 (used to build finite towers; the dropped mass is recorded)."""
    if not scheme.is_affine:
        raise ValueError("only affine schemes can be renormalized exactly")
    kept = scheme.branches[:depth]
    total = sum((b.measure for b in kept), ZERO)
    measures = [b.measure / total for b in kept]
    out = build_piecewise_linear_gm(measures, [b.tau for b in kept])
    out.name = f"{scheme.name}_trunc{depth}"
    out.truncation_deficit = ONE - total
    return out


# ---------------------------------------------------------------------------
# validation and tails
# ---------------------------------------------------------------------------


@dataclass
class ValidationReport:
    scheme: str
    samples: int
    violations: dict
    worst_margins: dict
    lambda_used: float
    notes: list

    @property
    def ok(self) -> bool:
        return all(v == 0 for v in self.violations.values())

    def to_json(self) -> dict:
        return {
            "scheme": self.scheme,
            "samples": self.samples,
            "violations": dict(self.violations),
            "worst_margins": {k: float(v) for k, v in self.worst_margins.items()},
            "lambda_used": float(self.lambda_used),
            "ok": self.ok,
            "notes": list(self.notes),
        }


def _dyadic_in(lo, hi, rng, bits: int = 64):
    """Exact rational sample in [lo, hi): keeps affine checks exact."""
    k = int(rng.integers(0, 2 ** 62))
    return lo + (hi - lo) * Q(k, 2 ** 62)


def validate_scheme(scheme: InducedScheme, samples: int, seed: int = 0,
                    threads: int = 1, lambda_override=None) -> ValidationReport:
    """Monte-Carlo check of the scheme axioms.

    Checks, per sampled same-branch pair: expansion by lambda, the
    intermediate-iterate bound with C_ell, branch bijectivity onto Y
    (endpoint check), and the distortion bound with (K, eta).  Violations are
    counted per axiom; they are data, not errors.
    """
    if samples < 1:
        raise ValueError("samples >= 1 required")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    lam = lambda_override if lambda_override is not None else scheme.lambda_factor
    violations = {"expansion": 0, "intermediate": 0, "bijectivity": 0, "distortion": 0}
    worst = {"expansion": math.inf, "intermediate": -math.inf, "distortion": 0.0}
    notes = []

    # endpoint/bijectivity check once per branch
    for b in scheme.branches:
        if scheme.is_affine:
            img_lo = scheme.branch_map(b.symbol, b.lo)
            img_hi = scheme.branch_map(b.symbol, b.hi)
            if img_lo != 0 or img_hi != 1:
                violations["bijectivity"] += 1
        else:
            # evaluate slightly inside the branch: forward orbits straddle the
            # branch cut exactly at the endpoints and are unstable there
            width = float(b.hi) - float(b.lo)
            img_lo = scheme.branch_map(b.symbol, float(b.lo) + 1e-9 * width)
            img_hi = scheme.branch_map(b.symbol, float(b.hi) - 1e-9 * width)
            if not (-1e-6 < img_lo < 1e-4) or not (1.0 - 1e-4 < img_hi < 1.0 + 1e-6):
                violations["bijectivity"] += 1

    probs = np.array([float(b.measure) for b in scheme.branches])
    probs = probs / probs.sum()
    branch_idx = rng.choice(len(scheme.branches), size=samples, p=probs)
    counts = np.bincount(branch_idx, minlength=len(scheme.branches))

    for bi, n_pairs in enumerate(counts):
        if n_pairs == 0:
            continue
        b = scheme.branches[bi]
        lam_b = b.branch_lambda if (b.branch_lambda is not None) else lam
        for _ in range(int(n_pairs)):
            if scheme.is_affine:
                x = _dyadic_in(b.lo, b.hi, rng)
                y = _dyadic_in(b.lo, b.hi, rng)
                if x == y:
                    continue
                fx, fy = scheme.branch_map(b.symbol, x), scheme.branch_map(b.symbol, y)
                gap, img_gap = abs(x - y), abs(fx - fy)
                if img_gap < lam_b * gap:
                    violations["expansion"] += 1
                worst["expansion"] = min(worst["expansion"], float(img_gap / gap))
                # affine: zeta constant per branch, log-distortion identically 0
                ell = int(rng.integers(0, b.tau))
                ix = scheme.intermediate_map(b.symbol, x, ell)
                iy = scheme.intermediate_map(b.symbol, y, ell)
                lhs, rhs = abs(ix - iy), scheme.C_ell * img_gap
                if lhs > rhs:
                    violations["intermediate"] += 1
                worst["intermediate"] = max(worst["intermediate"], float(lhs / img_gap))
            else:
                x = rng.uniform(float(b.lo), float(b.hi))
                y = rng.uniform(float(b.lo), float(b.hi))
                if x == y:
                    continue
                fx, fy = scheme.branch_map(b.symbol, x), scheme.branch_map(b.symbol, y)
                gap, img_gap = abs(x - y), abs(fx - fy)
                if img_gap < lam_b * gap * (1.0 - 1e-9):
                    violations["expansion"] += 1
                worst["expansion"] = min(worst["expansion"], img_gap / gap)
                ell = int(rng.integers(0, b.tau))
                ix = scheme.intermediate_map(b.symbol, x, ell)
                iy = scheme.intermediate_map(b.symbol, y, ell)
                # compare in Lambda coordinates: TY gap rescaled by |Y|
                img_gap_lambda = img_gap * (scheme.ambient.y_hi - scheme.ambient.y_lo)
                if abs(ix - iy) > float(scheme.C_ell) * img_gap_lambda * (1.0 + 1e-9):
                    violations["intermediate"] += 1
                dz = abs(scheme.branch_derivative(b, x) / scheme.branch_derivative(b, y))
                dist = abs(math.log(dz))
                bound = float(scheme.distortion_K) * img_gap ** float(scheme.eta)
                if dist > bound + 1e-12:
                    violations["distortion"] += 1
                worst["distortion"] = max(worst["distortion"], dist)

    if scheme.mass_warning:
        notes.append("truncation deficit exceeds 1% of mass")
    if worst["expansion"] is math.inf:
        worst["expansion"] = float(lam)
    if worst["intermediate"] == -math.inf:
        worst["intermediate"] = 0.0
    return ValidationReport(
        scheme=scheme.name,
        samples=samples,
        violations=violations,
        worst_margins=worst,
        lambda_used=float(lam),
        notes=notes,
    )


def tail_mass(scheme: InducedScheme, ell: int):
    """m(tau >= ell): exact over represented branches (+ exact tail closure).

    Returns (value, deficit_bound).  With a tail closure the value is exact
    and the deficit is 0.  For schemes truncated by return time the deficit
    mass all has tau > max_tau, so it is attributed exactly whenever
    ell <= max_tau + 1; beyond that the deficit bounds the error from above.
    """
    if ell < 1:
        raise ValueError("ell >= 1 required")
    val = ZERO if scheme.is_affine else 0.0
    for b in scheme.branches:
        if b.tau >= ell:
            val = val + b.measure
    if scheme.tail is not None:
        val = val + scheme.tail.mass_from(max(ell, scheme.branches[-1].tau + 1))
        return val, ZERO
    if scheme.truncated_by_tau and ell <= scheme.max_tau + 1:
        return val + scheme.truncation_deficit, ZERO if scheme.is_affine else 0.0
    return val, scheme.truncation_deficit
