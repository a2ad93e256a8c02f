"""Word space, cylinders, tower points, and the coding maps onto the interval.

The base alphabet of the suspension is the set of finite words over an
induced scheme's symbols; a word's height is the sum of its letters' return
times.  Cylinders Y_w are nested preimages of Y under compositions of branch
maps, with diameter <= lambda^{-|w|}.  The coding map pi_X sends a symbol
sequence to the unique point of the intersected cylinder chain; pi applies
intermediate iterates of the ambient map on top.  Infinite sequences are
represented by finite prefixes carrying explicit radius bounds, so every
geometric statement here is a certified enclosure rather than a limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._rat import Q, ONE, ZERO, rat_str
from .schemes import InducedScheme

__all__ = [
    "Word",
    "Cylinder",
    "TowerPoint",
    "TowerMeasure",
    "TrivialWordLaw",
    "FiniteWordLaw",
    "cylinder_of",
    "pi_X",
    "pi",
    "separation",
    "tower_distance",
    "check_semiconjugacy",
    "check_pushforward",
]


@dataclass(frozen=True)
class Word:
    """Nonempty finite word over the base alphabet, with cached height."""

    letters: tuple
    height: int

    @staticmethod
    def of(letters: Sequence[str], scheme: InducedScheme) -> "Word":
        letters = tuple(letters)
        if not letters:
            raise ValueError("empty word")
        h = sum(scheme.branch(a).tau for a in letters)
        return Word(letters, h)

    def __len__(self) -> int:
        return len(self.letters)

    def concat(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters, self.height + other.height)


@dataclass(frozen=True)
class Cylinder:
    """Nested cylinder interval Y_w in Y-rescaled coordinates [0,1]."""

    word: Word
    lo: object
    hi: object
    exact_mass: Optional[object]  # m(Y_w), exact for affine schemes

    @property
    def width(self):
        return self.hi - self.lo

    @property
    def midpoint(self):
        return (self.lo + self.hi) / 2

    def to_json(self) -> dict:
        return {
            "word": list(self.word.letters),
            "interval": [float(self.lo), float(self.hi)],
            "mass": rat_str(self.exact_mass) if self.exact_mass is not None else None,
        }


def cylinder_of(word: Word, scheme: InducedScheme) -> Cylinder:
    """Y_w as the preimage of Y under the composition of branch maps.

    Computed by pulling [0,1] back through the branch inverses in reverse
    letter order; exact rational endpoints for affine schemes, outward-rounded
    floats otherwise.
    """
    if len(word) == 0:
        raise ValueError("empty word has no cylinder")
    if scheme.is_affine:
        lo, hi = ZERO, ONE
        for a in reversed(word.letters):
            b = scheme.branch(a)
            lo, hi = b.lo + lo / b.slope, b.lo + hi / b.slope
        mass = ONE
        for a in word.letters:
            mass = mass * scheme.branch(a).measure
        return Cylinder(word, lo, hi, mass)
    lo, hi = 0.0, 1.0
    for a in reversed(word.letters):
        lo = scheme.branch_inverse(a, lo) - 1e-12
        hi = scheme.branch_inverse(a, hi) + 1e-12
    return Cylinder(word, max(lo, 0.0), min(hi, 1.0), None)


def pi_X(prefix: Sequence[Word], scheme: InducedScheme):
    """Coding map on the base: midpoint of the deepest cylinder plus radius.

    Returns (point, radius) in Lambda coordinates; the true image of any
    sequence extending the prefix lies within radius of the point.
    """
    if not prefix:
        raise ValueError("prefix must contain at least one word")
    letters = []
    for w in prefix:
        letters.extend(w.letters)
    cyl = cylinder_of(Word.of(letters, scheme), scheme)
    y_lo, y_hi = (scheme.ambient.y_lo, scheme.ambient.y_hi) if scheme.ambient else (ZERO, ONE)
    scale = y_hi - y_lo
    point = y_lo + cyl.midpoint * scale
    radius = cyl.width / 2 * scale
    return point, radius


@dataclass(frozen=True)
class TowerPoint:
    """Finite-prefix representation of a suspension point (x, level)."""

    words: tuple  # tuple[Word], prefix of the symbol sequence
    level: int

    def __post_init__(self):
        if not self.words:
            raise ValueError("tower point needs at least one resolved word")
        if not (0 <= self.level < self.words[0].height):
            raise ValueError("level must satisfy 0 <= level < height of first word")

    def step(self) -> "TowerPoint":
        """One application of the suspension map: climb, or drop to the base."""
        if self.level + 1 < self.words[0].height:
            return TowerPoint(self.words, self.level + 1)
        if len(self.words) < 2:
            raise ValueError("prefix exhausted: extend the prefix before stepping")
        return TowerPoint(self.words[1:], 0)


def separation(a: TowerPoint, b: TowerPoint) -> int:
    """Separation time: index of the first differing resolved word."""
    n = 0
    for wa, wb in zip(a.words, b.words):
        if wa.letters != wb.letters:
            return n
        n += 1
    return n


def tower_distance(a: TowerPoint, b: TowerPoint, xi):
    """Suspension metric: 1 across levels, xi^(separation) within a level."""
    if a.level != b.level:
        return ONE
    return Q(xi) ** separation(a, b)


def pi(p: TowerPoint, scheme: InducedScheme):
    """Tower-to-interval coding: intermediate iterates applied to pi_X.

    Returns (point, radius) in Lambda coordinates.  The radius is propagated
    through the level-crossing structure: after j full letter-branches and r
    residual steps, the enclosure is C_ell times the image cylinder of the
    remaining letters.
    """
    base_point, base_radius = pi_X(p.words, scheme)
    if p.level == 0:
        return base_point, base_radius
    if scheme.ambient is None:
        # synthetic schemes: intermediate maps are the identity embedding
        return base_point, base_radius
    # count how many whole letter branches the level crosses
    letters = []
    for w in p.words:
        letters.extend(w.letters)
    crossed, remaining = 0, p.level
    while remaining >= scheme.branch(letters[crossed]).tau:
        remaining -= scheme.branch(letters[crossed]).tau
        crossed += 1
    # |T^l x - T^l y| <= C_ell |T_{Y,a_j} F^j x - T_{Y,a_j} F^j y|, and the
    # latter pair lies in the cylinder of the letters after the current one
    scale = scheme.ambient.y_hi - scheme.ambient.y_lo
    if crossed + 1 < len(letters):
        image_cyl = cylinder_of(Word.of(letters[crossed + 1:], scheme), scheme)
        radius = scheme.C_ell * image_cyl.width / 2 * scale
    else:
        radius = scheme.C_ell * scale / 2  # no letters resolved past this one
    point = scheme.ambient.iterate(base_point, p.level)
    return point, radius


# ---------------------------------------------------------------------------
# word laws and the tower measure
# ---------------------------------------------------------------------------


class TrivialWordLaw:
    """Word law charging only single letters with P(a) = m(a).

    For schemes with an exact tail closure the total mass is exactly 1;
    sampling clamps to the represented alphabet (bias = closure mass,
    reported by `sampling_bias`).
    """

    def __init__(self, scheme: InducedScheme):
        self.scheme = scheme
        self._words = [Word((b.symbol,), b.tau) for b in scheme.branches]
        self._masses = [b.measure for b in scheme.branches]

    def items(self):
        return list(zip(self._words, self._masses))

    def total(self):
        return self.scheme.total_measure()

    @property
    def sampling_bias(self):
        return self.total() - sum(self._masses, ZERO)

    def mass(self, word: Word):
        if len(word) != 1:
            return ZERO
        return self.scheme.branch(word.letters[0]).measure

    def prefix_mass(self, letters: tuple):
        """Mass of words whose letter string starts with `letters`."""
        if len(letters) != 1:
            return ZERO
        return self.scheme.branch(letters[0]).measure

    def exact_word_mass(self, letters: tuple):
        return self.prefix_mass(letters) if len(letters) == 1 else ZERO

    def mean_height(self):
        return self.scheme.mean_return_time()

    def height_mass(self, n: int):
        out = ZERO
        for b in self.scheme.branches:
            if b.tau == n:
                out = out + b.measure
        if self.scheme.tail is not None and n >= self.scheme.tail.start_tau:
            out = out + self.scheme.tail.measure_of(n)
        return out

    def sample(self, rng) -> Word:
        probs = np.array([float(m) for m in self._masses])
        idx = rng.choice(len(self._words), p=probs / probs.sum())
        return self._words[idx]


class FiniteWordLaw:
    """Explicit finite word law; residual mass is tracked, never resampled."""

    def __init__(self, masses: dict, residual=ZERO):
        self._masses = dict(masses)
        self.residual = residual
        for w, m in self._masses.items():
            if m < 0:
                raise ValueError("negative word mass")

    def items(self):
        return list(self._masses.items())

    def total(self):
        return sum(self._masses.values(), ZERO) + self.residual

    def mass(self, word: Word):
        return self._masses.get(word, ZERO)

    def prefix_mass(self, letters: tuple):
        out = ZERO
        for w, m in self._masses.items():
            if w.letters[: len(letters)] == tuple(letters):
                out = out + m
        return out

    def exact_word_mass(self, letters: tuple):
        out = ZERO
        for w, m in self._masses.items():
            if w.letters == tuple(letters):
                out = out + m
        return out

    def mean_height(self):
        return sum((m * w.height for w, m in self._masses.items()), ZERO)

    def height_mass(self, n: int):
        return sum((m for w, m in self._masses.items() if w.height == n), ZERO)

    def sample(self, rng) -> Word:
        words = list(self._masses.keys())
        probs = np.array([float(self._masses[w]) for w in words])
        return words[rng.choice(len(words), p=probs / probs.sum())]


class TowerMeasure:
    """Suspension measure: level masses are the mean-height-normalized
    restriction of the base word law to heights above the level."""

    def __init__(self, word_law, max_height: int = 64):
        self.word_law = word_law
        self.mean_height = word_law.mean_height()
        self.max_height = max_height

    def level_mass(self, ell: int):
        # P_X(h >= ell+1) / mean height, via the exact complement so tail
        # closures are accounted for
        below = ZERO
        for n in range(1, ell + 1):
            below = below + self.word_law.height_mass(n)
        return (self.word_law.total() - below) / self.mean_height

    def total_mass(self, levels: int = None):
        levels = levels if levels is not None else self.max_height
        return sum((self.level_mass(l) for l in range(levels)), ZERO)


# ---------------------------------------------------------------------------
# contract checks
# ---------------------------------------------------------------------------


def check_semiconjugacy(scheme: InducedScheme, n_points: int, n_steps: int,
                        depth: int = 40, seed: int = 0) -> dict:
    """Iterate the suspension map and the ambient map in parallel and report
    the worst |T(pi(p)) - pi(f(p))| over sampled trajectories.

    The discrepancy of exact arithmetic is bounded by the coding radii; the
    report carries both so the caller can assert discrepancy <= budget.
    """
    if scheme.ambient is None:
        raise ValueError("semiconjugacy replay needs a scheme with ambient dynamics")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))
    law = TrivialWordLaw(scheme)
    exact = scheme.is_affine and scheme.ambient.exact
    slope_sup = scheme.ambient.step_slope_sup
    worst = ZERO if exact else 0.0
    worst_budget = ZERO if exact else 0.0
    evaluated = 0
    for _ in range(n_points):
        words = tuple(law.sample(rng) for _ in range(depth + n_steps + 2))
        level = int(rng.integers(0, words[0].height))
        p = TowerPoint(words, level)
        for _ in range(n_steps):
            x, r = pi(p, scheme)
            q = p.step()
            fx, fr = pi(q, scheme)
            tx = scheme.ambient.step(x)
            gap = abs(tx - fx)
            # stepping the midpoint expands its enclosure by at most sup |T'|
            budget = r * slope_sup + fr
            if gap > worst:
                worst = gap
            if budget > worst_budget:
                worst_budget = budget
            p = q
            evaluated += 1
    return {
        "max_discrepancy": float(worst),
        "radius_budget": float(worst_budget),
        "within_budget": bool(worst <= worst_budget),
        "evaluated": evaluated,
        "depth": depth,
    }


def _pushforward_sum(law, letters: tuple, scheme: InducedScheme):
    """P_X(pi_X^{-1} Y_w) for the letter word w: sum over word tuples whose
    concatenation covers w, of the product of word-law masses.

    Recursion over the first word: it either covers w outright (prefix mass,
    with free continuation of total mass law.total()) or matches a proper
    prefix and hands the remainder to the next word.
    """
    if not letters:
        return law.total()
    out = law.prefix_mass(letters)
    for cut in range(1, len(letters)):
        head_mass = law.exact_word_mass(letters[:cut])
        if head_mass != 0:
            out = out + head_mass * _pushforward_sum(law, letters[cut:], scheme)
    return out


def check_pushforward(scheme: InducedScheme, word_law, depth: int,
                      n_samples: int = 0, seed: int = 0,
                      symbols: Optional[list] = None) -> dict:
    """Exact + empirical verification that pi_X pushes the shift measure to m.

    Exact part: for every letter word w up to length min(depth, 3) over the
    chosen symbols, the word-tuple sum equals m(Y_w) (rational equality on
    affine schemes).  Empirical part: KS distance between sampled pi_X points
    and m against the 5% threshold 1.36/sqrt(n).
    """
    symbols = symbols if symbols is not None else scheme.symbols
    max_len = min(depth, 3)
    identities = 0
    failures = []
    for length in range(1, max_len + 1):
        stack = [()]
        for _ in range(length):
            stack = [s + (a,) for s in stack for a in symbols]
        for letters in stack:
            lhs = _pushforward_sum(word_law, letters, scheme)
            rhs = ONE
            for a in letters:
                rhs = rhs * scheme.branch(a).measure
            identities += 1
            if lhs != rhs:
                failures.append({"word": letters, "lhs": rat_str(lhs), "rhs": rat_str(rhs)})
    result = {
        "exact_identities": identities,
        "exact_failures": failures,
        "exact_ok": not failures,
    }
    if n_samples:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0xC0DE]))
        pts = np.empty(n_samples)
        for i in range(n_samples):
            words, letters = [], 0
            while letters < 40:
                w = word_law.sample(rng)
                words.append(w)
                letters += len(w)
            x, _ = pi_X(words, scheme)
            y_lo = float(scheme.ambient.y_lo) if scheme.ambient else 0.0
            y_hi = float(scheme.ambient.y_hi) if scheme.ambient else 1.0
            pts[i] = (float(x) - y_lo) / (y_hi - y_lo)
        pts.sort()
        grid = np.arange(1, n_samples + 1) / n_samples
        ks = float(np.max(np.maximum(np.abs(grid - pts), np.abs(pts - (grid - 1.0 / n_samples)))))
        result["ks_statistic"] = ks
        result["ks_threshold"] = 1.36 / math.sqrt(n_samples)
        result["ks_ok"] = ks <= result["ks_threshold"]
    return result
