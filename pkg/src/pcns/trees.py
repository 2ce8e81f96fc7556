"""Symbolic trees of the regularity structure for the vector-valued equation.

Trees are nested tuples so they hash, compare and sort canonically:

    ONE                         the unit
    ("Xi",)                     the noise symbol
    ("X", k)                    monomial X^k, k a 4-tuple (time first)
    ("I", s, d, child)          integration against D^d K; ``s`` counts
                                symbolic spatial derivatives, ``d`` is a
                                concrete 4-tuple multi-index
    ("*", ((slot, tree), ...))  product, factors sorted; ``slot`` records
                                whether a factor sits on the first (0) or
                                second (1) index of the product or carries
                                no index (-1)

Component indices are not enumerated.  A product built by the generator
lives in some W^{ab}; its factors carry the slot they were attached to, and
an integration I^{a a1}_{a2}(tau) always differentiates along the second
slot of tau (``s = 1``).  Two trees that differ only in slots are different
index decorations of the same shape.

Homogeneities are pairs (a, b) of Fractions meaning a + b alpha, with alpha
symbolic in the open interval (-13/5, -5/2).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product as iproduct
from math import ceil, factorial

ONE = ("1",)
XI = ("Xi",)
ZERO4 = (0, 0, 0, 0)
SCALING = (2, 1, 1, 1)
ALPHA_LEFT = Fraction(-13, 5)
ALPHA_RIGHT = Fraction(-5, 2)


class UndecidableSign(ValueError):
    """A homogeneity changes sign inside the alpha interval."""


# ---------------------------------------------------------------- homogeneity
@dataclass(frozen=True, order=True)
class Homogeneity:
    a: Fraction
    b: Fraction

    def __add__(self, other: "Homogeneity") -> "Homogeneity":
        return Homogeneity(self.a + other.a, self.b + other.b)

    def shift(self, c) -> "Homogeneity":
        return Homogeneity(self.a + Fraction(c), self.b)

    def at(self, alpha) -> Fraction:
        return self.a + self.b * Fraction(alpha)

    def root(self) -> Fraction | None:
        """alpha with a + b alpha = 0 (None if b = 0)."""
        return None if self.b == 0 else -self.a / self.b

    def nonpositive(self, left=ALPHA_LEFT, right=ALPHA_RIGHT) -> bool:
        """True if <= 0 on the whole open interval, False if > 0 on all of it."""
        lo, hi = self.at(left), self.at(right)
        if lo <= 0 and hi <= 0:
            return True
        if lo >= 0 and hi >= 0:
            return False
        raise UndecidableSign(f"{self} changes sign inside ({left}, {right})")

    def positive(self, left=ALPHA_LEFT, right=ALPHA_RIGHT) -> bool:
        return not self.nonpositive(left, right)

    def __str__(self) -> str:
        parts = []
        if self.b:
            parts.append(("" if self.b == 1 else str(self.b)) + "a")
        if self.a or not parts:
            sign = "+" if parts and self.a > 0 else ""
            parts.append(f"{sign}{self.a}")
        return "".join(parts)


ZERO_HOM = Homogeneity(Fraction(0), Fraction(0))


def _deg(k) -> int:
    return sum(s * n for s, n in zip(SCALING, k))


def homogeneity(t) -> Homogeneity:
    kind = t[0]
    if kind == "1":
        return ZERO_HOM
    if kind == "Xi":
        return Homogeneity(Fraction(0), Fraction(1))
    if kind == "X":
        return Homogeneity(Fraction(_deg(t[1])), Fraction(0))
    if kind == "I":
        _, s, d, child = t
        return homogeneity(child).shift(2 - s - _deg(d))
    h = ZERO_HOM
    for _, f in t[1]:
        h = h + homogeneity(f)
    return h


# ------------------------------------------------------------- constructors
def X(k) -> tuple:
    k = tuple(int(v) for v in k)
    if len(k) != 4 or min(k) < 0:
        raise ValueError("X needs a 4-component multi-index")
    return ONE if k == ZERO4 else ("X", k)


def I(child, s: int = 0, d=ZERO4):
    """Planted tree; I annihilates polynomials, so those map to None (zero)."""
    if child == ONE or child[0] == "X":
        return None
    return ("I", int(s), tuple(d), child)


def mul(items) -> tuple:
    """Canonical product of (slot, tree) pairs (bare trees get slot -1)."""
    flat = []
    poly = [0, 0, 0, 0]
    for it in items:
        slot, t = it if isinstance(it, tuple) and len(it) == 2 and isinstance(it[0], int) else (-1, it)
        if t == ONE:
            continue
        if t[0] == "X":
            poly = [p + q for p, q in zip(poly, t[1])]
        elif t[0] == "*":
            for s2, f in t[1]:
                if f[0] == "X":
                    poly = [p + q for p, q in zip(poly, f[1])]
                else:
                    flat.append((s2, f))
        else:
            flat.append((slot, t))
    if any(poly):
        flat.append((-1, ("X", tuple(poly))))
    flat.sort()
    if not flat:
        return ONE
    if len(flat) == 1 and flat[0][0] == -1:
        return flat[0][1]
    return ("*", tuple(flat))


IXI = I(XI)


def factors(t) -> list:
    """Factors of a tree as bare trees (a non-product is its own factor)."""
    if t == ONE:
        return []
    if t[0] == "*":
        return [f for _, f in t[1]]
    return [t]


# ------------------------------------------------------------------- shapes
def shape(t):
    """Forget slots and the names of spatial derivative directions."""
    kind = t[0]
    if kind in ("1", "Xi", "X"):
        return t
    if kind == "I":
        _, s, d, child = t
        return ("I", (d[0], s + d[1] + d[2] + d[3]), shape(child))
    fs = sorted(shape(f) for _, f in t[1])
    return fs[0] if len(fs) == 1 else ("*", tuple(fs))


def root_canonical(t):
    """Forget the slots of the root product.

    At the root both slots are free component indices and each carries at
    most one factor, so the slot only names the label of that factor.
    """
    if t[0] != "*":
        return t
    return mul([(-1, f) for _, f in t[1]])


def render_shape(t) -> str:
    kind = t[0]
    if kind == "1":
        return "1"
    if kind == "Xi":
        return "Xi"
    if kind == "X":
        return "X^" + "".join(map(str, t[1]))
    if kind == "I":
        _, (dt, ds), child = t
        sub = "_" + "t" * dt + "x" * ds if (dt or ds) else ""
        return f"I{sub}({render_shape(child)})"
    return " ".join(render_shape(f) for f in t[1])


class _Names:
    def __init__(self):
        self.count: dict[str, int] = {}

    def fresh(self, base: str) -> str:
        n = self.count.get(base, 0) + 1
        self.count[base] = n
        return f"{base}{n}"


def render(t, labels=("i", "j"), names: _Names | None = None) -> str:
    """Index-decorated rendering in the I^{a b}_{c}(...) notation."""
    names = names or _Names()
    kind = t[0]
    if kind == "1":
        return "1"
    if kind == "Xi":
        return f"Xi_{labels[0]}"
    if kind == "X":
        return "X^" + "".join(map(str, t[1]))
    if kind == "I":
        _, s, d, child = t
        outer = labels[0]
        inner = names.fresh(outer[0])
        if child == XI:
            return f"I^{{{outer} {inner}}}(Xi_{inner})"
        dlab = names.fresh("k") if s else None
        sub = ""
        extra = "".join(str(v) for v in d) if any(d) else ""
        if dlab or extra:
            sub = "_{" + " ".join(x for x in (dlab, extra and "d" + extra) if x) + "}"
        return f"I^{{{outer} {inner}}}{sub}({render(child, (inner, dlab or inner), names)})"
    parts = []
    for n, (slot, f) in enumerate(t[1]):
        # unslotted factors of a product take the free labels in order
        lab = labels[slot] if slot in (0, 1) else labels[n % 2]
        parts.append(render(f, (lab, lab), names))
    return " ".join(parts)


# --------------------------------------------------------------- generation
@dataclass
class Forest:
    trees: list                 # root-canonical F_F members
    levels: int                 # iterations until W and P stopped changing
    negative_levels: int        # iteration at which the negative sector stopped changing
    cap: Fraction

    def negative(self) -> list:
        return [t for t in self.trees if homogeneity(t).nonpositive()]

    def shapes(self, trees=None) -> set:
        return {shape(t) for t in (self.trees if trees is None else trees)}


def _monomials(cap: Fraction) -> list:
    top = max(int(cap), 0) + 1
    return sorted({X(k) for k in iproduct(range(top), repeat=4) if _deg(k) < cap})


def generate_grammar(max_iter: int = 20, cap=Fraction(1)) -> Forest:
    """Iterate the W_n / P_n construction until both sets stabilize.

    Trees whose homogeneity at the left end of the alpha interval is >= ``cap``
    are dropped: such a factor cannot sit in a tree of nonpositive homogeneity
    because every other factor is at least |I(Xi)| > -cap.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    cap = Fraction(cap)

    def keep(t) -> bool:
        return homogeneity(t).at(ALPHA_LEFT) < cap

    W: set = set()
    P: set = set()
    neg_prev: set = set()
    neg_level = 0
    for n in range(1, max_iter + 1):
        plist = sorted(P)
        new_w = set(W)
        cands = [ONE, mul([(0, IXI)]), mul([(1, IXI)]), mul([(0, IXI), (1, IXI)])]
        for p in plist:
            cands += [mul([(0, p)]), mul([(1, p)]), mul([(0, IXI), (1, p)]), mul([(0, p), (1, IXI)])]
            for q in plist:
                cands.append(mul([(0, p), (1, q)]))
        new_w.update(c for c in cands if keep(c))
        new_p = set(_monomials(cap))
        for tau in W:
            planted = I(tau, s=1)
            if planted is not None and keep(planted):
                new_p.add(planted)
        neg = {root_canonical(t) for t in new_w if homogeneity(t).nonpositive()}
        if neg != neg_prev:
            neg_level = n
        neg_prev = neg
        if new_w == W and new_p == P:
            trees = sorted({root_canonical(t) for t in W})
            return Forest(trees, n - 1, neg_level, cap)
        W, P = new_w, new_p
    raise RuntimeError(f"tree generation did not stabilize within {max_iter} iterations")


def first_level(cap=Fraction(1)) -> set:
    """W_1 as produced by one iteration from empty P_0."""
    W = {ONE, mul([(0, IXI)]), mul([(1, IXI)]), mul([(0, IXI), (1, IXI)])}
    return {t for t in W if homogeneity(t).at(ALPHA_LEFT) < cap}


# --------------------------------------------------------------- named trees
def planted_dx(child):
    """First spatial derivative lift I_k(child) along the child's second slot."""
    return I(child, s=1)


def _w(*pairs):
    return mul(list(pairs))


I_XI = IXI
PAIR = _w((0, IXI), (1, IXI))                                    # I(Xi) I(Xi)
D_IXI_A = I(_w((0, IXI)), 1)                                     # I^{ii1}_j(I^{i1 i2} Xi)
D_IXI_B = I(_w((1, IXI)), 1)                                     # I^{ii1}_j(I^{j j1} Xi)
D_PAIR = I(PAIR, 1)                                              # I_j(I(Xi) I(Xi))
CROSS_A = _w((0, D_IXI_A), (1, IXI))                             # I_k(I^{i1 i2}Xi) I(Xi)
CROSS_B = _w((0, D_IXI_B), (1, IXI))                             # I_k(I^{k k1}Xi) I(Xi)
THREE = _w((0, D_PAIR), (1, IXI))                                # I_k(I I) I
FOUR_SQ = _w((0, D_PAIR), (1, D_PAIR))                           # I_k(I I) I_l(I I)
NEST_A = _w((0, I(_w((0, D_PAIR), (1, IXI)), 1)), (1, IXI))      # I_l(I^{i1 i2}_k(..) I^{l l1}) I
NEST_B = _w((0, I(_w((1, D_PAIR), (0, IXI)), 1)), (1, IXI))      # I_l(I^{l l1}_k(..) I^{i1 i2}) I
FIVE = _w((0, I(NEST_A, 1)), (1, IXI))                           # I_j(I_l(I_k(I I) I) I) I

F0_DISPLAY = [ONE, XI, I_XI, PAIR, D_IXI_A, D_PAIR, D_IXI_B, CROSS_A, CROSS_B, THREE,
              FOUR_SQ, NEST_A, NEST_B]
F_STAR = [I_XI, THREE]


def f0_display_shapes() -> set:
    return {shape(t) for t in F0_DISPLAY}


def negative_sector(forest: Forest | None = None) -> list:
    forest = forest or generate_grammar()
    return forest.negative()


def build_f0(forest: Forest | None = None) -> list:
    """F_0: the nonpositive trees of F_F, the noise symbol, and the first
    derivative lifts of I(Xi) (listed with F_0 although |I_k I(Xi)| = alpha + 3 > 0)."""
    forest = forest or generate_grammar()
    out = set(forest.negative())
    out.add(XI)
    out.update(root_canonical(t) for t in (D_IXI_A, D_IXI_B))
    return sorted(out)


def f_star_shapes() -> set:
    return {shape(t) for t in F_STAR}


# ------------------------------------------------------------ linear algebra
class LinComb(dict):
    """Finite linear combination tree -> Fraction."""

    def add(self, t, c) -> None:
        if t is None or c == 0:
            return
        v = self.get(t, Fraction(0)) + c
        if v == 0:
            self.pop(t, None)
        else:
            self[t] = v


class TensorSum(dict):
    """Finite linear combination (left, right) -> Fraction."""

    def add(self, left, right, c) -> None:
        if left is None or right is None or c == 0:
            return
        key = (left, right)
        v = self.get(key, Fraction(0)) + c
        if v == 0:
            self.pop(key, None)
        else:
            self[key] = v

    def __mul__(self, other: "TensorSum") -> "TensorSum":
        out = TensorSum()
        for (a, b), c in self.items():
            for (a2, b2), c2 in other.items():
                out.add(mul([a, a2]), mul([b, b2]), c * c2)
        return out

    @classmethod
    def unit(cls) -> "TensorSum":
        t = cls()
        t.add(ONE, ONE, Fraction(1))
        return t


def _multi_indices(max_deg: int):
    """Multi-indices k with |k|_s <= max_deg (none when max_deg < 0)."""
    if max_deg < 0:
        return
    for k in iproduct(range(max_deg + 1), repeat=4):
        if _deg(k) <= max_deg:
            yield k


def _add4(*ks):
    return tuple(sum(v) for v in zip(*ks))


def _fact4(k) -> int:
    out = 1
    for v in k:
        out *= factorial(v)
    return out


def in_f_plus(t) -> bool:
    """tau = 1, or |tau| > 0 with every factor of a product 1 or positive."""
    if t == ONE:
        return True
    if not homogeneity(t).positive():
        return False
    return all(homogeneity(f).positive() for f in factors(t))


def p_plus(t):
    return t if t is not None and in_f_plus(t) else None


def _derivative_room(h: Homogeneity) -> int:
    """Largest n such that h - n is positive at one end of the alpha interval (-1 if none)."""
    top = max(h.at(ALPHA_LEFT), h.at(ALPHA_RIGHT))
    return ceil(top) - 1


def coproduct_delta(t) -> TensorSum:
    """Delta : H -> H (x) H_+ with exact rational coefficients."""
    kind = t[0]
    out = TensorSum()
    if kind == "1":
        out.add(ONE, ONE, Fraction(1))
        return out
    if kind == "Xi":
        out.add(XI, ONE, Fraction(1))
        return out
    if kind == "X":
        k = t[1]
        for l in iproduct(*(range(v + 1) for v in k)):
            m = tuple(a - b for a, b in zip(k, l))
            coef = Fraction(_fact4(k), _fact4(l) * _fact4(m))
            out.add(X(l), X(m), coef)
        return out
    if kind == "*":
        acc = TensorSum.unit()
        for slot, f in t[1]:
            part = TensorSum()
            for (a, b), c in coproduct_delta(f).items():
                part.add(mul([(slot, a)]) if a != ONE else ONE, b, c)
            acc = acc * part
        return acc
    _, s, d, child = t
    for (a, b), c in coproduct_delta(child).items():
        out.add(I(a, s, d), b, c)
    room = _derivative_room(homogeneity(t))
    for l in _multi_indices(room):
        for m in _multi_indices(room - _deg(l)):
            planted = p_plus(I(child, s, _add4(d, l, m)))
            if planted is None:
                continue
            coef = Fraction(1, _fact4(l) * _fact4(m))
            out.add(X(l), mul([X(m), planted]), coef)
    return out


def coproduct_delta_plus(t) -> TensorSum:
    """Delta^+ : H_+ -> H_+ (x) H_+."""
    kind = t[0]
    out = TensorSum()
    if kind == "1":
        out.add(ONE, ONE, Fraction(1))
        return out
    if kind == "X":
        return coproduct_delta(t)
    if kind == "*":
        acc = TensorSum.unit()
        for _, f in t[1]:
            acc = acc * coproduct_delta_plus(f)
        return acc
    if kind == "Xi":
        raise ValueError("Delta^+ is defined on H_+ only")
    _, s, d, child = t
    out.add(ONE, t, Fraction(1))
    for (a, b), c in coproduct_delta(child).items():
        planted_a = I(a, s, d)
        if planted_a is None:
            continue
        for l in _multi_indices(_derivative_room(homogeneity(planted_a))):
            planted = p_plus(I(a, s, _add4(d, l)))
            if planted is None:
                continue
            sign = -1 if sum(l) % 2 else 1
            out.add(planted, mul([X(l), b]), c * sign / _fact4(l))
    return out


# ----------------------------------------------------- membership predicates
def in_alg_f_star(t) -> bool:
    """X^k prod I_{l_i}(tau_i) with tau_i in F_* (mod indices) and each factor positive."""
    star = f_star_shapes()
    for f in factors(t):
        if f[0] == "X":
            continue
        if f[0] != "I" or shape(f[3]) not in star or not homogeneity(f).positive():
            return False
    return True


def delta_closure_ok(tau, f0_shapes: set) -> bool:
    """Delta tau lies in <F_0> (x) <Alg(F_*)>."""
    return all(shape(a) in f0_shapes and in_alg_f_star(b) for (a, b) in coproduct_delta(tau))


# ------------------------------------------------------------ renormalization
RENORM_FAMILIES = {
    "C1": PAIR,
    "C2": FOUR_SQ,
    "C3": NEST_A,
    "C4": NEST_B,
}


def renorm_family(t) -> str | None:
    rc = root_canonical(t)
    for name, tree in RENORM_FAMILIES.items():
        if rc == root_canonical(tree):
            return name
    return None


def renorm_apply(constants: dict, v: dict) -> LinComb:
    """M on <F_0>: subtract C^n 1 on the four families, identity elsewhere.

    ``constants`` maps family names ("C1".."C4") to numbers; missing ones are 0.
    ``v`` maps trees to coefficients.
    """
    out = LinComb()
    for t, c in v.items():
        out.add(t, c)
        fam = renorm_family(t)
        if fam is not None:
            out.add(ONE, -c * constants.get(fam, 0))
    return out


# ----------------------------------------------------------------- reporting
def forest_rows(forest: Forest, f0: list | None = None) -> list[dict]:
    """One record per decorated tree of the forest plus F_0 additions."""
    trees = sorted(set(forest.trees) | set(f0 or []))
    shapes = sorted({shape(t) for t in trees})
    sid = {s: n for n, s in enumerate(shapes)}
    rows = []
    for t in trees:
        h = homogeneity(t)
        rows.append({
            "shape_id": sid[shape(t)],
            "shape": render_shape(shape(t)),
            "index_decoration": render(t),
            "a": h.a, "b": h.b,
            "negative_at_left_endpoint": h.at(ALPHA_LEFT) <= 0,
            "negative_at_right_endpoint": h.at(ALPHA_RIGHT) <= 0,
        })
    return rows


def forest_text(forest: Forest) -> str:
    """Indented listing grouped by shape."""
    by_shape: dict = {}
    for t in forest.trees:
        by_shape.setdefault(shape(t), []).append(t)
    lines = []
    for s in sorted(by_shape, key=lambda s: (homogeneity_of_shape(by_shape[s][0]), render_shape(s))):
        h = homogeneity(by_shape[s][0])
        lines.append(f"{render_shape(s)}    |tau| = {h}")
        for t in by_shape[s]:
            lines.append(f"    {render(t)}")
    return "\n".join(lines) + "\n"


def homogeneity_of_shape(t):
    h = homogeneity(t)
    return (h.at(ALPHA_LEFT), h.b)
