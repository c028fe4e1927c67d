"""Exact polynomial test functions: harmonic bases, biharmonic pairs built by
the Almansi representation, symbolic Laplacians, and the shrinking-ball
difference-quotient operator that recovers the second component of a pair.

Coefficients stay exact rationals whenever the inputs are integers or
Fractions; conversion to float happens only at evaluation.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .geometry import Ball, as_point, sphere_quadrature

MAX_BASIS_DEGREE = 8


def _fr(v):
    if isinstance(v, (int, Fraction)):
        return Fraction(v)
    return float(v)


class PolyFunction:
    """Multivariate polynomial as {exponent multi-index: coefficient}."""

    __slots__ = ("dim", "terms")

    def __init__(self, dim: int, terms: dict | None = None):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        clean = {}
        for expo, coeff in (terms or {}).items():
            expo = tuple(int(e) for e in expo)
            if len(expo) != dim or any(e < 0 for e in expo):
                raise ValueError(f"bad exponent {expo} for dim {dim}")
            if coeff == 0:
                continue
            clean[expo] = _fr(coeff) if not isinstance(coeff, float) else coeff
        self.terms = clean

    # -- constructors ----------------------------------------------------

    @classmethod
    def constant(cls, dim: int, value) -> "PolyFunction":
        return cls(dim, {tuple([0] * dim): value})

    @classmethod
    def variable(cls, dim: int, i: int) -> "PolyFunction":
        if not 0 <= i < dim:
            raise ValueError("variable index out of range")
        e = [0] * dim
        e[i] = 1
        return cls(dim, {tuple(e): 1})

    @classmethod
    def radius_sq(cls, dim: int) -> "PolyFunction":
        terms = {}
        for i in range(dim):
            e = [0] * dim
            e[i] = 2
            terms[tuple(e)] = 1
        return cls(dim, terms)

    # -- algebra ----------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, PolyFunction):
            if other.dim != self.dim:
                raise ValueError("dimension mismatch")
            return other
        return PolyFunction.constant(self.dim, other)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0) + c
        return PolyFunction(self.dim, out)

    __radd__ = __add__

    def __neg__(self):
        return PolyFunction(self.dim, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, PolyFunction):
            return PolyFunction(self.dim,
                                {e: c * _fr(other) if not isinstance(other, float)
                                 else c * other
                                 for e, c in self.terms.items()})
        other = self._coerce(other)
        out = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return PolyFunction(self.dim, out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("polynomial powers must be nonnegative integers")
        out = PolyFunction.constant(self.dim, 1)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        return (isinstance(other, PolyFunction) and self.dim == other.dim
                and self.terms == other.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    # -- calculus ----------------------------------------------------------

    def derivative(self, i: int) -> "PolyFunction":
        out = {}
        for e, c in self.terms.items():
            if e[i] == 0:
                continue
            d = list(e)
            d[i] -= 1
            out[tuple(d)] = out.get(tuple(d), 0) + c * e[i]
        return PolyFunction(self.dim, out)

    def laplacian(self) -> "PolyFunction":
        out = PolyFunction(self.dim, {})
        for i in range(self.dim):
            out = out + self.derivative(i).derivative(i)
        return out

    def gradient(self) -> list:
        return [self.derivative(i) for i in range(self.dim)]

    # -- evaluation ---------------------------------------------------------

    def __call__(self, pts):
        p = np.asarray(pts, dtype=float)
        single = p.ndim == 1
        p = np.atleast_2d(p)
        if p.shape[1] != self.dim:
            raise ValueError(f"points have dim {p.shape[1]}, poly has {self.dim}")
        vals = np.zeros(p.shape[0])
        for e, c in self.terms.items():
            mono = np.ones(p.shape[0])
            for i, a in enumerate(e):
                if a:
                    mono = mono * p[:, i] ** a
            vals += float(c) * mono
        return float(vals[0]) if single else vals

    def __repr__(self):
        if not self.terms:
            return "0"
        bits = []
        for e, c in sorted(self.terms.items(), key=lambda kv: (sum(kv[0]), kv[0])):
            mono = "*".join(f"z{i+1}^{a}" if a > 1 else f"z{i+1}"
                            for i, a in enumerate(e) if a)
            bits.append(f"{c}" + (f"*{mono}" if mono else ""))
        return " + ".join(bits)


def laplacian(p: PolyFunction) -> PolyFunction:
    return p.laplacian()


# -- exact sphere averages -----------------------------------------------------

def sphere_monomial_moment(exponents, n: int) -> Fraction:
    """Average of z^a over the unit sphere S^{n-1} (normalized measure).

    Zero when any exponent is odd; otherwise
    prod (a_i - 1)!! / prod_{k=0}^{|a|/2 - 1} (n + 2k).
    """
    if any(a % 2 for a in exponents):
        return Fraction(0)
    num = 1
    for a in exponents:
        for j in range(a - 1, 0, -2):
            num *= j
    den = 1
    half = sum(exponents) // 2
    for k in range(half):
        den *= n + 2 * k
    return Fraction(num, den)


def sphere_average(p: PolyFunction, center, radius) -> float:
    """Mean of a polynomial over the sphere |z - center| = radius.

    Closed form by binomial shift to the unit sphere and exact rational
    monomial moments; the only error is float rounding of the final sum.
    """
    c = as_point(center, p.dim)
    n = p.dim
    total = 0.0
    for e, coeff in p.terms.items():
        ranges = [range(a + 1) for a in e]
        for bs in itertools.product(*ranges):
            mom = sphere_monomial_moment(bs, n)
            if mom == 0:
                continue
            w = float(coeff) * float(mom) * float(radius) ** sum(bs)
            for i, (a, b) in enumerate(zip(e, bs)):
                w *= _binom(a, b) * c[i] ** (a - b)
            total += w
    return total


def _binom(a: int, b: int) -> int:
    out = 1
    for j in range(b):
        out = out * (a - j) // (j + 1)
    return out


# -- harmonic bases --------------------------------------------------------

def _harmonic_basis_2d(max_degree: int) -> list:
    basis = [PolyFunction.constant(2, 1)]
    a = PolyFunction.constant(2, 1)
    b = PolyFunction.constant(2, 0)
    z1 = PolyFunction.variable(2, 0)
    z2 = PolyFunction.variable(2, 1)
    for _ in range(max_degree):
        a, b = z1 * a - z2 * b, z1 * b + z2 * a
        basis.extend([a, b])
    return basis


def _monomials(dim: int, degree: int) -> list:
    if degree == 0:
        return [tuple([0] * dim)]
    out = []
    for combo in itertools.combinations_with_replacement(range(dim), degree):
        e = [0] * dim
        for i in combo:
            e[i] += 1
        out.append(tuple(e))
    return sorted(set(out))


def _kernel_basis(dim: int, degree: int) -> list:
    """Exact rational basis of harmonic homogeneous polynomials of a degree,
    computed as the nullspace of the Laplacian on monomial coefficients."""
    cols = _monomials(dim, degree)
    rows = _monomials(dim, degree - 2) if degree >= 2 else []
    if not rows:
        return [PolyFunction(dim, {e: 1}) for e in cols]
    ridx = {e: i for i, e in enumerate(rows)}
    m = [[Fraction(0)] * len(cols) for _ in rows]
    for j, e in enumerate(cols):
        for i in range(dim):
            if e[i] >= 2:
                d = list(e)
                d[i] -= 2
                m[ridx[tuple(d)]][j] += e[i] * (e[i] - 1)
    # Gauss-Jordan over Fractions
    nr, nc = len(rows), len(cols)
    pivots = []
    r = 0
    for col in range(nc):
        piv = next((i for i in range(r, nr) if m[i][col] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = m[r][col]
        m[r] = [v / inv for v in m[r]]
        for i in range(nr):
            if i != r and m[i][col] != 0:
                f = m[i][col]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(col)
        r += 1
        if r == nr:
            break
    free = [j for j in range(nc) if j not in pivots]
    basis = []
    for fcol in free:
        vec = [Fraction(0)] * nc
        vec[fcol] = Fraction(1)
        for i, pcol in enumerate(pivots):
            vec[pcol] = -m[i][fcol]
        lcm = 1
        for v in vec:
            if v.denominator != 1:
                lcm = lcm * v.denominator // _gcd(lcm, v.denominator)
        terms = {cols[j]: vec[j] * lcm for j in range(nc) if vec[j] != 0}
        basis.append(PolyFunction(dim, terms))
    return basis


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return a


def harmonic_basis(n: int, max_degree: int) -> list:
    """Spanning family of exactly harmonic polynomials up to max_degree."""
    if max_degree > MAX_BASIS_DEGREE:
        raise ValueError(f"degree cap is {MAX_BASIS_DEGREE}")
    if n == 2:
        return _harmonic_basis_2d(max_degree)
    out = []
    for k in range(max_degree + 1):
        out.extend(_kernel_basis(n, k))
    return out


# -- biharmonic pairs --------------------------------------------------------

@dataclass(frozen=True)
class BiharmonicPair:
    """Pair (u1, u2) with laplacian(u1) = -u2 and laplacian(u2) = 0, exactly."""

    u1: PolyFunction
    u2: PolyFunction

    def __post_init__(self):
        if not (self.u1.laplacian() + self.u2).is_zero():
            raise ValueError("pair violates laplacian(u1) = -u2")
        if not self.u2.laplacian().is_zero():
            raise ValueError("second component is not harmonic")


def almansi_pair(h: PolyFunction, q: PolyFunction) -> BiharmonicPair:
    """Biharmonic pair (q + |z|^2 h, -(2n h + 4 z.grad h)) from harmonic h, q."""
    if h.dim != q.dim:
        raise ValueError("dimension mismatch")
    if not h.laplacian().is_zero():
        raise ValueError("h is not harmonic")
    if not q.laplacian().is_zero():
        raise ValueError("q is not harmonic")
    n = h.dim
    u1 = q + PolyFunction.radius_sq(n) * h
    zgrad = PolyFunction(n, {})
    for i in range(n):
        zgrad = zgrad + PolyFunction.variable(n, i) * h.derivative(i)
    u2 = -(2 * n * h + 4 * zgrad)
    return BiharmonicPair(u1=u1, u2=u2)


def almansi_family(n: int, max_degree: int) -> list:
    """All basis Almansi pairs with deg(u1) <= max_degree."""
    hs = harmonic_basis(n, max(max_degree - 2, 0))
    qs = harmonic_basis(n, max_degree)
    zero = PolyFunction.constant(n, 0)
    pairs = [almansi_pair(h, zero) for h in hs]
    pairs += [almansi_pair(zero, q) for q in qs]
    return pairs


# -- shrinking-ball operator ---------------------------------------------------

def gamma1_estimate(f, x, radii, quad_order: int = 32) -> float:
    """Limit of (f(x) - mean of f on S(x, R)) / coupling_mass(B(x, R), x) as
    R -> 0, from the two smallest radii by Richardson extrapolation under an
    O(R^2) error model (exact for polynomials of degree <= 4).
    """
    from .measures import riquier_coupling_mass

    x = as_point(x)
    rs = [float(r) for r in radii]
    if not rs or any(r <= 0 for r in rs):
        raise ValueError("radii must be positive")
    if any(a <= b for a, b in zip(rs, rs[1:])):
        raise ValueError("radii must be strictly decreasing")
    fx = float(f(x)) if not isinstance(f, PolyFunction) else f(x)
    qs = []
    for r in rs:
        b = Ball(tuple(x), r, x.size)
        rule = sphere_quadrature(b, quad_order)
        avg = rule.integrate(f)
        mass = riquier_coupling_mass(b, x, quad_order=quad_order)
        if mass < 1e-280:
            raise ArithmeticError(f"coupling mass underflow at radius {r}")
        qs.append((fx - avg) / mass)
    if len(qs) == 1:
        return qs[0]
    r_big, r_small = rs[-2], rs[-1]
    q_big, q_small = qs[-2], qs[-1]
    rho2 = (r_small / r_big) ** 2
    return (q_small - rho2 * q_big) / (1.0 - rho2)


# -- zoo identifiers --------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?"
                    r"|\d+[eE][+-]?\d+|\d+)|(z\d+)|(\*\*|[-+*^()]))")


def parse_poly(expr: str, dim: int) -> PolyFunction:
    """Parse '+ - * ^' polynomial expressions over variables z1..zn."""
    tokens = []
    pos = 0
    while pos < len(expr):
        m = _TOKEN.match(expr, pos)
        if not m:
            if expr[pos:].strip():
                raise ValueError(f"cannot parse {expr[pos:]!r}")
            break
        pos = m.end()
        num, var, op = m.groups()
        if num is not None:
            if "." in num or "e" in num or "E" in num:
                tokens.append(("num", float(num)))
            else:
                tokens.append(("num", Fraction(int(num))))
        elif var is not None:
            tokens.append(("var", int(var[1:])))
        else:
            tokens.append(("op", "^" if op == "**" else op))
    state = {"i": 0}

    def peek():
        return tokens[state["i"]] if state["i"] < len(tokens) else (None, None)

    def eat():
        t = peek()
        state["i"] += 1
        return t

    def parse_expr():
        kind, val = peek()
        neg = False
        while kind == "op" and val in "+-":
            eat()
            if val == "-":
                neg = not neg
            kind, val = peek()
        node = parse_term()
        if neg:
            node = -node
        while True:
            kind, val = peek()
            if kind == "op" and val in "+-":
                eat()
                rhs = parse_term()
                node = node - rhs if val == "-" else node + rhs
            else:
                return node

    def parse_term():
        node = parse_factor()
        while True:
            kind, val = peek()
            if kind == "op" and val == "*":
                eat()
                node = node * parse_factor()
            else:
                return node

    def parse_factor():
        node = parse_atom()
        kind, val = peek()
        if kind == "op" and val == "^":
            eat()
            k, v = eat()
            if k != "num" or isinstance(v, float) or v.denominator != 1:
                raise ValueError("exponent must be a nonnegative integer")
            node = node ** int(v)
        return node

    def parse_atom():
        kind, val = eat()
        if kind == "num":
            return PolyFunction.constant(dim, val)
        if kind == "var":
            if not 1 <= val <= dim:
                raise ValueError(f"variable z{val} out of range for dim {dim}")
            return PolyFunction.variable(dim, val - 1)
        if kind == "op" and val == "(":
            node = parse_expr()
            k, v = eat()
            if (k, v) != ("op", ")"):
                raise ValueError("unbalanced parentheses")
            return node
        if kind == "op" and val == "-":
            return -parse_atom()
        raise ValueError(f"unexpected token {val!r}")

    node = parse_expr()
    if state["i"] != len(tokens):
        raise ValueError("trailing tokens in polynomial expression")
    return node


def zoo_member(identifier: str, dim: int):
    """Resolve a string identifier to a polynomial or biharmonic pair.

    Forms: 'poly:<expr>', 'harmonic:<expr>', 'almansi:h=<expr>,q=<expr>'.
    """
    kind, _, rest = identifier.partition(":")
    if kind == "poly":
        return parse_poly(rest, dim)
    if kind == "harmonic":
        p = parse_poly(rest, dim)
        if not p.laplacian().is_zero():
            raise ValueError(f"{rest!r} is not harmonic")
        return p
    if kind == "almansi":
        parts = dict(kv.split("=", 1) for kv in rest.split(","))
        if set(parts) != {"h", "q"}:
            raise ValueError("almansi members need h=<expr>,q=<expr>")
        return almansi_pair(parse_poly(parts["h"], dim), parse_poly(parts["q"], dim))
    raise ValueError(f"unknown zoo identifier kind {kind!r}")


def zoo_list(dim: int = 3, max_degree: int = 4) -> list:
    """Identifiers of the canonical zoo members plus the accepted syntax."""
    out = [
        "poly:<expr>            free polynomial in z1..zn",
        "harmonic:<expr>        polynomial checked exactly harmonic",
        "almansi:h=<e>,q=<e>    biharmonic pair (q + |z|^2 h, -(2n h + 4 z.grad h))",
    ]
    for k, h in enumerate(harmonic_basis(dim, max_degree)):
        out.append(f"harmonic:{h!r}  # basis[{k}]")
    return out
