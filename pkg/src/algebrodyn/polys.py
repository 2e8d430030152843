"""Sparse complex polynomials in twistor variables.

:class:`GeneratingPoly` is a polynomial ``Pi(G, k0, k1)`` in the projective
twistor components; :class:`TwistorPoly` is a polynomial in the full twistor
``(xi0, xi1, k0, k1)`` used for two-constraint (class II) systems.  All
derivatives are exact, taken monomial by monomial.
"""
from __future__ import annotations

import json
from math import comb
from pathlib import Path

import numpy as np

from .errors import ValidationError


def _power(x, n):
    if n == 0:
        return np.ones_like(x)
    return x**n


def _dpow(x, n, order):
    """``d^order/dx^order x**n`` (falling factorial times a lower power)."""
    if order > n:
        return np.zeros_like(x)
    factor = 1
    for m in range(order):
        factor *= n - m
    return factor * _power(x, n - order)


class GeneratingPoly:
    """``Pi = sum c * G**i * k0**j * k1**k`` with complex coefficients."""

    variables = ("G", "k0", "k1")

    def __init__(self, monomials, name=None):
        merged = {}
        for mono in monomials:
            i, j, k, c = mono
            i, j, k = int(i), int(j), int(k)
            if min(i, j, k) < 0:
                raise ValidationError("negative exponent in monomial", monomial=mono)
            merged[(i, j, k)] = merged.get((i, j, k), 0j) + complex(c)
        self.terms = tuple(sorted((e + (c,) for e, c in merged.items() if c != 0)))
        self.name = name
        if not any(i + j + k >= 1 for i, j, k, _ in self.terms):
            raise ValidationError(
                "generating function needs at least one non-constant term", op="GeneratingPoly"
            )

    # -- construction / io -----------------------------------------------------

    @classmethod
    def from_dict(cls, data, name=None):
        try:
            monos = [
                (m["i"], m["j"], m["k"], complex(m.get("re", 0.0), m.get("im", 0.0)))
                for m in data["monomials"]
            ]
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed generating-function JSON: {exc}") from exc
        return cls(monos, name=name or data.get("name"))

    @classmethod
    def from_json(cls, path_or_text):
        text = str(path_or_text)
        if not text.lstrip().startswith("{"):
            try:
                text = Path(text).read_text()
            except OSError as exc:
                raise ValidationError(f"cannot read generating function: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self):
        out = {
            "monomials": [
                {"i": i, "j": j, "k": k, "re": c.real, "im": c.imag} for i, j, k, c in self.terms
            ]
        }
        if self.name:
            out["name"] = self.name
        return out

    def __repr__(self):
        body = " + ".join(f"({c:g})*G^{i}*k0^{j}*k1^{k}" for i, j, k, c in self.terms)
        return f"GeneratingPoly({body})"

    def __eq__(self, other):
        return isinstance(other, GeneratingPoly) and self.terms == other.terms

    def __hash__(self):
        return hash(self.terms)

    @property
    def degree(self):
        return max(i + j + k for i, j, k, _ in self.terms)

    @property
    def is_homogeneous(self):
        return len({i + j + k for i, j, k, _ in self.terms}) == 1

    @property
    def fiber_degree(self):
        """Nominal degree in G after substituting the incidence relation."""
        return self.degree

    def coefficient_scale(self):
        return max(abs(c) for *_, c in self.terms)

    # -- evaluation --------------------------------------------------------------

    def __call__(self, G, k0, k1):
        G, k0, k1 = np.broadcast_arrays(*(np.asarray(a, dtype=complex) for a in (G, k0, k1)))
        out = np.zeros(G.shape, dtype=complex)
        for i, j, k, c in self.terms:
            out = out + c * _power(G, i) * _power(k0, j) * _power(k1, k)
        return out

    def derivative(self, G, k0, k1, orders):
        """Mixed partial ``d^(a+b+c) Pi / dG^a dk0^b dk1^c`` for ``orders=(a,b,c)``."""
        a, b, c3 = orders
        G, k0, k1 = np.broadcast_arrays(*(np.asarray(x, dtype=complex) for x in (G, k0, k1)))
        out = np.zeros(G.shape, dtype=complex)
        for i, j, k, c in self.terms:
            if i < a or j < b or k < c3:
                continue
            out = out + c * _dpow(G, i, a) * _dpow(k0, j, b) * _dpow(k1, k, c3)
        return out

    def partials(self, G, k0, k1):
        """Value, gradient (3, ...) and Hessian (3, 3, ...) in ``(G, k0, k1)``."""
        value = self(G, k0, k1)
        grad = np.stack([self.derivative(G, k0, k1, e) for e in ((1, 0, 0), (0, 1, 0), (0, 0, 1))])
        unit = np.eye(3, dtype=int)
        hess = np.empty((3, 3) + np.shape(value), dtype=complex)
        for m in range(3):
            for n in range(m, 3):
                hess[m, n] = self.derivative(G, k0, k1, tuple(unit[m] + unit[n]))
                hess[n, m] = hess[m, n]
        return value, grad, hess

    def fiber_coeffs(self, u, v, w, p):
        """Ascending coefficients in G of ``Pi(G, w G + u, v G + p)``.

        Broadcasts over the coordinate arrays; the result has a trailing axis
        of length ``degree + 1``.
        """
        u, v, w, p = np.broadcast_arrays(*(np.asarray(a, dtype=complex) for a in (u, v, w, p)))
        out = np.zeros(u.shape + (self.degree + 1,), dtype=complex)
        for i, j, k, c in self.terms:
            for s in range(j + 1):
                left = comb(j, s) * _power(w, s) * _power(u, j - s)
                for r in range(k + 1):
                    right = comb(k, r) * _power(v, r) * _power(p, k - r)
                    out[..., i + s + r] += c * left * right
        return out

    def homogenize(self):
        """Lift to a :class:`TwistorPoly` in ``(xi0, xi1, k0, k1)`` with ``G = xi1/xi0``."""
        d = self.degree
        return TwistorPoly([(d - i - j - k, i, j, k, c) for i, j, k, c in self.terms])

    def substitute_linear(self, P):
        """Generating function seen in coordinates moved by ``X -> P^+ X P``.

        With ``xi -> P^-1 xi`` the twistor obeys ``kappa' = P^+ kappa``; the
        returned function ``Pi'`` satisfies ``Pi'(xi', kappa') = Pi(P xi',
        (P^+)^-1 kappa')`` (dehomogenized to the gauge ``xi0 = 1``).
        """
        P = np.asarray(P, dtype=complex)
        Pinv_dag = np.linalg.inv(P.conj().T)
        return self.homogenize().linear_substitute(P, Pinv_dag).dehomogenize()


class TwistorPoly:
    """Polynomial in ``(xi0, xi1, k0, k1)``: terms ``(a, b, c, d, coeff)``."""

    def __init__(self, terms):
        merged = {}
        for a, b, c, d, coeff in terms:
            key = (int(a), int(b), int(c), int(d))
            merged[key] = merged.get(key, 0j) + complex(coeff)
        self.terms = tuple(sorted(k + (v,) for k, v in merged.items() if abs(v) > 0))
        if not self.terms:
            raise ValidationError("empty twistor polynomial")

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(
                (m["a"], m["b"], m["c"], m["d"], complex(m.get("re", 0.0), m.get("im", 0.0)))
                for m in data["monomials"]
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed twistor-polynomial JSON: {exc}") from exc

    def __repr__(self):
        body = " + ".join(f"({c:g})*xi0^{a}*xi1^{b}*k0^{cc}*k1^{d}" for a, b, cc, d, c in self.terms)
        return f"TwistorPoly({body})"

    def __call__(self, xi0, xi1, k0, k1):
        args = np.broadcast_arrays(*(np.asarray(x, dtype=complex) for x in (xi0, xi1, k0, k1)))
        out = np.zeros(args[0].shape, dtype=complex)
        for *e, c in self.terms:
            term = c
            for x, n in zip(args, e):
                term = term * _power(x, n)
            out = out + term
        return out

    def grad(self, xi0, xi1, k0, k1):
        """Gradient over ``(xi0, xi1, k0, k1)``, shape ``(4, ...)``."""
        args = np.broadcast_arrays(*(np.asarray(x, dtype=complex) for x in (xi0, xi1, k0, k1)))
        out = np.zeros((4,) + args[0].shape, dtype=complex)
        for *e, c in self.terms:
            for m in range(4):
                if e[m] == 0:
                    continue
                term = c
                for n, (x, en) in enumerate(zip(args, e)):
                    term = term * (_dpow(x, en, 1) if n == m else _power(x, en))
                out[m] = out[m] + term
        return out

    def dehomogenize(self):
        """Restrict to the gauge ``xi0 = 1`` as a :class:`GeneratingPoly`."""
        return GeneratingPoly([(b, c, d, coeff) for a, b, c, d, coeff in self.terms])

    def linear_substitute(self, A, B):
        """Return ``T(xi, k) = self(A xi, B k)`` for constant 2x2 matrices."""
        import sympy as sp

        x0, x1, y0, y1 = sp.symbols("x0 x1 y0 y1")
        A = [[sp.nsimplify(0) + complex(a) for a in row] for row in np.asarray(A)]
        B = [[sp.nsimplify(0) + complex(b) for b in row] for row in np.asarray(B)]
        nx0 = A[0][0] * x0 + A[0][1] * x1
        nx1 = A[1][0] * x0 + A[1][1] * x1
        ny0 = B[0][0] * y0 + B[0][1] * y1
        ny1 = B[1][0] * y0 + B[1][1] * y1
        expr = sum(
            complex(c) * nx0**a * nx1**b * ny0**cc * ny1**d for a, b, cc, d, c in self.terms
        )
        poly = sp.Poly(sp.expand(expr), x0, x1, y0, y1)
        terms = [(*mon, complex(coeff)) for mon, coeff in poly.terms()]
        scale = max(abs(t[-1]) for t in terms)
        return TwistorPoly([t for t in terms if abs(t[-1]) > 1e-14 * scale])


def constant_spinor_system():
    """``xi1 = 0, xi0 = 1``: the constant spinor ``(1, 0)``."""
    return TwistorPoly([(0, 1, 0, 0, 1)]), gauge_constraint()


def gauge_constraint():
    """The projective gauge fixing ``xi0 - 1 = 0``."""
    return TwistorPoly([(1, 0, 0, 0, 1), (0, 0, 0, 0, -1)])
