"""Scalar field expressions: a small parsed language for metric entries and densities.

Grammar (precedence low to high):

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := ("-" | "+") factor | power
    power  := atom ("^" factor)?
    atom   := number | name | name "(" expr ")" | "(" expr ")"

Numbers are integers, decimals, or appear in rational shape via "/".  Names are
coordinates or the functions sin, cos, exp, log, sqrt.  Exponents must reduce
to rational constants.  Parse errors carry the offending position.
"""

from __future__ import annotations

import re
from fractions import Fraction

from .jets import (
    jet_add,
    jet_analytic,
    jet_const,
    jet_coordinate,
    jet_cos,
    jet_div,
    jet_mul,
    jet_neg,
    jet_sin,
    jet_sub,
)

_FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")


class ParseError(Exception):
    def __init__(self, message, position):
        super().__init__("%s (at position %d)" % (message, position))
        self.position = position


_TOKEN = re.compile(r"\s*(?:(\d+\.\d+|\d+)|([A-Za-z_][A-Za-z_0-9]*)|([()+\-*/^]))")


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            rest = text[pos:]
            if rest.strip() == "":
                break
            at = pos + len(rest) - len(rest.lstrip())
            raise ParseError("unexpected character %r" % text[at], at)
        num, name, op = m.groups()
        start = m.start(1) if num else m.start(2) if name else m.start(3)
        if num:
            tokens.append(("num", num, start))
        elif name:
            tokens.append(("name", name, start))
        else:
            tokens.append(("op", op, start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect_op(self, op):
        kind, val, pos = self.take()
        if kind != "op" or val != op:
            raise ParseError("expected %r" % op, pos)

    def parse(self):
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError("unexpected trailing input %r" % val, pos)
        return e

    def expr(self):
        node = self.term()
        while True:
            kind, val, pos = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                rhs = self.term()
                node = ("add", node, rhs) if val == "+" else ("sub", node, rhs)
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, val, pos = self.peek()
            if kind == "op" and val in "*/":
                self.take()
                rhs = self.factor()
                node = ("mul", node, rhs) if val == "*" else ("div", node, rhs)
            else:
                return node

    def factor(self):
        kind, val, pos = self.peek()
        if kind == "op" and val in "+-":
            self.take()
            inner = self.factor()
            return inner if val == "+" else ("neg", inner)
        return self.power()

    def power(self):
        base = self.atom()
        kind, val, pos = self.peek()
        if kind == "op" and val == "^":
            self.take()
            expo = self.factor()
            r = _const_value(expo)
            if r is None:
                raise ParseError("exponent must be a rational constant", pos)
            return ("pow", base, r)
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            if "." in val:
                whole, _, fracpart = val.partition(".")
                den = 10 ** len(fracpart)
                return ("const", Fraction(int(whole) * den + int(fracpart), den))
            return ("const", Fraction(int(val)))
        if kind == "name":
            nkind, nval, npos = self.peek()
            if nkind == "op" and nval == "(":
                if val not in _FUNCTIONS:
                    raise ParseError("unknown function %r" % val, pos)
                self.take()
                arg = self.expr()
                self.expect_op(")")
                return (val, arg)
            return ("coord", val)
        if kind == "op" and val == "(":
            inner = self.expr()
            self.expect_op(")")
            return inner
        raise ParseError("expected a number, name, or parenthesis", pos)


def _const_value(node):
    """Fold a node to a Fraction if it is built only from constants, else None."""
    tag = node[0]
    if tag == "const":
        return node[1]
    if tag == "neg":
        v = _const_value(node[1])
        return None if v is None else -v
    if tag in ("add", "sub", "mul", "div"):
        a, b = _const_value(node[1]), _const_value(node[2])
        if a is None or b is None:
            return None
        if tag == "add":
            return a + b
        if tag == "sub":
            return a - b
        if tag == "mul":
            return a * b
        return a / b
    if tag == "pow":
        a = _const_value(node[1])
        if a is None:
            return None
        r = node[2]
        if r.denominator == 1:
            return a ** r.numerator
        return None
    return None


def parse_field(text):
    """Parse an expression string into an AST tuple."""
    return _Parser(str(text)).parse()


def field_to_string(node):
    """Canonical rendering of an AST, stable across round trips."""
    tag = node[0]
    if tag == "const":
        q = node[1]
        return str(q.numerator) if q.denominator == 1 else "%d/%d" % (q.numerator, q.denominator)
    if tag == "coord":
        return node[1]
    if tag == "neg":
        return "-(%s)" % field_to_string(node[1])
    if tag in ("add", "sub", "mul", "div"):
        op = {"add": " + ", "sub": " - ", "mul": "*", "div": "/"}[tag]
        return "(%s%s%s)" % (field_to_string(node[1]), op, field_to_string(node[2]))
    if tag == "pow":
        r = node[2]
        rtxt = str(r.numerator) if r.denominator == 1 else "(%d/%d)" % (r.numerator, r.denominator)
        return "(%s)^%s" % (field_to_string(node[1]), rtxt)
    if tag in _FUNCTIONS:
        return "%s(%s)" % (tag, field_to_string(node[1]))
    raise ValueError("unknown node %r" % (tag,))


def field_free_coords(node, acc=None):
    acc = set() if acc is None else acc
    tag = node[0]
    if tag == "coord":
        acc.add(node[1])
    elif tag != "const":
        for child in node[1:]:
            if isinstance(child, tuple):
                field_free_coords(child, acc)
    return acc


def field_to_jet(node, coords, base, spec):
    """Taylor-expand an AST at the base point.

    coords is the ordered list of coordinate names; base gives one value per
    coordinate (scalars in rational mode, length-batch arrays allowed in float
    mode).
    """
    node = parse_field(node) if isinstance(node, str) else node
    index = {name: i for i, name in enumerate(coords)}

    def ev(n):
        tag = n[0]
        if tag == "const":
            return jet_const(spec, n[1])
        if tag == "coord":
            if n[1] not in index:
                raise ParseError("unknown coordinate %r" % n[1], 0)
            i = index[n[1]]
            return jet_coordinate(spec, i, base[i])
        if tag == "neg":
            return jet_neg(ev(n[1]))
        if tag == "add":
            return jet_add(ev(n[1]), ev(n[2]))
        if tag == "sub":
            return jet_sub(ev(n[1]), ev(n[2]))
        if tag == "mul":
            return jet_mul(ev(n[1]), ev(n[2]))
        if tag == "div":
            return jet_div(ev(n[1]), ev(n[2]))
        if tag == "pow":
            return jet_analytic(ev(n[1]), "pow", r=n[2])
        if tag == "sin":
            return jet_sin(ev(n[1]))
        if tag == "cos":
            return jet_cos(ev(n[1]))
        if tag == "exp":
            return jet_analytic(ev(n[1]), "exp")
        if tag == "log":
            return jet_analytic(ev(n[1]), "log")
        if tag == "sqrt":
            return jet_analytic(ev(n[1]), "sqrt")
        raise ValueError("unknown node %r" % (tag,))

    return ev(node)
