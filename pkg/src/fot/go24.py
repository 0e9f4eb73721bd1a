"""Game-of-24 arithmetic: exact solvability search, step enumeration,
expression checking, and expression assembly from step lines.

All arithmetic is done on rationals so that division never introduces float
error; "reaches 24" means exact equality with 24.
"""

from __future__ import annotations

import re
from fractions import Fraction
from functools import lru_cache

TARGET = Fraction(24)

_NUM_RE = re.compile(r"^-?\d+(?:/\d+)?$")


def parse_number(token: str) -> Fraction:
    token = token.strip()
    if not _NUM_RE.match(token):
        raise ValueError(f"not a number token: {token!r}")
    return Fraction(token)


def fmt_number(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def _pair_results(a: Fraction, b: Fraction):
    yield a + b, f"{fmt_number(a)} + {fmt_number(b)}"
    yield a * b, f"{fmt_number(a)} * {fmt_number(b)}"
    yield a - b, f"{fmt_number(a)} - {fmt_number(b)}"
    yield b - a, f"{fmt_number(b)} - {fmt_number(a)}"
    if b != 0:
        yield a / b, f"{fmt_number(a)} / {fmt_number(b)}"
    if a != 0:
        yield b / a, f"{fmt_number(b)} / {fmt_number(a)}"


@lru_cache(maxsize=200_000)
def _reachable(numbers: tuple[Fraction, ...]) -> bool:
    if len(numbers) == 1:
        return numbers[0] == TARGET
    n = len(numbers)
    for i in range(n):
        for j in range(i + 1, n):
            rest = tuple(numbers[k] for k in range(n) if k not in (i, j))
            for value, _ in _pair_results(numbers[i], numbers[j]):
                if _reachable(tuple(sorted(rest + (value,)))):
                    return True
    return False


def reachable_24(numbers) -> bool:
    """True iff the multiset can be combined into exactly 24."""
    vals = tuple(sorted(Fraction(x) if not isinstance(x, Fraction) else x for x in numbers))
    return _reachable(vals)


def next_steps(numbers) -> list[tuple[str, list[Fraction]]]:
    """All distinct one-step combinations: (step expression, remaining numbers).

    Solvable-leading steps are ordered first (the oracle backend emulates a
    strong model); within each class the order is deterministic.
    """
    vals = [Fraction(x) if not isinstance(x, Fraction) else x for x in numbers]
    n = len(vals)
    seen: set[str] = set()
    steps: list[tuple[bool, str, list[Fraction]]] = []
    for i in range(n):
        for j in range(i + 1, n):
            rest = [vals[k] for k in range(n) if k not in (i, j)]
            for value, expr in _pair_results(vals[i], vals[j]):
                line = f"{expr} = {fmt_number(value)}"
                if line in seen:
                    continue
                seen.add(line)
                left = sorted(rest + [value])
                solvable = _reachable(tuple(left))
                steps.append((solvable, line, left))
    steps.sort(key=lambda s: (not s[0], s[1]))
    return [(line, left) for _, line, left in steps]


def solve_24(numbers) -> str | None:
    """A full expression reaching 24, or None; derived from the step search."""
    vals = [Fraction(x) if not isinstance(x, Fraction) else x for x in numbers]
    if not reachable_24(vals):
        return None
    steps: list[str] = []
    left = vals
    while len(left) > 1:
        for line, remaining in next_steps(left):
            if _reachable(tuple(sorted(remaining))):
                steps.append(line)
                left = remaining
                break
    expr = assemble_expression(steps)
    assert expr is not None
    return expr


# -- expression parsing --------------------------------------------------------

class _ExprParser:
    """Recursive-descent parser for + - * / ( ) over nonnegative integers."""

    _TOKEN = re.compile(r"\s*(\d+|[()+\-*/×÷])")

    def __init__(self, text: str):
        self.tokens: list[str] = []
        pos = 0
        while pos < len(text):
            match = self._TOKEN.match(text, pos)
            if not match:
                if text[pos:].strip():
                    raise ValueError(f"bad token at {text[pos:]!r}")
                break
            self.tokens.append(match.group(1))
            pos = match.end()
        self.index = 0
        self.literals: list[int] = []

    def peek(self) -> str | None:
        return self.tokens[self.index] if self.index < len(self.tokens) else None

    def take(self) -> str:
        tok = self.peek()
        if tok is None:
            raise ValueError("unexpected end of expression")
        self.index += 1
        return tok

    def parse(self) -> Fraction:
        value = self.expr()
        if self.peek() is not None:
            raise ValueError(f"trailing tokens: {self.tokens[self.index:]}")
        return value

    def expr(self) -> Fraction:
        value = self.term()
        while self.peek() in ("+", "-"):
            op = self.take()
            rhs = self.term()
            value = value + rhs if op == "+" else value - rhs
        return value

    def term(self) -> Fraction:
        value = self.factor()
        while self.peek() in ("*", "/", "×", "÷"):
            op = self.take()
            rhs = self.factor()
            if op in ("*", "×"):
                value = value * rhs
            else:
                if rhs == 0:
                    raise ValueError("division by zero")
                value = value / rhs
        return value

    def factor(self) -> Fraction:
        tok = self.take()
        if tok == "(":
            value = self.expr()
            if self.take() != ")":
                raise ValueError("unbalanced parentheses")
            return value
        if tok.isdigit():
            self.literals.append(int(tok))
            return Fraction(int(tok))
        raise ValueError(f"unexpected token {tok!r}")


def check_expression(numbers, expression: str) -> bool:
    """True iff the expression uses each input exactly once, no other numbers,
    and evaluates to exactly 24. Unparseable input is simply False."""
    text = expression.split("=")[0].strip()
    if not text:
        return False
    try:
        parser = _ExprParser(text)
        value = parser.parse()
    except (ValueError, ZeroDivisionError):
        return False
    if sorted(parser.literals) != sorted(int(x) for x in numbers):
        return False
    return value == TARGET


_STEP_RE = re.compile(
    r"^\s*(-?\d+(?:/\d+)?)\s+([+\-*/×÷])\s+(-?\d+(?:/\d+)?)\s*=\s*(-?\d+(?:/\d+)?)\s*$"
)


def assemble_expression(steps: list[str]) -> str | None:
    """Back-substitute a sequence of 'a op b = c' lines into one expression.

    Intermediate results are consumed at most once each; the last step's
    expression is returned without its outermost parentheses.
    """
    available: dict[str, list[str]] = {}
    final = None
    for line in steps:
        match = _STEP_RE.match(line)
        if not match:
            return None
        a, op, b, c = match.groups()
        op = {"×": "*", "÷": "/"}.get(op, op)
        try:
            a_key = fmt_number(parse_number(a))
            b_key = fmt_number(parse_number(b))
            c_key = fmt_number(parse_number(c))
        except ValueError:
            return None
        expr_a = available[a_key].pop() if available.get(a_key) else a_key
        expr_b = available[b_key].pop() if available.get(b_key) else b_key
        final = f"({expr_a} {op} {expr_b})"
        available.setdefault(c_key, []).append(final)
    if final is None:
        return None
    return final[1:-1]
