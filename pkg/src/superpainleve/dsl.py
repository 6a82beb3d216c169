"""Text format for evolution systems.

A file declares parameters, fields and one equation per evolving field::

    # comments start with '#'
    param c alpha beta
    index i j in 1 2
    field u parity=even lead=2
    field xi1 parity=odd lead=2
    equation u =
        -d^3(u) + 6*u*d(u) - c*xi{i}*d^2(xi{i})
    equation xi{i} =
        -d^3(xi{i}) - c*eps{ij}*d^2(xi{j})*w

Equation bodies continue on indented lines. ``d^k(f)`` is the k-th
x-derivative of field ``f``. Inside an equation block ``xi{i}`` names the
field ``xi1`` or ``xi2``; an index that is not fixed by the block header is
summed over its range in each top-level term, and ``eps{ij}`` is the
antisymmetric symbol with ``eps{12} = 1``. Numbers are exact rationals; a
bare ``k`` is the unit with ``k*k = -1``.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

from .kernel import ONE, ZERO, Expression, ParityError, sym
from .ring import K, to_rational

__all__ = ["DSLError", "ParsedSystem", "parse_system", "parse_expression", "jet", "param"]


class DSLError(ValueError):
    """Syntax or consistency error with a source position (1-based)."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        where = f"line {line}, column {col}: " if line else ""
        super().__init__(where + message)


def jet(name: str, parity: int, order: int = 0):
    """Symbol for the x-derivative ``d^order(name)``."""
    return sym(name, parity, None, 0, order)


def param(name: str):
    return sym(name, 0, None, 0, None, True)


@dataclass
class FieldDecl:
    name: str
    parity: int
    lead: int
    line: int


@dataclass
class ParsedSystem:
    params: list[str]
    fields: list[FieldDecl]
    equations: dict[str, Expression]
    name: str = ""


_TOKEN = re.compile(r"""
    (?P<ws>[ \t]+)
  | (?P<num>\d+(?:/\d+)?)
  | (?P<deriv>d(?:\^(?P<order>\d+))?\()
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*(?:\{[A-Za-z0-9]+\})?)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


class _Tokens:
    def __init__(self, text: str, line: int, col0: int):
        self.items = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None:
                raise DSLError(f"unexpected character {text[pos]!r}", line, col0 + pos)
            if m.lastgroup != "ws":
                kind = "deriv" if m.group("deriv") else m.lastgroup
                if kind == "order":
                    kind = "deriv"
                self.items.append((kind, m.group(0), col0 + pos, m.group("order")))
            pos = m.end()
        self.i = 0
        self.line = line
        self.end_col = col0 + len(text)

    def peek(self):
        return self.items[self.i] if self.i < len(self.items) else (None, None, self.end_col, None)

    def take(self):
        t = self.peek()
        self.i += 1
        return t

    def expect(self, value: str):
        kind, text, col, _ = self.take()
        if text != value:
            raise DSLError(f"expected {value!r}, found {text!r}", self.line, col)


class _Parser:
    """Recursive-descent parser producing Expressions under an index environment."""

    def __init__(self, fields: dict[str, FieldDecl], params: set[str], indices: dict[str, list[int]],
                 generators: set[str] = frozenset()):
        self.fields = fields
        self.params = params
        self.indices = indices
        self.generators = generators

    # -- index handling ---------------------------------------------------
    def resolve(self, raw: str, env: dict[str, int], line: int, col: int) -> str:
        m = re.fullmatch(r"([A-Za-z_][A-Za-z0-9_]*)\{([A-Za-z0-9]+)\}", raw)
        if not m:
            return raw
        base, idx = m.groups()
        parts = []
        for ch in idx:
            if ch.isdigit():
                parts.append(ch)
            elif ch in env:
                parts.append(str(env[ch]))
            else:
                raise DSLError(f"unknown index {ch!r}", line, col)
        if base == "eps":
            return "eps" + "".join(parts)
        return base + "".join(parts)

    @staticmethod
    def free_indices(tokens: list, bound: set[str]) -> list[str]:
        found = []
        for kind, text, _, _ in tokens:
            if kind == "name" and "{" in text:
                for ch in text[text.index("{") + 1:-1]:
                    if not ch.isdigit() and ch not in bound and ch not in found:
                        found.append(ch)
        return found

    # -- grammar ------------------------------------------------------------
    def parse(self, toks: _Tokens, env: dict[str, int]) -> Expression:
        """expr := ['+'|'-'] term (('+'|'-') term)*, summing free indices per term."""
        out = ZERO
        sign = 1
        kind, text, col, _ = toks.peek()
        if text in ("+", "-"):
            toks.take()
            sign = -1 if text == "-" else 1
        while True:
            start = toks.i
            depth = 0
            while True:
                kind, text, col, _ = toks.peek()
                if text is None:
                    break
                if text == "(" or kind == "deriv":
                    depth += 1
                elif text == ")":
                    if depth == 0:
                        break
                    depth -= 1
                elif text in ("+", "-") and depth == 0:
                    prev = toks.items[toks.i - 1][1] if toks.i > start else None
                    if prev not in ("*", "/", "^", "("):
                        break
                toks.take()
            end = toks.i
            term_tokens = toks.items[start:end]
            if not term_tokens:
                raise DSLError("empty term", toks.line, col)
            free = self.free_indices(term_tokens, set(env))
            ranges = [self.indices.get(ch) for ch in free]
            for ch, rg in zip(free, ranges):
                if rg is None:
                    raise DSLError(f"undeclared index {ch!r}", toks.line, term_tokens[0][2])
            for values in itertools.product(*ranges) if free else [()]:
                local = dict(env)
                local.update(zip(free, values))
                sub = _Tokens.__new__(_Tokens)
                sub.items = term_tokens
                sub.i = 0
                sub.line = toks.line
                sub.end_col = term_tokens[-1][2] + len(term_tokens[-1][1])
                val = self.term(sub, local)
                if sub.i != len(sub.items):
                    k2, t2, c2, _ = sub.peek()
                    raise DSLError(f"unexpected {t2!r}", toks.line, c2)
                out = out + (val if sign > 0 else -val)
            kind, text, col, _ = toks.peek()
            if text in ("+", "-"):
                toks.take()
                sign = -1 if text == "-" else 1
                continue
            return out

    def term(self, toks: _Tokens, env) -> Expression:
        val = self.power(toks, env)
        while True:
            kind, text, col, _ = toks.peek()
            if text == "*":
                toks.take()
                val = val * self.power(toks, env)
            elif text == "/":
                toks.take()
                k2, t2, c2, _ = toks.take()
                if k2 != "num":
                    raise DSLError("division is only allowed by a number", toks.line, c2)
                q = to_rational(t2)
                if not q:
                    raise DSLError("division by zero", toks.line, c2)
                val = val.scale(1 / q)
            else:
                return val

    def power(self, toks: _Tokens, env) -> Expression:
        kind, text, col, _ = toks.peek()
        if text == "-":
            toks.take()
            return -self.power(toks, env)
        base = self.atom(toks, env)
        kind, text, col, _ = toks.peek()
        if text == "^":
            toks.take()
            k2, t2, c2, _ = toks.take()
            if k2 != "num" or "/" in t2:
                raise DSLError("exponent must be a nonnegative integer", toks.line, c2)
            return base ** int(t2)
        return base

    def atom(self, toks: _Tokens, env) -> Expression:
        kind, text, col, order = toks.take()
        if kind is None:
            raise DSLError("unexpected end of expression", toks.line, col)
        if kind == "num":
            return Expression.const(to_rational(text))
        if text == "(":
            inner = self.parse(toks, env)
            toks.expect(")")
            return inner
        if kind == "deriv":
            k = int(order) if order is not None else 1
            k2, t2, c2, _ = toks.take()
            if k2 != "name":
                raise DSLError("expected a field name inside d(...)", toks.line, c2)
            name = self.resolve(t2, env, toks.line, c2)
            if name not in self.fields:
                raise DSLError(f"unknown field {name!r}", toks.line, c2)
            toks.expect(")")
            return self.field_jet(self.fields[name], k, toks.line, c2)
        if kind == "name":
            name = self.resolve(text, env, toks.line, col)
            if name.startswith("eps") and name[3:].isdigit() and len(name) == 5:
                i, j = int(name[3]), int(name[4])
                return Expression.const(0 if i == j else (1 if i < j else -1))
            if name == "k":
                return Expression.const(K)
            if name in self.fields:
                return self.field_jet(self.fields[name], 0, toks.line, col)
            if name in self.params:
                return Expression.symbol(param(name))
            if name in self.generators:
                return Expression.generator(name)
            raise DSLError(f"unknown name {name!r}", toks.line, col)
        raise DSLError(f"unexpected {text!r}", toks.line, col)

    @staticmethod
    def field_jet(f: FieldDecl, k: int, line: int, col: int) -> Expression:
        # symbols are interned per process, so a name keeps its first parity
        try:
            return Expression.symbol(jet(f.name, f.parity, k))
        except ParityError as exc:
            raise DSLError(str(exc), line, col) from None


def parse_expression(text: str, fields: dict[str, FieldDecl] | None = None, params=(),
                     generators=(), line: int = 1) -> Expression:
    """Parse a single polynomial expression (used for seed values)."""
    p = _Parser(fields or {}, set(params), {}, set(generators))
    toks = _Tokens(text, line, 1)
    if not toks.items:
        raise DSLError("empty expression", line, 1)
    val = p.parse(toks, {})
    if toks.i != len(toks.items):
        _, t, c, _ = toks.peek()
        raise DSLError(f"unexpected {t!r}", line, c)
    return val


_FIELD = re.compile(r"field\s+(\S+)(.*)$")


def parse_system(text: str, name: str = "") -> ParsedSystem:
    """Parse a system file; raises DSLError with a source position."""
    params: list[str] = []
    fields: dict[str, FieldDecl] = {}
    indices: dict[str, list[int]] = {}
    blocks: list[tuple[str, int, int, list[tuple[int, int, str]]]] = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if raw[:1] in (" ", "\t"):
            if current is None:
                raise DSLError("indented line outside an equation block", lineno, 1)
            col = len(line) - len(line.lstrip()) + 1
            current[3].append((lineno, col, line.strip()))
            continue
        current = None
        words = line.split()
        head = words[0]
        if head == "param":
            for w in words[1:]:
                if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", w) or w == "k":
                    raise DSLError(f"bad parameter name {w!r}", lineno, line.index(w) + 1)
                params.append(w)
        elif head == "index":
            m = re.fullmatch(r"index\s+(.+?)\s+in\s+(.+)", line)
            if not m:
                raise DSLError("expected 'index <names> in <values>'", lineno, 1)
            try:
                values = [int(v) for v in m.group(2).split()]
            except ValueError:
                raise DSLError("index values must be integers", lineno, line.index(m.group(2)) + 1)
            for ch in m.group(1).split():
                if len(ch) != 1 or not ch.isalpha():
                    raise DSLError(f"index names are single letters, got {ch!r}", lineno, 1)
                indices[ch] = values
        elif head == "field":
            m = _FIELD.match(line)
            if not m:
                raise DSLError("expected 'field <name> parity=<even|odd> lead=<int>'", lineno, 1)
            fname = m.group(1)
            opts = {}
            for item in m.group(2).split():
                if "=" not in item:
                    raise DSLError(f"expected key=value, got {item!r}", lineno, line.index(item) + 1)
                k, v = item.split("=", 1)
                opts[k] = (v, line.index(item) + 1)
            if "parity" not in opts or opts["parity"][0] not in ("even", "odd"):
                raise DSLError("field needs parity=even or parity=odd", lineno, 1)
            if "lead" not in opts:
                raise DSLError("field needs lead=<int>", lineno, 1)
            try:
                lead = int(opts["lead"][0])
            except ValueError:
                raise DSLError("lead must be an integer", lineno, opts["lead"][1])
            unknown = set(opts) - {"parity", "lead"}
            if unknown:
                raise DSLError(f"unknown field option {sorted(unknown)[0]!r}", lineno, opts[sorted(unknown)[0]][1])
            if fname in fields:
                raise DSLError(f"field {fname!r} declared twice", lineno, 7)
            fields[fname] = FieldDecl(fname, 1 if opts["parity"][0] == "odd" else 0, lead, lineno)
        elif head == "equation":
            m = re.fullmatch(r"equation\s+(\S+)\s*=\s*(.*)", line)
            if not m:
                raise DSLError("expected 'equation <field> ='", lineno, 1)
            current = (m.group(1), lineno, 1, [])
            if m.group(2):
                current[3].append((lineno, line.index(m.group(2)) + 1, m.group(2)))
            blocks.append(current)
        else:
            raise DSLError(f"unknown directive {head!r}", lineno, 1)

    parser = _Parser(fields, set(params), indices)
    equations: dict[str, Expression] = {}
    for target, lineno, _, lines in blocks:
        m = re.fullmatch(r"([A-Za-z_][A-Za-z0-9_]*)(?:\{([A-Za-z])\})?", target)
        if not m:
            raise DSLError(f"bad equation target {target!r}", lineno, 10)
        bound = m.group(2)
        envs = [{}] if bound is None else [{bound: v} for v in indices.get(bound, [])]
        if bound is not None and bound not in indices:
            raise DSLError(f"undeclared index {bound!r}", lineno, 10)
        for env in envs:
            fname = parser.resolve(target, env, lineno, 10)
            if fname not in fields:
                raise DSLError(f"equation for undeclared field {fname!r}", lineno, 10)
            if fname in equations:
                raise DSLError(f"second equation for {fname!r}", lineno, 10)
            total = ZERO
            if not lines:
                raise DSLError("equation has no body", lineno, 1)
            for ln, col, body in lines:
                toks = _Tokens(body, ln, col)
                if not toks.items:
                    continue
                # a continuation line starting without a sign continues with '+'
                val = parser.parse(toks, env)
                if toks.i != len(toks.items):
                    _, t, c, _ = toks.peek()
                    raise DSLError(f"unexpected {t!r}", ln, c)
                total = total + val
            par = total.parity()
            if par is None or (total and par != fields[fname].parity):
                raise DSLError(f"equation for {fname!r} is not of the field's parity", lineno, 1)
            equations[fname] = total
    missing = [f for f in fields if f not in equations]
    if missing:
        raise DSLError(f"no equation for field {missing[0]!r}", fields[missing[0]].line, 1)
    return ParsedSystem(params, list(fields.values()), equations, name)
