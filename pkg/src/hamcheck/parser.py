"""Recursive-descent parser for the hamcheck declaration language.

The grammar covers frame declarations, equations in solved form,
operators (scalar expressions or row-major bracket matrices), vectors of
densities, equivalence data blocks, and a task list.  Expressions are
evaluated during parsing against the declared frame; task arguments that
name objects produced by earlier tasks stay symbolic until run time.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .frame import Frame
from .ops import CDiffOp, DimensionMismatch
from .poly import DiffPoly, VectorFunction

TASK_KINDS = (
    "reduce", "symmetry", "genfn", "bivector", "schouten", "hamiltonian",
    "poisson", "magri", "equivalence", "transport", "deform", "lift",
)

_PUNCT = {
    ";": "SEMI", ",": "COMMA", "(": "LPAREN", ")": "RPAREN",
    "{": "LBRACE", "}": "RBRACE", "[": "LBRACK", "]": "RBRACK",
    "=": "EQ", "+": "PLUS", "*": "STAR", "^": "CARET",
    ">": "GT", "/": "SLASH", "'": "PRIME",
}


class ParseError(Exception):
    def __init__(self, msg, line, col, expected=()):
        self.msg = msg
        self.line = line
        self.col = col
        self.expected = tuple(sorted(expected))
        text = f"{line}:{col}: {msg}"
        if self.expected:
            text += " (expected: " + ", ".join(self.expected) + ")"
        super().__init__(text)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(source: str):
    tokens = []
    line, col = 1, 1
    i = 0
    size = len(source)
    while i < size:
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < size and source[i] != "\n":
                i += 1
            continue
        if ch == "-":
            if i + 1 < size and source[i + 1] == ">":
                tokens.append(Token("ARROW", "->", line, col))
                i += 2
                col += 2
                continue
            tokens.append(Token("MINUS", "-", line, col))
            i += 1
            col += 1
            continue
        if ch.isdigit():
            j = i
            while j < size and source[j].isdigit():
                j += 1
            tokens.append(Token("INT", source[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < size and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(Token("IDENT", source[i:j], line, col))
            col += j - i
            i = j
            continue
        kind = _PUNCT.get(ch)
        if kind is None:
            raise ParseError(f"unexpected character {ch!r}", line, col)
        tokens.append(Token(kind, ch, line, col))
        i += 1
        col += 1
    tokens.append(Token("EOF", "", line, col))
    return tokens


# -- parse results ------------------------------------------------------


@dataclass(frozen=True)
class NameRef:
    """Reference to an object materialized at run time (deform outputs)."""

    name: str
    line: int
    col: int


@dataclass(frozen=True)
class Direction:
    text: str


@dataclass(frozen=True)
class TaskDecl:
    kind: str
    args: tuple
    alias: str
    line: int
    col: int


@dataclass(frozen=True)
class EquivalenceDecl:
    name: str
    system1: str
    system2: str
    ops: dict


@dataclass
class Program:
    frame: Frame
    systems: dict
    operators: dict
    vectors: dict
    equivalences: dict
    tasks: list
    source: str


class Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = tokenize(source)
        self.pos = 0
        self.independents = None
        self.dependents = None
        self.frame = None
        self.systems = {}
        self.system_decls = {}
        self.operators = {}
        self.vectors = {}
        self.equivalences = {}
        self.tasks = []
        self.pending = {}  # names registered by deform tasks -> kind

    # -- token helpers --------------------------------------------------

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind, what=None) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            shown = tok.text if tok.text else "end of input"
            raise ParseError(
                f"unexpected {shown!r}", tok.line, tok.col,
                expected=(what or kind,),
            )
        return self.next()

    def expect_ident(self, what="identifier") -> Token:
        return self.expect("IDENT", what)

    def fail(self, tok: Token, msg, expected=()):
        raise ParseError(msg, tok.line, tok.col, expected=expected)

    # -- names ------------------------------------------------------------

    def _all_names(self):
        out = set(self.systems) | set(self.operators) | set(self.vectors)
        out |= set(self.equivalences) | set(self.pending)
        return out

    def declare(self, tok: Token, table: dict, value):
        if tok.text in self._all_names():
            self.fail(tok, f"name {tok.text!r} is already declared")
        table[tok.text] = value

    def require_frame(self, tok: Token) -> Frame:
        if self.frame is None:
            self.fail(tok, "independents and dependents must be declared first")
        return self.frame

    # -- program ------------------------------------------------------------

    def parse_program(self) -> Program:
        while self.peek().kind != "EOF":
            tok = self.peek()
            if tok.kind != "IDENT":
                self.fail(tok, f"unexpected {tok.text!r}", expected=("statement",))
            word = tok.text
            if word == "independents":
                self.parse_independents()
            elif word == "dependents":
                self.parse_dependents()
            elif word == "equation":
                self.parse_equation()
            elif word == "operator":
                self.parse_operator()
            elif word == "vector":
                self.parse_vector()
            elif word == "equivalence":
                self.parse_equivalence()
            elif word == "task":
                self.parse_task()
            else:
                self.fail(
                    tok, f"unknown statement {word!r}",
                    expected=("independents", "dependents", "equation", "operator",
                              "vector", "equivalence", "task"),
                )
        return Program(
            self.frame, dict(self.system_decls), dict(self.operators),
            dict(self.vectors), dict(self.equivalences), list(self.tasks),
            self.source,
        )

    def _name_list(self):
        names = [self.expect_ident().text]
        while self.peek().kind == "COMMA":
            self.next()
            names.append(self.expect_ident().text)
        self.expect("SEMI", "';'")
        return names

    def parse_independents(self):
        tok = self.next()
        if self.independents is not None:
            self.fail(tok, "independents already declared")
        self.independents = tuple(self._name_list())
        for nm in self.independents:
            if len(nm) != 1:
                raise ParseError(
                    f"independent {nm!r} must be a single letter "
                    "(jet suffixes are letter sequences)", tok.line, tok.col)
        self._maybe_build_frame()

    def parse_dependents(self):
        tok = self.next()
        if self.dependents is not None:
            self.fail(tok, "dependents already declared")
        self.dependents = tuple(self._name_list())
        self._maybe_build_frame()

    def _maybe_build_frame(self):
        if self.independents is None or self.dependents is None:
            return
        for nm in self.dependents:
            if len(nm) == 2 and nm[0] == "D" and nm[1] in self.independents:
                raise ParseError(
                    f"dependent {nm!r} collides with the derivative token", 1, 1)
        self.frame = Frame(self.independents, self.dependents)

    # -- jet variables -------------------------------------------------------

    def resolve_jet(self, frame: Frame, tok: Token):
        """Split ident at the last underscore into dependent and suffix."""
        text = tok.text
        if text in frame.dependents:
            return (frame.dependents.index(text), (0,) * frame.n)
        if "_" in text:
            stem, suffix = text.rsplit("_", 1)
            if stem in frame.dependents and suffix:
                counts = [0] * frame.n
                for ch in suffix:
                    if ch not in frame.independents:
                        self.fail(tok, f"{ch!r} is not an independent variable")
                    counts[frame.independents.index(ch)] += 1
                return (frame.dependents.index(stem), tuple(counts))
        return None

    # -- expressions ----------------------------------------------------------

    def parse_opexpr(self, frame: Frame) -> CDiffOp:
        left = self.parse_term(frame)
        while self.peek().kind in ("PLUS", "MINUS"):
            op = self.next()
            right = self.parse_term(frame)
            try:
                left = left + right if op.kind == "PLUS" else left - right
            except DimensionMismatch as exc:
                self.fail(op, f"dimension mismatch: {exc}")
        return left

    def parse_term(self, frame: Frame) -> CDiffOp:
        left = self.parse_unary(frame)
        while self.peek().kind == "STAR":
            star = self.next()
            right = self.parse_unary(frame)
            try:
                left = left.compose(right)
            except DimensionMismatch as exc:
                self.fail(star, f"dimension mismatch: {exc}")
        return left

    def parse_unary(self, frame: Frame) -> CDiffOp:
        if self.peek().kind == "MINUS":
            self.next()
            return -1 * self.parse_unary(frame)
        return self.parse_power(frame)

    def parse_power(self, frame: Frame) -> CDiffOp:
        base = self.parse_atom(frame)
        if self.peek().kind == "CARET":
            caret = self.next()
            exp = self.expect("INT", "integer exponent")
            k = int(exp.text)
            if base.rows != base.cols:
                self.fail(caret, "power of a non-square operator")
            out = CDiffOp.identity(base.n, base.rows)
            for _ in range(k):
                out = out.compose(base)
            return out
        return base

    def _rational(self, tok: Token) -> Fraction:
        num = int(tok.text)
        if self.peek().kind == "SLASH":
            self.next()
            den = self.expect("INT", "denominator")
            return Fraction(num, int(den.text))
        return Fraction(num)

    def parse_atom(self, frame: Frame) -> CDiffOp:
        tok = self.peek()
        if tok.kind == "INT":
            self.next()
            return CDiffOp.mult(DiffPoly.const(frame.n, self._rational(tok)))
        if tok.kind == "LPAREN":
            self.next()
            inner = self.parse_opexpr(frame)
            self.expect("RPAREN", "')'")
            return inner
        if tok.kind == "LBRACK":
            return self.parse_matrix(frame)
        if tok.kind == "IDENT":
            self.next()
            text = tok.text
            if len(text) == 2 and text[0] == "D" and text[1] in frame.independents:
                return CDiffOp.d(frame.n, frame.independents.index(text[1]))
            jet = self.resolve_jet(frame, tok)
            if jet is not None:
                return CDiffOp.mult(DiffPoly.jet(frame.n, jet[0], jet[1]))
            if text in frame.independents:
                return CDiffOp.mult(DiffPoly.coord(frame.n, frame.indep_index(text)))
            if text in self.operators:
                return self.operators[text]
            if text in self.vectors or text in self.pending:
                self.fail(tok, f"{text!r} cannot appear inside an operator expression")
            self.fail(tok, f"unknown identifier {text!r}")
        self.fail(tok, f"unexpected {tok.text!r}", expected=("operand",))

    def parse_matrix(self, frame: Frame) -> CDiffOp:
        open_tok = self.expect("LBRACK", "'['")
        rows = []
        if self.peek().kind != "LBRACK":
            self.fail(self.peek(), "matrix rows must be bracketed", expected=("'['",))
        while True:
            self.expect("LBRACK", "'['")
            row = [self.parse_opexpr(frame)]
            while self.peek().kind == "COMMA":
                self.next()
                row.append(self.parse_opexpr(frame))
            self.expect("RBRACK", "']'")
            rows.append(row)
            if self.peek().kind == "COMMA":
                self.next()
                continue
            break
        self.expect("RBRACK", "']'")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            self.fail(open_tok, "dimension mismatch: ragged matrix rows")
        for row in rows:
            for c in row:
                if (c.rows, c.cols) != (1, 1):
                    self.fail(open_tok, "matrix entries must be scalar operators")
        return CDiffOp.block(rows)

    def poly_of(self, op: CDiffOp, tok: Token) -> DiffPoly:
        if (op.rows, op.cols) != (1, 1) or op.order() != 0:
            self.fail(tok, "expected a polynomial (no derivative operators)")
        terms = op.entry_terms(0, 0)
        if not terms:
            return DiffPoly.zero(op.n)
        return terms[0][1]

    def parse_poly(self, frame: Frame) -> DiffPoly:
        tok = self.peek()
        return self.poly_of(self.parse_opexpr(frame), tok)

    def parse_vector_literal(self, frame: Frame) -> VectorFunction:
        self.expect("LBRACK", "'['")
        tok = self.peek()
        entries = [self.poly_of(self.parse_opexpr(frame), tok)]
        while self.peek().kind == "COMMA":
            self.next()
            tok = self.peek()
            entries.append(self.poly_of(self.parse_opexpr(frame), tok))
        self.expect("RBRACK", "']'")
        return VectorFunction(entries)

    # -- declarations ----------------------------------------------------------

    def parse_equation(self):
        kw = self.next()
        frame = self.require_frame(kw)
        name = self.expect_ident("equation name")
        self.expect("LBRACE", "'{'")
        deps = None
        solves = []
        ranking_names = None
        passivity = None
        while self.peek().kind != "RBRACE":
            word = self.expect_ident("equation clause")
            if word.text == "dependents":
                deps = tuple(self._name_list())
            elif word.text == "solve":
                lhs_tok = self.expect_ident("jet variable")
                jet = self.resolve_jet(frame, lhs_tok)
                if jet is None:
                    self.fail(lhs_tok, f"unknown jet variable {lhs_tok.text!r}")
                self.expect("EQ", "'='")
                rhs_tok = self.peek()
                rhs = self.poly_of(self.parse_opexpr(frame), rhs_tok)
                self.expect("SEMI", "';'")
                solves.append((jet, rhs, lhs_tok))
            elif word.text == "ranking":
                names = [self.expect_ident("independent name").text]
                while self.peek().kind == "GT":
                    self.next()
                    names.append(self.expect_ident("independent name").text)
                self.expect("SEMI", "';'")
                ranking_names = names
            elif word.text == "passivity":
                depth = self.expect("INT", "depth")
                passivity = int(depth.text)
                self.expect("SEMI", "';'")
            else:
                self.fail(word, f"unknown equation clause {word.text!r}",
                          expected=("dependents", "solve", "ranking", "passivity"))
        self.expect("RBRACE", "'}'")
        if not solves:
            self.fail(kw, f"equation {name.text!r} has no solve clauses")
        if ranking_names is None:
            self.fail(kw, f"equation {name.text!r} needs a ranking clause")
        self.declare(name, self.system_decls, {
            "deps": deps,
            "solves": solves,
            "ranking": tuple(ranking_names),
            "passivity": passivity,
            "pos": (name.line, name.col),
        })
        self.systems[name.text] = None  # reserve the name

    def parse_operator(self):
        kw = self.next()
        frame = self.require_frame(kw)
        name = self.expect_ident("operator name")
        self.expect("EQ", "'='")
        value = self.parse_opexpr(frame)
        self.expect("SEMI", "';'")
        self.declare(name, self.operators, value)

    def parse_vector(self):
        kw = self.next()
        frame = self.require_frame(kw)
        name = self.expect_ident("vector name")
        self.expect("EQ", "'='")
        value = self.parse_vector_literal(frame)
        self.expect("SEMI", "';'")
        self.declare(name, self.vectors, value)

    def parse_equivalence(self):
        kw = self.next()
        self.require_frame(kw)
        name = self.expect_ident("equivalence name")
        self.expect("LBRACE", "'{'")
        sys_kw = self.expect_ident("'systems'")
        if sys_kw.text != "systems":
            self.fail(sys_kw, "equivalence block must start with 'systems'",
                      expected=("systems",))
        s1 = self.expect_ident("system name")
        self.expect("COMMA", "','")
        s2 = self.expect_ident("system name")
        self.expect("SEMI", "';'")
        for s in (s1, s2):
            if s.text not in self.systems:
                self.fail(s, f"unknown system {s.text!r}")
        ops = {}
        while self.peek().kind != "RBRACE":
            field_tok = self.expect_ident("equivalence field")
            fname = field_tok.text
            if self.peek().kind == "PRIME":
                self.next()
                fname += "'"
            if fname not in ("alpha", "alpha'", "beta", "beta'", "s1", "s2"):
                self.fail(field_tok, f"unknown equivalence field {fname!r}",
                          expected=("alpha", "alpha'", "beta", "beta'", "s1", "s2"))
            if fname in ops:
                self.fail(field_tok, f"duplicate field {fname!r}")
            self.expect("EQ", "'='")
            ops[fname] = self.parse_opexpr(self.frame)
            self.expect("SEMI", "';'")
        self.expect("RBRACE", "'}'")
        missing = {"alpha", "alpha'", "beta", "beta'", "s1", "s2"} - set(ops)
        if missing:
            self.fail(kw, f"equivalence {name.text!r} is missing " + ", ".join(sorted(missing)))
        self.declare(name, self.equivalences,
                     EquivalenceDecl(name.text, s1.text, s2.text, ops))

    # -- tasks -------------------------------------------------------------------

    def parse_task(self):
        kw = self.next()
        frame = self.require_frame(kw)
        kind = self.expect_ident("task kind")
        if kind.text not in TASK_KINDS:
            self.fail(kind, f"unknown task kind {kind.text!r}", expected=TASK_KINDS)
        self.expect("LPAREN", "'('")
        args = []
        if self.peek().kind != "RPAREN":
            args.append(self.parse_task_arg(frame))
            while self.peek().kind == "COMMA":
                self.next()
                args.append(self.parse_task_arg(frame))
        self.expect("RPAREN", "')'")
        alias = None
        if self.peek().kind == "IDENT" and self.peek().text == "as":
            self.next()
            alias_tok = self.expect_ident("alias")
            if kind.text != "deform":
                self.fail(alias_tok, "'as' aliases are only valid on deform tasks")
            if alias_tok.text in self._all_names():
                self.fail(alias_tok, f"name {alias_tok.text!r} is already declared")
            alias = alias_tok.text
            self.pending[alias] = "deformed"
            self.pending[f"{alias}_A1"] = "operator"
            self.pending[f"{alias}_A2"] = "operator"
        self.expect("SEMI", "';'")
        self.tasks.append(TaskDecl(kind.text, tuple(args), alias, kind.line, kind.col))

    def parse_task_arg(self, frame: Frame):
        tok = self.peek()
        if tok.kind == "INT" and self.tokens[self.pos + 1].kind == "ARROW":
            a = self.next()
            self.next()
            b = self.expect("INT", "direction target")
            return Direction(f"{a.text}->{b.text}")
        if tok.kind == "IDENT":
            text = tok.text
            if text in self.systems or text in self.equivalences:
                self.next()
                return NameRef(text, tok.line, tok.col)
            if text in self.vectors:
                self.next()
                return self.vectors[text]
            if text in self.pending:
                self.next()
                return NameRef(text, tok.line, tok.col)
        if tok.kind == "LBRACK" and self.tokens[self.pos + 1].kind != "LBRACK":
            return self.parse_vector_literal(frame)
        return self.parse_opexpr(frame)


def parse_program(source: str) -> Program:
    return Parser(source).parse_program()


def parse_poly(frame: Frame, text: str) -> DiffPoly:
    """Parse a single polynomial expression against a frame (test helper)."""
    parser = Parser("")
    parser.frame = frame
    parser.tokens = tokenize(text)
    parser.pos = 0
    value = parser.parse_poly(frame)
    parser.expect("EOF", "end of expression")
    return value


def parse_op(frame: Frame, text: str) -> CDiffOp:
    """Parse an operator expression against a frame (test helper)."""
    parser = Parser("")
    parser.frame = frame
    parser.tokens = tokenize(text)
    parser.pos = 0
    value = parser.parse_opexpr(frame)
    parser.expect("EOF", "end of expression")
    return value


def parse_vector(frame: Frame, text: str) -> VectorFunction:
    parser = Parser("")
    parser.frame = frame
    parser.tokens = tokenize(text)
    parser.pos = 0
    value = parser.parse_vector_literal(frame)
    parser.expect("EOF", "end of expression")
    return value
