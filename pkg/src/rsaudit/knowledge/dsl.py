"""Text format for task specifications.

A file is a sequence of ``;``-terminated statements::

    task mnist-addition;
    concept c1, c2 : 10;
    label y : 19;
    rule y == c1 + c2;
    support all;

Statements: ``task``, ``concept``, ``label``, ``define NAME = expr``,
``rule expr``, ``map (g...) -> y | y ...`` (explicit table form),
``support all | consistent | (g...) [@ weight], ...`` and
``deterministic`` / ``nondeterministic``. ``#`` starts a comment.

Operators, loosest first: ``<->``, ``->`` (right associative), ``|``/``or``,
``^``/``xor``, ``&``/``and``, ``!``/``not``, comparisons, ``+ -``, ``* %``,
unary minus.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import MalformedFormula, SpecError
from . import ast
from .task import ConceptSpace, Knowledge, LabelSpace, Support, TaskSpec

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<number>\d+\.\d*(?:[eE][-+]?\d+)?|\d+[eE][-+]?\d+|\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_\-]*)
  | (?P<op><->|->|==|!=|<=|>=|[<>;:,()=|&^!+\-*%@])
    """,
    re.VERBOSE,
)

_KEYWORD_OPS = {"and": "&", "or": "|", "xor": "^", "not": "!", "implies": "->", "iff": "<->"}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int
    raw: str = ""


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise MalformedFormula(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "name" and m.group() in _KEYWORD_OPS:
            tokens.append(Token("op", _KEYWORD_OPS[m.group()], line, col, m.group()))
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    # -- token helpers -------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, message: str, tok: Token | None = None) -> MalformedFormula:
        tok = tok or self.tok
        return MalformedFormula(message, tok.line, tok.column)

    def accept(self, text: str) -> Token | None:
        if self.tok.kind in ("op", "name") and self.tok.text == text:
            tok = self.tok
            self.i += 1
            return tok
        return None

    def expect(self, text: str) -> Token:
        tok = self.accept(text)
        if tok is None:
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        return tok

    def name(self) -> str:
        if self.tok.kind != "name":
            raise self.error("expected a name")
        text = self.tok.text
        self.i += 1
        return text

    def integer(self) -> int:
        if self.tok.kind != "number" or not self.tok.text.isdigit():
            raise self.error("expected an integer")
        value = int(self.tok.text)
        self.i += 1
        return value

    def number(self) -> float:
        if self.tok.kind != "number":
            raise self.error("expected a number")
        value = float(self.tok.text)
        self.i += 1
        return value

    # -- expressions ---------------------------------------------------
    def expr(self) -> ast.Expr:
        left = self.implies()
        if self.accept("<->"):
            left = ast.BinOp("iff", left, self.implies())
            if self.tok.text == "<->":
                raise self.error("'<->' is not associative; add parentheses")
        return left

    def implies(self) -> ast.Expr:
        left = self.disjunction()
        if self.accept("->"):
            return ast.BinOp("implies", left, self.implies())
        return left

    def _chain(self, sub, ops: dict[str, str]) -> ast.Expr:
        left = sub()
        while self.tok.kind == "op" and self.tok.text in ops:
            op = ops[self.tok.text]
            self.i += 1
            left = ast.BinOp(op, left, sub())
        return left

    def disjunction(self) -> ast.Expr:
        return self._chain(self.exclusive, {"|": "or"})

    def exclusive(self) -> ast.Expr:
        return self._chain(self.conjunction, {"^": "xor"})

    def conjunction(self) -> ast.Expr:
        return self._chain(self.negation, {"&": "and"})

    def negation(self) -> ast.Expr:
        if self.accept("!"):
            return ast.Not(self.negation())
        return self.comparison()

    def comparison(self) -> ast.Expr:
        left = self.additive()
        if self.tok.kind == "op" and self.tok.text in ast.COMPARISON:
            op = self.tok.text
            self.i += 1
            left = ast.BinOp(op, left, self.additive())
            if self.tok.kind == "op" and self.tok.text in ast.COMPARISON:
                raise self.error("comparisons cannot be chained")
        return left

    def additive(self) -> ast.Expr:
        return self._chain(self.multiplicative, {"+": "+", "-": "-"})

    def multiplicative(self) -> ast.Expr:
        return self._chain(self.unary, {"*": "*", "%": "%"})

    def unary(self) -> ast.Expr:
        if self.accept("-"):
            return ast.Neg(self.unary())
        return self.atom()

    def atom(self) -> ast.Expr:
        tok = self.tok
        if self.accept("("):
            inner = self.expr()
            self.expect(")")
            return inner
        if tok.kind == "number":
            return ast.Const(self.integer())
        if tok.kind == "name":
            self.i += 1
            if tok.text == "true":
                return ast.Const(1)
            if tok.text == "false":
                return ast.Const(0)
            return ast.Var(tok.text)
        raise self.error(f"unexpected {tok.text or 'end of input'!r} in expression")

    # -- statements ----------------------------------------------------
    def vector(self) -> tuple[int, ...]:
        self.expect("(")
        values = [self.integer()]
        while self.accept(","):
            values.append(self.integer())
        self.expect(")")
        return tuple(values)

    def label_value(self) -> tuple[int, ...]:
        if self.tok.text == "(":
            return self.vector()
        return (self.integer(),)

    def names(self) -> list[str]:
        out = [self.name()]
        while self.accept(","):
            out.append(self.name())
        return out

    def parse(self, ceiling: int | None = None) -> TaskSpec:
        task_name = None
        concepts: list[tuple[str, int]] = []
        labels: list[tuple[str, int]] = []
        defines: list[tuple[str, ast.Expr]] = []
        rules: list[ast.Expr] = []
        rule_tokens: list[Token] = []
        table: dict[tuple[int, ...], frozenset] | None = None
        support_mode = "all"
        support_entries: list[tuple[tuple[int, ...], float | None]] = []
        deterministic = True
        seen: dict[str, Token] = {}

        def declare(name: str, tok: Token):
            if name in seen:
                raise MalformedFormula(f"{name!r} declared twice", tok.line, tok.column)
            seen[name] = tok

        while self.tok.kind != "eof":
            start = self.tok
            keyword = self.name()
            if keyword == "task":
                # task names may collide with word operators such as ``xor``
                if self.tok.raw:
                    task_name = self.tok.raw
                    self.i += 1
                else:
                    task_name = self.name()
            elif keyword in ("concept", "label"):
                names = self.names()
                self.expect(":")
                card = self.integer()
                for n in names:
                    declare(n, start)
                    (concepts if keyword == "concept" else labels).append((n, card))
            elif keyword == "define":
                n = self.name()
                declare(n, start)
                self.expect("=")
                defines.append((n, self.expr()))
            elif keyword == "rule":
                rule_tokens.append(self.tok)
                rules.append(self.expr())
            elif keyword == "map":
                g = self.vector()
                self.expect("->")
                ys = {self.label_value()}
                while self.accept("|"):
                    ys.add(self.label_value())
                table = table if table is not None else {}
                table[g] = frozenset(table.get(g, frozenset()) | ys)
            elif keyword == "support":
                if self.accept("all"):
                    support_mode = "all"
                elif self.accept("consistent"):
                    support_mode = "consistent"
                else:
                    support_mode = "explicit"
                    while True:
                        g = self.vector()
                        w = self.number() if self.accept("@") else None
                        support_entries.append((g, w))
                        if not self.accept(","):
                            break
            elif keyword == "deterministic":
                deterministic = True
            elif keyword == "nondeterministic":
                deterministic = False
            else:
                raise MalformedFormula(f"unknown statement {keyword!r}", start.line, start.column)
            self.expect(";")

        if not concepts:
            raise MalformedFormula("no concept declared", 1, 1)
        if not labels:
            raise MalformedFormula("no label declared", 1, 1)
        if rules and table is not None:
            raise MalformedFormula("use either rules or a map table, not both", 1, 1)

        # atoms must be declared before they are expanded
        known = {n for n, _ in concepts} | {n for n, _ in labels}
        for n, e in defines:
            unknown = ast.variables(e) - known
            if unknown:
                tok = seen[n]
                raise MalformedFormula(f"unknown atom(s) {sorted(unknown)} in define {n!r}",
                                       tok.line, tok.column)
            known.add(n)
        for rule, tok in zip(rules, rule_tokens):
            unknown = ast.variables(rule) - known
            if unknown:
                raise MalformedFormula(f"unknown atom(s) {sorted(unknown)} in rule", tok.line, tok.column)

        cspace = ConceptSpace(tuple(n for n, _ in concepts), tuple(m for _, m in concepts))
        lspace = LabelSpace(tuple(n for n, _ in labels), tuple(m for _, m in labels))
        knowledge = Knowledge(tuple(rules), tuple(defines), table)

        weights = None
        if support_mode == "explicit":
            vectors = tuple(g for g, _ in support_entries)
            given = [w for _, w in support_entries]
            if any(w is not None for w in given):
                if any(w is None for w in given):
                    raise SpecError("either every support vector has a weight or none does")
                weights = tuple(given)
        else:
            vectors = ((0,) * cspace.k,)  # placeholder until the knowledge is compiled
        spec = TaskSpec(cspace, lspace, knowledge, Support(vectors, weights),
                        deterministic, task_name, support_mode)
        if support_mode != "explicit":
            from .compiler import full_support

            spec = TaskSpec(cspace, lspace, knowledge,
                            Support(full_support(spec, support_mode, ceiling)),
                            deterministic, task_name, support_mode)
        return spec


def parse_task(text: str, ceiling: int | None = None) -> TaskSpec:
    """Parse a task specification from DSL text."""
    return _Parser(text).parse(ceiling)


def load_task(path) -> TaskSpec:
    """Parse a task file; parse errors carry the file name in ``path``."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        return parse_task(text)
    except MalformedFormula as exc:
        exc.path = str(path)
        raise


def _vec(v) -> str:
    return "(" + ", ".join(str(int(x)) for x in v) + ")"


def to_dsl(spec: TaskSpec) -> str:
    """Serialize ``spec`` so that ``parse_task`` rebuilds an equivalent task."""
    lines = []
    if spec.name:
        lines.append(f"task {spec.name};")
    for n, m in zip(spec.concepts.names, spec.concepts.cardinalities):
        lines.append(f"concept {n} : {m};")
    for n, m in zip(spec.labels.names, spec.labels.cardinalities):
        lines.append(f"label {n} : {m};")
    for n, e in spec.knowledge.defines:
        lines.append(f"define {n} = {ast.to_text(e)};")
    for r in spec.knowledge.rules:
        lines.append(f"rule {ast.to_text(r)};")
    if spec.knowledge.table is not None:
        for g in sorted(spec.knowledge.table):
            ys = sorted(spec.knowledge.table[g])
            rhs = " | ".join(str(y[0]) if len(y) == 1 else _vec(y) for y in ys)
            lines.append(f"map {_vec(g)} -> {rhs};")
    if not spec.a2_deterministic:
        lines.append("nondeterministic;")
    if spec.support_mode in ("all", "consistent"):
        lines.append(f"support {spec.support_mode};")
    else:
        w = spec.support.weights
        entries = [_vec(g) + (f" @ {w[i]!r}" if w is not None else "")
                   for i, g in enumerate(spec.support.vectors)]
        lines.append("support " + ", ".join(entries) + ";")
    return "\n".join(lines) + "\n"
