"""Lexer and recursive-descent parser for the .rt surface syntax.

Precedence, loosest to tightest: binder forms (fun/tfun/let/if) and
assignment, then '*', then application (left-associative, including
postfix type application), then the unary operators ref/!/succ/pred/iszero.

`fresh` is the concrete token for the freshness marker; `&x` inside a
qualifier is accepted as a synonym for the binder name x. Location terms
(@N) and location atoms are runtime-only extensions used by replay files.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import ParseError, Span
from .syntax import (BOOL, BOT, NAT, TOP, UNIT, Abs, All, App, Ascribe,
                     Assign, BoolLit, Deref, FRESH, Fun, If, IsZero, LocAtom,
                     LocTerm, Mul, NatLit, Pred, Qualifier, QualifiedType,
                     RefDual, RefNew, Succ, TAbs, TApp, TVar, Term, UnitLit,
                     Var, VarAtom, plain_ref)

KEYWORDS = {
    "unit", "true", "false", "fun", "tfun", "let", "in", "ref", "if", "then",
    "else", "succ", "pred", "iszero", "mu", "forall", "fresh",
    "Ref", "Unit", "Nat", "Bool", "Top", "Bot",
}

SYMBOLS = [":=", "<:", "=>", "->", "(", ")", "{", "}", "[", "]", "^", ",",
           ".", ":", "=", "!", "*", "&", "@"]


@dataclass(frozen=True)
class Token:
    kind: str   # 'ident' | 'nat' | 'kw' | symbol text | 'eof'
    text: str
    span: Span


def lex(src: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    i = 0
    n = len(src)

    def span(l0, c0, l1, c1):
        return Span(l0, c0, l1, c1)

    while i < n:
        ch = src[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if src.startswith("//", i):
            while i < n and src[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if ch.isdigit():
            j = i
            while j < n and src[j].isdigit():
                j += 1
            text = src[i:j]
            col += j - i
            tokens.append(Token("nat", text, span(start_line, start_col, line, col - 1)))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            text = src[i:j]
            col += j - i
            kind = "kw" if text in KEYWORDS else "ident"
            tokens.append(Token(kind, text, span(start_line, start_col, line, col - 1)))
            i = j
            continue
        matched = None
        for sym in SYMBOLS:
            if src.startswith(sym, i):
                matched = sym
                break
        if matched is None:
            raise ParseError(f"unexpected character {ch!r}",
                             span(start_line, start_col, line, col))
        col += len(matched)
        tokens.append(Token(matched, matched,
                            span(start_line, start_col, line, col - 1)))
        i += len(matched)
    tokens.append(Token("eof", "", Span(line, col, line, col)))
    return tokens


class Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    # -- token plumbing -----------------------------------------------------

    def peek(self, offset=0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        tok = self.peek()
        return tok.kind == kind and (text is None or tok.text == text)

    def expect(self, kind: str, text: Optional[str] = None) -> Token:
        if not self.at(kind, text):
            tok = self.peek()
            want = text or kind
            raise ParseError(f"expected {want!r}, found {tok.text or tok.kind!r}",
                             tok.span, expected=(want,))
        return self.advance()

    def expect_kw(self, word: str) -> Token:
        return self.expect("kw", word)

    def ident(self) -> str:
        return self.expect("ident").text

    # -- terms ---------------------------------------------------------------

    def parse_term(self) -> Term:
        tok = self.peek()
        if tok.kind == "kw" and tok.text == "fun":
            return self.parse_fun()
        if tok.kind == "kw" and tok.text == "tfun":
            return self.parse_tfun()
        if tok.kind == "kw" and tok.text == "let":
            return self.parse_let()
        if tok.kind == "kw" and tok.text == "if":
            return self.parse_if()
        return self.parse_assign()

    def parse_fun(self) -> Term:
        start = self.expect_kw("fun").span
        self_name = self.ident()
        self.expect("(")
        param = self.ident()
        self.expect(":")
        domain = self.parse_qtype()
        self.expect(")")
        self.expect(":")
        codomain = self.parse_qtype()
        self.expect("=>")
        body = self.parse_term()
        return Abs(self_name, param, domain, codomain, body,
                   span=_join(start, _term_span(body)))

    def parse_tfun(self) -> Term:
        start = self.expect_kw("tfun").span
        self_name = self.ident()
        self.expect("(")
        tvar = self.ident()
        self.expect("^")
        qvar = self.ident()
        self.expect("<:")
        bound = self.parse_qtype()
        self.expect(")")
        self.expect("=>")
        body = self.parse_term()
        return TAbs(self_name, tvar, qvar, bound, body,
                    span=_join(start, _term_span(body)))

    def parse_let(self) -> Term:
        start = self.expect_kw("let").span
        name = self.ident()
        annot = None
        if self.at(":"):
            self.advance()
            annot = self.parse_qtype()
        self.expect("=")
        bound = self.parse_term()
        self.expect_kw("in")
        body = self.parse_term()
        fn = Abs(f"let%{name}", name, annot, None, body, from_let=True,
                 span=_join(start, _term_span(body)))
        return App(fn, bound, span=_join(start, _term_span(body)))

    def parse_if(self) -> Term:
        start = self.expect_kw("if").span
        cond = self.parse_term()
        self.expect_kw("then")
        then = self.parse_term()
        self.expect_kw("else")
        els = self.parse_term()
        return If(cond, then, els, span=_join(start, _term_span(els)))

    def parse_assign(self) -> Term:
        lhs = self.parse_mul()
        if self.at(":="):
            self.advance()
            rhs = self.parse_term()
            return Assign(lhs, rhs, span=_join(_term_span(lhs), _term_span(rhs)))
        return lhs

    def parse_mul(self) -> Term:
        left = self.parse_app()
        while self.at("*"):
            self.advance()
            right = self.parse_app()
            left = Mul(left, right, span=_join(_term_span(left), _term_span(right)))
        return left

    def _starts_operand(self) -> bool:
        tok = self.peek()
        if tok.kind in ("ident", "nat"):
            return True
        if tok.kind == "kw":
            return tok.text in ("unit", "true", "false", "ref", "succ", "pred",
                                "iszero")
        return tok.kind in ("(", "!", "@")

    def parse_app(self) -> Term:
        term = self.parse_unary()
        while True:
            if self.at("["):
                self.advance()
                targ = self.parse_qtype()
                close = self.expect("]")
                term = TApp(term, targ, span=_join(_term_span(term), close.span))
            elif self._starts_operand():
                arg = self.parse_unary()
                term = App(term, arg, span=_join(_term_span(term), _term_span(arg)))
            else:
                return term

    def parse_unary(self) -> Term:
        tok = self.peek()
        if tok.kind == "!":
            self.advance()
            inner = self.parse_unary()
            return Deref(inner, span=_join(tok.span, _term_span(inner)))
        if tok.kind == "kw" and tok.text in ("ref", "succ", "pred", "iszero"):
            self.advance()
            inner = self.parse_unary()
            ctor = {"ref": RefNew, "succ": Succ, "pred": Pred,
                    "iszero": IsZero}[tok.text]
            return ctor(inner, span=_join(tok.span, _term_span(inner)))
        return self.parse_atom()

    def parse_atom(self) -> Term:
        tok = self.peek()
        if tok.kind == "kw" and tok.text == "unit":
            self.advance()
            return UnitLit(span=tok.span)
        if tok.kind == "kw" and tok.text == "true":
            self.advance()
            return BoolLit(True, span=tok.span)
        if tok.kind == "kw" and tok.text == "false":
            self.advance()
            return BoolLit(False, span=tok.span)
        if tok.kind == "nat":
            self.advance()
            return NatLit(int(tok.text), span=tok.span)
        if tok.kind == "ident":
            self.advance()
            return Var(tok.text, span=tok.span)
        if tok.kind == "@":
            self.advance()
            num = self.expect("nat")
            return LocTerm(int(num.text), span=_join(tok.span, num.span))
        if tok.kind == "(":
            self.advance()
            inner = self.parse_term()
            if self.at(":"):
                self.advance()
                target = self.parse_qtype()
                close = self.expect(")")
                return Ascribe(inner, target, span=_join(tok.span, close.span))
            close = self.expect(")")
            if inner.span is not None:
                inner = _with_span(inner, _join(tok.span, close.span))
            return inner
        raise ParseError(f"expected a term, found {tok.text or tok.kind!r}",
                         tok.span,
                         expected=("unit", "literal", "identifier", "("))

    # -- types ----------------------------------------------------------------

    def parse_qtype(self) -> QualifiedType:
        ty = self.parse_type()
        self.expect("^")
        qual = self.parse_qual()
        return QualifiedType(ty, qual)

    def parse_type(self):
        tok = self.peek()
        if tok.kind == "kw":
            base = {"Unit": UNIT, "Nat": NAT, "Bool": BOOL,
                    "Top": TOP, "Bot": BOT}.get(tok.text)
            if base is not None:
                self.advance()
                return base
            if tok.text == "Ref":
                self.advance()
                self.expect("[")
                referent = self.parse_qtype()
                self.expect("]")
                return plain_ref(referent)
            if tok.text == "mu":
                self.advance()
                binder = self.ident()
                self.expect(".")
                self.expect_kw("Ref")
                self.expect("[")
                write = self.parse_qtype()
                read = write
                if self.at(","):
                    self.advance()
                    read = self.parse_qtype()
                self.expect("]")
                return RefDual(binder, write, read)
            if tok.text == "forall":
                self.advance()
                self_name = self.ident()
                self.expect("(")
                tvar = self.ident()
                self.expect("^")
                qvar = self.ident()
                self.expect("<:")
                bound = self.parse_qtype()
                self.expect(")")
                self.expect(".")
                body = self.parse_qtype()
                return All(self_name, tvar, qvar, bound, body)
        if tok.kind == "ident":
            self.advance()
            return TVar(tok.text)
        if tok.kind == "(":
            self.advance()
            self_name = self.ident()
            self.expect("(")
            param = self.ident()
            self.expect(":")
            domain = self.parse_qtype()
            self.expect(")")
            self.expect("->")
            codomain = self.parse_qtype()
            self.expect(")")
            return Fun(self_name, param, domain, codomain)
        raise ParseError(f"expected a type, found {tok.text or tok.kind!r}",
                         tok.span, expected=("type",))

    def parse_qual(self) -> Qualifier:
        self.expect("{")
        atoms = set()
        if not self.at("}"):
            while True:
                tok = self.peek()
                if tok.kind == "kw" and tok.text == "fresh":
                    self.advance()
                    atoms.add(FRESH)
                elif tok.kind == "&":
                    self.advance()
                    atoms.add(VarAtom(self.ident()))
                elif tok.kind == "@":
                    self.advance()
                    num = self.expect("nat")
                    atoms.add(LocAtom(int(num.text)))
                elif tok.kind == "ident":
                    self.advance()
                    atoms.add(VarAtom(tok.text))
                else:
                    raise ParseError(
                        f"expected a qualifier atom, found {tok.text or tok.kind!r}",
                        tok.span, expected=("identifier", "fresh"))
                if self.at(","):
                    self.advance()
                    continue
                break
        self.expect("}")
        return Qualifier(frozenset(atoms))


def _term_span(t: Term) -> Optional[Span]:
    return getattr(t, "span", None)


def _join(a: Optional[Span], b: Optional[Span]) -> Optional[Span]:
    if a is None:
        return b
    if b is None:
        return a
    return Span(a.start_line, a.start_col, b.end_line, b.end_col)


def _with_span(t: Term, span: Span) -> Term:
    object.__setattr__(t, "span", span)
    return t


def parse_term(src: str) -> Term:
    parser = Parser(lex(src))
    term = parser.parse_term()
    parser.expect("eof")
    return term


def parse_qtype(src: str) -> QualifiedType:
    parser = Parser(lex(src))
    qt = parser.parse_qtype()
    parser.expect("eof")
    return qt
