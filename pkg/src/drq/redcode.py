"""Redcode assembly: tokenize, parse, validate, normalize, and re-emit warriors.

The dialect is the ICWS'94 draft instruction set (no P-space): 16 opcodes
plus the CMP alias, 7 modifiers, 8 addressing modes, ORG/END/EQU directives,
labels, and ``;`` comments.  Parsing resolves every label to a relative
offset, substitutes EQU constants, applies default modifiers, and normalizes
all field values modulo the core size.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from enum import Enum, IntEnum


class Opcode(IntEnum):
    DAT = 0
    MOV = 1
    ADD = 2
    SUB = 3
    MUL = 4
    DIV = 5
    MOD = 6
    JMP = 7
    JMZ = 8
    JMN = 9
    DJN = 10
    SPL = 11
    SEQ = 12
    SNE = 13
    SLT = 14
    NOP = 15


class Modifier(IntEnum):
    A = 0
    B = 1
    AB = 2
    BA = 3
    F = 4
    X = 5
    I = 6


class Mode(IntEnum):
    """Addressing modes, in the order (symbol): # $ * @ { < } >."""

    IMMEDIATE = 0
    DIRECT = 1
    A_INDIRECT = 2
    B_INDIRECT = 3
    A_PREDEC = 4
    B_PREDEC = 5
    A_POSTINC = 6
    B_POSTINC = 7


MODE_SYMBOLS = "#$*@{<}>"
_SYMBOL_TO_MODE = {sym: Mode(i) for i, sym in enumerate(MODE_SYMBOLS)}

# CMP assembles to the same instruction as SEQ.
OPCODE_ALIASES = {"CMP": Opcode.SEQ}

_ARITH = (Opcode.ADD, Opcode.SUB, Opcode.MUL, Opcode.DIV, Opcode.MOD)
_BRANCH = (Opcode.JMP, Opcode.JMZ, Opcode.JMN, Opcode.DJN, Opcode.SPL, Opcode.NOP)

_LABEL_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NAME_COMMENT_RE = re.compile(r"^\s*name\s+(.+?)\s*$", re.IGNORECASE)


class ParseError(Exception):
    """Parse diagnostic carrying a 1-based source line number."""

    def __init__(self, line: int, message: str):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}")


class UnknownOpcode(ParseError):
    pass


class UnknownLabel(ParseError):
    pass


class DuplicateLabel(ParseError):
    pass


class TooLong(ParseError):
    pass


class NoInstructions(ParseError):
    pass


class MalformedField(ParseError):
    pass


@dataclass(frozen=True)
class Field:
    """One operand: addressing mode plus a value normalized into [0, core)."""

    mode: Mode
    value: int

    def __str__(self) -> str:
        return f"{MODE_SYMBOLS[self.mode]}{self.value}"


@dataclass(frozen=True)
class Instruction:
    opcode: Opcode
    modifier: Modifier
    a: Field
    b: Field

    def __str__(self) -> str:
        return f"{self.opcode.name}.{self.modifier.name} {self.a}, {self.b}"


@dataclass
class Warrior:
    """A parsed, fully resolved Redcode program."""

    name: str
    instructions: tuple[Instruction, ...]
    start: int
    source: str = field(compare=False, default="", repr=False)

    def __len__(self) -> int:
        return len(self.instructions)

    @property
    def digest(self) -> str:
        """SHA-256 of the canonical program body (name excluded)."""
        body = _emit_body(self)
        return hashlib.sha256(body.encode("utf-8")).hexdigest()


def default_modifier(op: Opcode, a_mode: Mode, b_mode: Mode) -> Modifier:
    """ICWS'94-draft default modifier for an instruction without an explicit one."""
    a_imm = a_mode == Mode.IMMEDIATE
    b_imm = b_mode == Mode.IMMEDIATE
    if op == Opcode.DAT:
        return Modifier.F
    if op in (Opcode.MOV, Opcode.SEQ, Opcode.SNE):
        if a_imm:
            return Modifier.AB
        if b_imm:
            return Modifier.B
        return Modifier.I
    if op in _ARITH:
        if a_imm:
            return Modifier.AB
        if b_imm:
            return Modifier.B
        return Modifier.F
    if op == Opcode.SLT:
        return Modifier.AB if a_imm else Modifier.B
    # JMP, JMZ, JMN, DJN, SPL, NOP
    return Modifier.B


# --------------------------------------------------------------------------
# Expression evaluation (EQU bodies and operand expressions)
# --------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/()]))"
)


def _tokenize_expr(text: str, line: int) -> list[str]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise MalformedField(line, f"bad expression near {text[pos:]!r}")
        tokens.append(m.group(m.lastgroup))
        pos = m.end()
    return tokens


class _ExprEval:
    """Recursive-descent evaluator for +, -, *, /, parentheses.

    Identifiers resolve through EQU constants (textual-substitution
    semantics, so an EQU body may reference labels, which are evaluated
    relative to the use site) and then through instruction labels.
    """

    def __init__(self, equs: dict[str, str], labels: dict[str, int], line_of_equ: dict[str, int]):
        self.equs = equs
        self.labels = labels
        self.line_of_equ = line_of_equ

    def eval(self, text: str, line: int, at_index: int, active: frozenset[str] = frozenset()) -> int:
        tokens = _tokenize_expr(text, line)
        if not tokens:
            raise MalformedField(line, "empty expression")
        value, rest = self._expr(tokens, line, at_index, active)
        if rest:
            raise MalformedField(line, f"trailing tokens in expression: {' '.join(rest)}")
        return value

    def _expr(self, toks, line, at_index, active):
        value, toks = self._term(toks, line, at_index, active)
        while toks and toks[0] in "+-":
            op = toks[0]
            rhs, toks = self._term(toks[1:], line, at_index, active)
            value = value + rhs if op == "+" else value - rhs
        return value, toks

    def _term(self, toks, line, at_index, active):
        value, toks = self._unary(toks, line, at_index, active)
        while toks and toks[0] in "*/":
            op = toks[0]
            rhs, toks = self._unary(toks[1:], line, at_index, active)
            if op == "*":
                value = value * rhs
            else:
                if rhs == 0:
                    raise MalformedField(line, "division by zero in expression")
                value = int(value / rhs)  # truncate toward zero, C-style
        return value, toks

    def _unary(self, toks, line, at_index, active):
        if not toks:
            raise MalformedField(line, "truncated expression")
        if toks[0] == "-":
            value, rest = self._unary(toks[1:], line, at_index, active)
            return -value, rest
        if toks[0] == "+":
            return self._unary(toks[1:], line, at_index, active)
        return self._atom(toks, line, at_index, active)

    def _atom(self, toks, line, at_index, active):
        tok = toks[0]
        if tok == "(":
            value, rest = self._expr(toks[1:], line, at_index, active)
            if not rest or rest[0] != ")":
                raise MalformedField(line, "unbalanced parenthesis")
            return value, rest[1:]
        if tok.isdigit():
            return int(tok), toks[1:]
        if _LABEL_RE.fullmatch(tok):
            if tok in active:
                raise MalformedField(line, f"circular EQU reference through {tok!r}")
            if tok in self.equs:
                value = self.eval(
                    self.equs[tok], self.line_of_equ.get(tok, line), at_index, active | {tok}
                )
                return value, toks[1:]
            if tok in self.labels:
                return self.labels[tok] - at_index, toks[1:]
            raise UnknownLabel(line, f"unknown symbol {tok!r}")
        raise MalformedField(line, f"unexpected token {tok!r}")


# --------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------

@dataclass
class _RawInstruction:
    line: int
    opcode: Opcode
    modifier: Modifier | None
    a_mode: Mode | None
    a_expr: str | None
    b_mode: Mode | None
    b_expr: str | None


_DIRECTIVES = {"ORG", "END", "EQU"}
_OPCODE_NAMES = {op.name for op in Opcode} | set(OPCODE_ALIASES)


def _split_comment(raw: str) -> tuple[str, str | None]:
    idx = raw.find(";")
    if idx < 0:
        return raw, None
    return raw[:idx], raw[idx + 1 :]


def _split_operands(text: str, line: int) -> list[str]:
    """Split on commas that are not inside parentheses."""
    parts = []
    depth = 0
    current = []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth = max(0, depth - 1)
        if ch == "," and depth == 0:
            parts.append("".join(current).strip())
            current = []
        else:
            current.append(ch)
    parts.append("".join(current).strip())
    if len(parts) > 2:
        raise MalformedField(line, f"too many operands ({len(parts)})")
    return [p for p in parts if p] if parts != [""] else []


def _parse_operand(text: str, line: int) -> tuple[Mode | None, str]:
    text = text.strip()
    if not text:
        raise MalformedField(line, "empty operand")
    if text[0] in _SYMBOL_TO_MODE:
        expr = text[1:].strip()
        if not expr:
            raise MalformedField(line, f"addressing mode {text[0]!r} without a value")
        return _SYMBOL_TO_MODE[text[0]], expr
    return None, text


def parse(
    source: str,
    core_size: int,
    max_length: int,
    default_name: str = "",
) -> Warrior:
    """Parse Redcode text into a fully resolved :class:`Warrior`.

    Labels become relative offsets, EQU constants are substituted, default
    modifiers applied, and field values normalized modulo ``core_size``.
    Text after END is ignored.  Raises a :class:`ParseError` subclass with a
    line number on any malformed input.
    """
    if core_size < 1 or max_length < 1:
        raise ValueError("core_size and max_length must be >= 1")

    name = default_name
    equs: dict[str, str] = {}
    equ_lines: dict[str, int] = {}
    labels: dict[str, int] = {}
    raw: list[_RawInstruction] = []
    pending_labels: list[tuple[str, int]] = []
    org_expr: tuple[str, int] | None = None
    end_expr: tuple[str, int] | None = None

    lines = source.replace("\r\n", "\n").replace("\r", "\n").split("\n")
    ended = False
    for lineno, raw_line in enumerate(lines, start=1):
        if ended:
            break
        code, comment = _split_comment(raw_line)
        if comment is not None:
            m = _NAME_COMMENT_RE.match(comment)
            if m and name == default_name:
                name = m.group(1)
        code = code.strip()
        if not code:
            continue

        tokens = code.split(None, 1)
        head = tokens[0]
        rest = tokens[1].strip() if len(tokens) > 1 else ""

        # Leading labels (possibly several, possibly on their own line).  A
        # token in opcode position that matches nothing is an unknown opcode,
        # not a label.
        while True:
            word = head.rstrip(":")
            upper = word.upper()
            if upper.split(".", 1)[0] in _OPCODE_NAMES or upper in _DIRECTIVES:
                break
            if not _LABEL_RE.fullmatch(word):
                raise MalformedField(lineno, f"bad label or opcode {head!r}")
            rest_word = rest.split(None, 1)[0].rstrip(":") if rest else ""
            rest_upper = rest_word.upper()
            # 'label EQU expr' defines a constant rather than a code label.
            if rest_upper == "EQU":
                body = rest.split(None, 1)[1] if len(rest.split(None, 1)) > 1 else ""
                if not body.strip():
                    raise MalformedField(lineno, "EQU without an expression")
                if word in equs or word in labels:
                    raise DuplicateLabel(lineno, f"duplicate symbol {word!r}")
                equs[word] = body.strip()
                equ_lines[word] = lineno
                head = ""
                break
            if rest and not (
                rest_upper.split(".", 1)[0] in _OPCODE_NAMES
                or rest_upper in _DIRECTIVES
                or _LABEL_RE.fullmatch(rest_word)
            ):
                raise UnknownOpcode(lineno, f"unknown opcode {head!r}")
            pending_labels.append((word, lineno))
            if not rest:
                head = ""
                break
            tokens = rest.split(None, 1)
            head = tokens[0]
            rest = tokens[1].strip() if len(tokens) > 1 else ""
        if not head:
            continue

        upper = head.upper()
        if upper == "EQU":
            raise MalformedField(lineno, "EQU requires a label")
        if upper == "ORG":
            if not rest:
                rest = "0"
            org_expr = (rest, lineno)
            continue
        if upper == "END":
            if rest:
                end_expr = (rest, lineno)
            ended = True
            continue

        op_name, dot, mod_name = upper.partition(".")
        if op_name not in _OPCODE_NAMES:
            raise UnknownOpcode(lineno, f"unknown opcode {head!r}")
        opcode = OPCODE_ALIASES[op_name] if op_name in OPCODE_ALIASES else Opcode[op_name]
        modifier: Modifier | None = None
        if dot:
            if mod_name not in Modifier.__members__:
                raise MalformedField(lineno, f"unknown modifier {mod_name!r}")
            modifier = Modifier[mod_name]

        for label, label_line in pending_labels:
            if label in labels or label in equs:
                raise DuplicateLabel(label_line, f"duplicate symbol {label!r}")
            labels[label] = len(raw)
        pending_labels.clear()

        operands = _split_operands(rest, lineno)
        if len(operands) == 0:
            a_mode, a_expr = None, None
            b_mode, b_expr = None, None
            if opcode != Opcode.NOP:
                raise MalformedField(lineno, f"{op_name} requires at least one operand")
        elif len(operands) == 1:
            a_mode, a_expr = _parse_operand(operands[0], lineno)
            b_mode, b_expr = None, None
        else:
            a_mode, a_expr = _parse_operand(operands[0], lineno)
            b_mode, b_expr = _parse_operand(operands[1], lineno)

        raw.append(_RawInstruction(lineno, opcode, modifier, a_mode, a_expr, b_mode, b_expr))
        if len(raw) > max_length:
            raise TooLong(lineno, f"program exceeds {max_length} instructions")

    if not raw:
        raise NoInstructions(max(len(lines), 1), "no instructions")
    if pending_labels:
        # Labels at the end of the file with nothing to attach to.
        label, label_line = pending_labels[0]
        raise MalformedField(label_line, f"label {label!r} precedes no instruction")

    evaluator = _ExprEval(equs, labels, equ_lines)
    instructions = []
    for index, ri in enumerate(raw):
        if ri.a_expr is None:
            a = Field(Mode.DIRECT, 0)
        else:
            value = evaluator.eval(ri.a_expr, ri.line, index) % core_size
            a = Field(ri.a_mode if ri.a_mode is not None else Mode.DIRECT, value)
        if ri.b_expr is None:
            b = Field(Mode.DIRECT, 0)
        else:
            value = evaluator.eval(ri.b_expr, ri.line, index) % core_size
            b = Field(ri.b_mode if ri.b_mode is not None else Mode.DIRECT, value)
        modifier = ri.modifier
        if modifier is None:
            modifier = default_modifier(ri.opcode, a.mode, b.mode)
        instructions.append(Instruction(ri.opcode, modifier, a, b))

    start = 0
    expr = org_expr if org_expr is not None else end_expr
    if expr is not None:
        start = evaluator.eval(expr[0], expr[1], 0)
        if not 0 <= start < len(instructions):
            raise MalformedField(expr[1], f"start {start} outside program of length {len(instructions)}")

    return Warrior(name=name, instructions=tuple(instructions), start=start, source=source)


# --------------------------------------------------------------------------
# Emission
# --------------------------------------------------------------------------

def _emit_body(w: Warrior) -> str:
    lines = [f"ORG {w.start}"]
    lines.extend(str(ins) for ins in w.instructions)
    lines.append("END")
    return "\n".join(lines) + "\n"


def emit(w: Warrior) -> str:
    """Canonical text for a warrior: parse(emit(w)) reproduces it field-for-field."""
    body = _emit_body(w)
    if w.name:
        return f";name {w.name}\n" + body
    return body
