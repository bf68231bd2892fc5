"""Game of 24 with exact rational arithmetic.

Includes the environment the explorer drives, an enumerating child generator
that stands in for the model, and a brute-force solvability oracle.
"""

from __future__ import annotations

import ast
import itertools
import re
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable, Sequence

from ..core import (
    Action,
    ActionKind,
    AnswerVerdict,
    EventKind,
    InvalidStructure,
    Node,
    Propose,
    Question,
    Search,
    Trajectory,
)
from .base import ActionError

TARGET = Fraction(24)
# k large enough for the enumerator to cover the whole game tree: at most
# 36 moves from four numbers, and 36 * 18 = 648 nodes to expand at layer 2,
# which the per-layer quota of k expansions must admit.
COMPLETE_K = 648
OPS = ("+", "-", "*", "/")
_OP_ALIASES = {"+": "+", "-": "-", "−": "-", "*": "*", "×": "*", "x": "*", "/": "/", "÷": "/"}
_NUM = r"-?\d+(?:/\d+)?"
_EXPR_RE = re.compile(rf"^\s*\(?\s*({_NUM})\s*([+\-−*×x/÷])\s*({_NUM})\s*\)?\s*(?:=.*)?$")


def fmt(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _apply_op(a: Fraction, op: str, b: Fraction) -> Fraction:
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if b == 0:
        raise ActionError("division_by_zero", f"{fmt(a)} / 0")
    return a / b


@dataclass(frozen=True)
class Game24State:
    remaining: tuple[Fraction, ...]
    history: tuple[str, ...] = ()
    # expression that produced each remaining value, aligned with `remaining`
    expressions: tuple[str, ...] = ()

    def __post_init__(self):
        rem = tuple(Fraction(x) for x in self.remaining)
        object.__setattr__(self, "remaining", rem)
        object.__setattr__(self, "history", tuple(self.history))
        exprs = tuple(self.expressions) or tuple(fmt(x) for x in rem)
        object.__setattr__(self, "expressions", exprs)
        if not 1 <= len(rem) <= 4:
            raise InvalidStructure(f"a game state holds 1 to 4 numbers, got {len(rem)}")
        if len(exprs) != len(rem):
            raise InvalidStructure("expressions must align with remaining numbers")

    @classmethod
    def start(cls, numbers: Iterable[int | Fraction]) -> "Game24State":
        return cls(tuple(Fraction(n) for n in numbers))

    def describe(self) -> str:
        return "Remaining: " + " ".join(fmt(x) for x in self.remaining)


def parse_expression(expression: str) -> tuple[Fraction, str, Fraction]:
    m = _EXPR_RE.match(expression)
    if not m:
        raise ActionError("malformed_expression", f"expected 'a op b', got {expression!r}")
    return Fraction(m.group(1)), _OP_ALIASES[m.group(2)], Fraction(m.group(3))


def game24_apply(state: Game24State, expression: str) -> Game24State:
    """Combine two available numbers; raises :class:`ActionError` on misuse."""
    a, op, b = parse_expression(expression)
    rem = list(state.remaining)
    exprs = list(state.expressions)
    picked = []
    for v in (a, b):
        try:
            i = next(i for i, x in enumerate(rem) if x == v and i not in picked)
        except StopIteration:
            raise ActionError("operand_not_available", f"{fmt(v)} is not among {state.describe()}") from None
        picked.append(i)
    value = _apply_op(a, op, b)
    ea, eb = (exprs[i] for i in picked)
    wrap = lambda e: e if re.fullmatch(_NUM, e) else f"({e})"  # noqa: E731
    combined = f"{wrap(ea)} {op} {wrap(eb)}"
    keep = [i for i in range(len(rem)) if i not in picked]
    return Game24State(
        tuple(rem[i] for i in keep) + (value,),
        state.history + (f"{fmt(a)} {op} {fmt(b)} = {fmt(value)}",),
        tuple(exprs[i] for i in keep) + (combined,),
    )


def game24_solved(state: Game24State) -> bool:
    return len(state.remaining) == 1 and state.remaining[0] == TARGET


# ---------------------------------------------------------------------------
# Oracle


def _combinations(a: Fraction, b: Fraction, ea: str, eb: str) -> list[tuple[Fraction, str]]:
    options = [
        (a + b, f"({ea} + {eb})"),
        (a - b, f"({ea} - {eb})"),
        (b - a, f"({eb} - {ea})"),
        (a * b, f"({ea} * {eb})"),
    ]
    if b != 0:
        options.append((a / b, f"({ea} / {eb})"))
    if a != 0:
        options.append((b / a, f"({eb} / {ea})"))
    return options


@lru_cache(maxsize=None)
def _solvable(values: tuple[Fraction, ...]) -> bool:
    """Whether the sorted multiset ``values`` can reach 24 (shared across puzzles)."""
    if len(values) == 1:
        return values[0] == TARGET
    n = len(values)
    for i, j in itertools.combinations(range(n), 2):
        rest = tuple(values[x] for x in range(n) if x not in (i, j))
        for v, _ in _combinations(values[i], values[j], "", ""):
            if _solvable(tuple(sorted(rest + (v,)))):
                return True
    return False


def _witness(values: tuple[Fraction, ...], exprs: tuple[str, ...]) -> str:
    """Follow solvable moves down to one expression; ``values`` must be solvable."""
    while len(values) > 1:
        n = len(values)
        for i, j in itertools.combinations(range(n), 2):
            rest_v = tuple(values[x] for x in range(n) if x not in (i, j))
            rest_e = tuple(exprs[x] for x in range(n) if x not in (i, j))
            nxt = next(
                ((v, e) for v, e in _combinations(values[i], values[j], exprs[i], exprs[j]) if _solvable(tuple(sorted(rest_v + (v,))))),
                None,
            )
            if nxt is not None:
                values, exprs = rest_v + (nxt[0],), rest_e + (nxt[1],)
                break
    return exprs[0]


def game24_brute_force(numbers: Sequence[int]) -> tuple[bool, str | None]:
    """Exhaustive exact search over pairings, operators and orders.

    Returns ``(solvable, witness)`` where the witness is a fully
    parenthesized expression evaluating to exactly 24.
    """
    if len(numbers) != 4 or any(not 1 <= int(x) <= 13 for x in numbers):
        raise ValueError("expected exactly 4 integers in [1, 13]")
    vals = tuple(Fraction(int(x)) for x in sorted(numbers))
    if not _solvable(vals):
        return False, None
    witness = _witness(vals, tuple(str(int(x)) for x in sorted(numbers)))
    return True, witness[1:-1] if witness.startswith("(") and witness.endswith(")") else witness


def evaluate_expression(expression: str, numbers: Sequence[int | Fraction]) -> Fraction:
    """Evaluate an arithmetic expression exactly, requiring each number used once.

    Raises :class:`ActionError` (``malformed_expression``) on anything else.
    """
    text = expression.replace("×", "*").replace("÷", "/").replace("−", "-").split("=")[0]
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError:
        raise ActionError("malformed_expression", repr(expression)) from None
    used: list[Fraction] = []

    def ev(node: ast.AST) -> Fraction:
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, int) and not isinstance(node.value, bool):
            used.append(Fraction(node.value))
            return Fraction(node.value)
        if isinstance(node, ast.BinOp) and type(node.op) in (ast.Add, ast.Sub, ast.Mult, ast.Div):
            op = {ast.Add: "+", ast.Sub: "-", ast.Mult: "*", ast.Div: "/"}[type(node.op)]
            return _apply_op(ev(node.left), op, ev(node.right))
        raise ActionError("malformed_expression", f"unsupported syntax in {expression!r}")

    value = ev(tree)
    if Counter(used) != Counter(Fraction(n) for n in numbers):
        raise ActionError("operand_not_available", f"{expression!r} must use {[fmt(Fraction(n)) for n in numbers]} once each")
    return value


# ---------------------------------------------------------------------------
# Environment


class Game24Session:
    def __init__(self, numbers: Sequence[int]):
        self.numbers = tuple(numbers)
        self.state = Game24State.start(numbers)
        self.terminal = False
        self.final_answer: str | None = None

    def step(self, action: Action) -> str:
        if action.kind is ActionKind.SEARCH:
            return self.state.describe()
        if action.kind is ActionKind.PROPOSE:
            if self.terminal:
                raise ActionError("game_over", "no numbers left to combine")
            self.state = game24_apply(self.state, action.payload)
            if len(self.state.remaining) == 1:
                self.terminal = True
                self.final_answer = self.state.expressions[0]
            return self.state.describe()
        if action.kind is ActionKind.FINISH:
            self.terminal = True
            self.final_answer = action.payload
            return action.payload
        raise ActionError("unsupported_action", f"{action} is not available in the Game of 24")


class Game24Environment:
    """One puzzle. Layer-0 ``Search[numbers]`` just shows the starting numbers."""

    def __init__(self, numbers: Sequence[int]):
        if len(numbers) != 4:
            raise ValueError("a puzzle has exactly 4 numbers")
        self.numbers = tuple(int(n) for n in numbers)

    @classmethod
    def for_question(cls, question: Question) -> "Game24Environment":
        return cls(parse_puzzle(question.text))

    def seed_action(self, entity: str) -> Action:
        return Search(" ".join(map(str, self.numbers)))

    def new_session(self) -> Game24Session:
        return Game24Session(self.numbers)

    def state_after(self, path: Sequence[Node]) -> Game24State:
        state = Game24State.start(self.numbers)
        for n in path:
            if n.action.kind is ActionKind.PROPOSE and n.observation is not None:
                try:
                    state = game24_apply(state, n.action.payload)
                except ActionError:
                    pass
        return state

    def judge(self, question: Question, answer: str, trajectory: Trajectory, ctx=None) -> AnswerVerdict:
        """Exact check standing in for the model-based answer judge."""
        tail = trajectory.tail if trajectory.nodes else None
        if tail is not None and tail.action.is_finish:
            try:
                value = evaluate_expression(answer, self.numbers)
            except ActionError as exc:
                return AnswerVerdict(False, str(exc))
            ok = value == TARGET
            return AnswerVerdict(ok, f"{answer} = {fmt(value)}")
        state = self.state_after(trajectory.nodes)
        if game24_solved(state):
            return AnswerVerdict(True, f"{state.expressions[0]} = 24")
        return AnswerVerdict(False, f"{state.expressions[0]} = {fmt(state.remaining[0])}, not 24")

    def enumerating_generator(self) -> Callable:
        """Generator hook that proposes legal moves in canonical order."""
        env = self

        def generate(question, prefix, errors, k, ctx, *, observe=None, new_id=None, extra_siblings=()):
            parent = prefix.tail
            state = env.state_after(prefix.nodes)
            children = []
            for thought, action in game24_candidate_moves(state)[:k]:
                node = Node(new_id(), parent.branch, parent.depth + 1, parent.id, thought, action)
                ctx.trace.emit(EventKind.GENERATE, {"node": node.to_dict(), "slot": len(children)})
                if observe is not None:
                    node = observe(node)
                children.append(node)
            if not children:
                from ..generator import AllCandidatesFailed

                raise AllCandidatesFailed(f"no legal move from {state.describe()}")
            return children

        return generate


def game24_candidate_moves(state: Game24State) -> list[tuple[str, Action]]:
    """Every distinct legal move: sorted operand pairs, then + - * /.

    Subtraction is larger minus smaller; both division orders are kept when
    they differ. Pairs of equal values and repeated expressions appear once.
    """
    if len(state.remaining) < 2:
        raise ValueError("need at least two numbers to combine")
    vals = sorted(state.remaining)
    moves: list[tuple[str, Action]] = []
    seen: set[str] = set()
    for i, j in itertools.combinations(range(len(vals)), 2):
        a, b = vals[i], vals[j]
        exprs = [f"{fmt(a)} + {fmt(b)}", f"{fmt(b)} - {fmt(a)}", f"{fmt(a)} * {fmt(b)}"]
        if a != 0:
            exprs.append(f"{fmt(b)} / {fmt(a)}")
        if b != 0 and a != b:
            exprs.append(f"{fmt(a)} / {fmt(b)}")
        for e in exprs:
            if e in seen:
                continue
            seen.add(e)
            moves.append((f"Combine {e.replace(' ', '')}", Propose(e)))
    return moves


def game24_enumerate_children(
    state: Game24State,
    k: int,
    parent: Node | None = None,
    new_id: Callable[[], int] | None = None,
) -> list[Node]:
    """First ``k`` canonical moves from ``state`` as child nodes of ``parent``."""
    moves = game24_candidate_moves(state)[:k]
    ids = itertools.count((parent.id + 1) if parent else 1)
    new_id = new_id or (lambda: next(ids))
    branch, depth, pid = (parent.branch, parent.depth + 1, parent.id) if parent else (0, 1, None)
    return [Node(new_id(), branch, depth, pid, t, a) for t, a in moves]


def parse_puzzle(text: str) -> tuple[int, ...]:
    nums = tuple(int(x) for x in text.split())
    if len(nums) != 4:
        raise ValueError(f"expected 4 integers, got {text!r}")
    return nums


def load_puzzles(path: str | Path) -> list[tuple[int, ...]]:
    return [parse_puzzle(line) for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]

