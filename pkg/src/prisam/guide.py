"""Regex-constrained decoding guide.

Pipeline: regex text -> syntax tree -> Thompson NFA -> DFA by subset
construction -> trim to live states -> token-level index against a concrete
vocabulary. The index answers, per decoding state, which tokens may come
next, and it is length-aware: a token is only offered if the constraint can
still be finished (including EOS) within the remaining budget, so guided
generation cannot paint itself into a corner.

Supported syntax: literal characters, ``.``, character classes like
``[a-z0-9]`` and ``[^abc]``, grouping ``( )``, alternation ``|``, postfix
``*`` ``+`` ``?``, and ``\\`` before any non-alphanumeric character for a
literal. Escapes of letters or digits (``\\d`` style shorthands) are
rejected rather than silently diverging from common dialects. Matching is
anchored at both ends.

Text convention: a token sequence reads as its surfaces joined by single
spaces, so the guide matches the first token's surface, then a space plus
a surface for every following token. A DFA is only total over its own
alphabet (vocabulary characters plus characters mentioned in the regex);
anything else falls to the dead state.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import PrisamError
from .vocab import Vocabulary

INFINITE = -1  # distance marker in int arrays
_BIG = 1 << 30


class RegexSyntaxError(PrisamError):
    def __init__(self, message: str, position: int):
        super().__init__(f"regex syntax error at position {position}: {message}")
        self.position = position


class RejectedToken(PrisamError):
    def __init__(self, token_id: int, state: int):
        super().__init__(f"token {token_id} not allowed in guide state {state}")
        self.token_id = token_id
        self.state = state


def escape_literal(text: str) -> str:
    """Escape ``text`` so it matches itself as a regex."""
    out = []
    for c in text:
        if not (c.isalnum() or c == "_"):
            out.append("\\")
        out.append(c)
    return "".join(out)


# ---------------------------------------------------------------------------
# parsing

# node shapes:
#   ("eps",)                      empty string
#   ("char", negated, frozenset)  single-character matcher
#   ("cat", [nodes])  ("alt", [nodes])
#   ("star", node)  ("plus", node)  ("opt", node)


class _Parser:
    def __init__(self, pattern: str):
        self.pattern = pattern
        self.pos = 0

    def error(self, message: str, pos: int | None = None):
        raise RegexSyntaxError(message, self.pos if pos is None else pos)

    def peek(self) -> str | None:
        return self.pattern[self.pos] if self.pos < len(self.pattern) else None

    def take(self) -> str:
        c = self.pattern[self.pos]
        self.pos += 1
        return c

    def parse(self):
        node = self.alternation()
        if self.pos != len(self.pattern):
            self.error(f"unexpected {self.pattern[self.pos]!r}")
        return node

    def alternation(self):
        branches = [self.concat()]
        while self.peek() == "|":
            self.take()
            branches.append(self.concat())
        return branches[0] if len(branches) == 1 else ("alt", branches)

    def concat(self):
        parts = []
        while self.peek() not in (None, "|", ")"):
            parts.append(self.postfix())
        if not parts:
            return ("eps",)
        return parts[0] if len(parts) == 1 else ("cat", parts)

    def postfix(self):
        node = self.atom()
        while self.peek() in ("*", "+", "?"):
            op = self.take()
            kind = {"*": "star", "+": "plus", "?": "opt"}[op]
            node = (kind, node)
        return node

    def atom(self):
        start = self.pos
        c = self.take()
        if c == "(":
            node = self.alternation()
            if self.peek() != ")":
                self.error("unclosed group", start)
            self.take()
            return node
        if c == "[":
            return self.char_class(start)
        if c == ".":
            return ("char", True, frozenset())
        if c == "\\":
            return ("char", False, frozenset(self.escaped(start)))
        if c in "*+?":
            self.error(f"{c!r} needs something to repeat", start)
        return ("char", False, frozenset(c))

    def escaped(self, start: int) -> str:
        if self.peek() is None:
            self.error("dangling backslash", start)
        c = self.take()
        if c.isalnum():
            self.error(f"unsupported escape \\{c}", start)
        return c

    def char_class(self, start: int):
        negated = False
        if self.peek() == "^":
            self.take()
            negated = True
        chars = set()
        first = True
        while True:
            c = self.peek()
            if c is None:
                self.error("unclosed character class", start)
            if c == "]" and not first:
                self.take()
                break
            first = False
            self.take()
            if c == "\\":
                c = self.escaped(self.pos - 1)
            # range like a-z, unless '-' is first/last in the class
            if self.peek() == "-" and self.pattern[self.pos + 1 : self.pos + 2] not in ("]", ""):
                self.take()
                hi = self.take()
                if hi == "\\":
                    hi = self.escaped(self.pos - 1)
                if ord(hi) < ord(c):
                    self.error(f"bad range {c}-{hi}", start)
                chars.update(chr(o) for o in range(ord(c), ord(hi) + 1))
            else:
                chars.add(c)
        if not chars and not negated:
            self.error("empty character class", start)
        return ("char", negated, frozenset(chars))


def parse_regex(pattern: str):
    """Parse to a syntax tree; raises RegexSyntaxError with a position."""
    return _Parser(pattern).parse()


# ---------------------------------------------------------------------------
# NFA and DFA

class _Nfa:
    def __init__(self):
        self.eps: list[list[int]] = []
        self.arcs: list[list[tuple[tuple[bool, frozenset], int]]] = []

    def state(self) -> int:
        self.eps.append([])
        self.arcs.append([])
        return len(self.eps) - 1

    def fragment(self, node) -> tuple[int, int]:
        kind = node[0]
        if kind == "eps":
            s = self.state()
            return s, s
        if kind == "char":
            s, a = self.state(), self.state()
            self.arcs[s].append(((node[1], node[2]), a))
            return s, a
        if kind == "cat":
            first_s, prev_a = self.fragment(node[1][0])
            for part in node[1][1:]:
                s, a = self.fragment(part)
                self.eps[prev_a].append(s)
                prev_a = a
            return first_s, prev_a
        if kind == "alt":
            s, a = self.state(), self.state()
            for part in node[1]:
                fs, fa = self.fragment(part)
                self.eps[s].append(fs)
                self.eps[fa].append(a)
            return s, a
        if kind in ("star", "plus", "opt"):
            fs, fa = self.fragment(node[1])
            s, a = self.state(), self.state()
            self.eps[s].append(fs)
            self.eps[fa].append(a)
            if kind in ("star", "opt"):
                self.eps[s].append(a)
            if kind in ("star", "plus"):
                self.eps[fa].append(fs)
            return s, a
        raise AssertionError(f"unknown node {kind}")

    def closure(self, states: Iterable[int]) -> frozenset:
        seen = set(states)
        stack = list(seen)
        while stack:
            s = stack.pop()
            for t in self.eps[s]:
                if t not in seen:
                    seen.add(t)
                    stack.append(t)
        return frozenset(seen)


def _matches(matcher: tuple[bool, frozenset], char: str) -> bool:
    negated, chars = matcher
    return (char in chars) != negated


class Dfa:
    """Deterministic automaton over an explicit alphabet.

    All states except ``dead`` are live (some path reaches an accepting
    state). Transitions are total via the dead state: characters without an
    entry, including characters outside the alphabet, lead there.
    """

    def __init__(self, transitions, start, accepting, dead, alphabet):
        self.transitions: list[dict[str, int]] = transitions
        self.start: int = start
        self.accepting: frozenset[int] = accepting
        self.dead: int = dead
        self.alphabet: frozenset[str] = alphabet

    @property
    def n_states(self) -> int:
        return len(self.transitions)

    def step(self, state: int, char: str) -> int:
        return self.transitions[state].get(char, self.dead)

    def is_live(self, state: int) -> bool:
        return state != self.dead

    def run(self, state: int, text: str) -> int:
        for c in text:
            state = self.transitions[state].get(c, self.dead)
            if state == self.dead:
                break
        return state

    def accepts(self, text: str) -> bool:
        return self.run(self.start, text) in self.accepting


def build_dfa(node, alphabet: Iterable[str]) -> Dfa:
    """Subset construction, then trim: states that cannot reach acceptance
    collapse into the single dead state."""
    alphabet = frozenset(alphabet)
    nfa = _Nfa()
    start, accept = nfa.fragment(node)

    order = sorted(alphabet)
    subsets: dict[frozenset, int] = {}
    rows: list[dict[str, int]] = []
    worklist: list[frozenset] = []

    def intern(subset: frozenset) -> int:
        sid = subsets.get(subset)
        if sid is None:
            sid = len(rows)
            subsets[subset] = sid
            rows.append({})
            worklist.append(subset)
        return sid

    start_id = intern(nfa.closure([start]))
    while worklist:
        subset = worklist.pop(0)
        sid = subsets[subset]
        for c in order:
            targets = {t for s in subset for m, t in nfa.arcs[s] if _matches(m, c)}
            if targets:
                rows[sid][c] = intern(nfa.closure(targets))

    accepting_raw = {sid for subset, sid in subsets.items() if accept in subset}

    # live = can reach an accepting state
    reverse: list[set[int]] = [set() for _ in rows]
    for sid, row in enumerate(rows):
        for t in row.values():
            reverse[t].add(sid)
    live = set(accepting_raw)
    stack = list(live)
    while stack:
        s = stack.pop()
        for p in reverse[s]:
            if p not in live:
                live.add(p)
                stack.append(p)

    keep = [sid for sid in range(len(rows)) if sid in live]
    remap = {sid: i for i, sid in enumerate(keep)}
    dead = len(keep)
    transitions = []
    for sid in keep:
        transitions.append({c: remap.get(t, dead) for c, t in rows[sid].items() if t in live})
    transitions.append({})  # dead state loops via the .get default
    new_start = remap.get(start_id, dead)
    accepting = frozenset(remap[s] for s in accepting_raw)
    return Dfa(transitions, new_start, accepting, dead, alphabet)


# ---------------------------------------------------------------------------
# token-level index

class TokenIndex:
    """Token-level view of a character DFA for one vocabulary.

    State 0 is the fresh start (nothing emitted yet); state ``1 + c`` sits
    at character state ``c`` right after a token. Consuming token ``t``
    from the fresh start runs its surface through the DFA; from any other
    state it runs a space then the surface. EOS is allowed exactly in
    accepting states and ends the walk without moving.

    ``dist[s]`` is the minimum number of further non-EOS tokens needed to
    reach an accepting state (INFINITE when unreachable); masks can be
    narrowed by the remaining length budget so a walk never dead-ends.
    """

    def __init__(self, dfa: Dfa, vocab: Vocabulary):
        self.dfa = dfa
        self.vocab = vocab
        self.start = 0
        size = len(vocab)
        n = 1 + dfa.n_states
        self.n_states = n
        eos = vocab.eos_id

        next_state = np.full((n, size), -1, dtype=np.int32)
        for ts in range(n):
            cs = dfa.start if ts == 0 else ts - 1
            if cs == dfa.dead:
                continue
            for t in range(size):
                if t == eos:
                    continue
                text = vocab.surfaces[t] if ts == 0 else " " + vocab.surfaces[t]
                landed = dfa.run(cs, text)
                if landed != dfa.dead:
                    next_state[ts, t] = 1 + landed

        accepting = set()
        if dfa.start in dfa.accepting:
            accepting.add(0)
        for cs in dfa.accepting:
            accepting.add(1 + cs)
        self.accepting = frozenset(accepting)

        # BFS over reversed token edges, one token per layer
        dist = np.full(n, _BIG, dtype=np.int64)
        reverse: list[set[int]] = [set() for _ in range(n)]
        for ts in range(n):
            for t in range(size):
                target = next_state[ts, t]
                if target >= 0:
                    reverse[target].add(ts)
        queue = sorted(accepting)
        for ts in queue:
            dist[ts] = 0
        while queue:
            nxt = []
            for ts in queue:
                for p in reverse[ts]:
                    if dist[p] > dist[ts] + 1:
                        dist[p] = dist[ts] + 1
                        nxt.append(p)
            queue = nxt
        self._dist = dist

        # prune token edges whose target cannot reach acceptance
        self.next_state = next_state
        self.base_masks: list[np.ndarray] = []
        self.next_dist: list[np.ndarray] = []
        self.max_next_dist: list[int] = []
        for ts in range(n):
            mask = np.zeros(size, dtype=np.uint8)
            nd = np.full(size, _BIG, dtype=np.int64)
            for t in range(size):
                target = next_state[ts, t]
                if target >= 0:
                    if dist[target] < _BIG:
                        mask[t] = 1
                        nd[t] = dist[target]
                    else:
                        next_state[ts, t] = -1
            if ts in self.accepting:
                mask[eos] = 1
                nd[eos] = -1  # passes every length filter
            finite = nd[(nd < _BIG) & (nd >= 0)]
            self.max_next_dist.append(int(finite.max()) if finite.size else -1)
            mask.flags.writeable = False
            self.base_masks.append(mask)
            self.next_dist.append(nd)

    def dist(self, state: int) -> int | None:
        """Min non-EOS tokens to an accepting state, or None if unreachable."""
        d = int(self._dist[state])
        return None if d >= _BIG else d

    def mask_for(self, state: int, remaining: int | None = None) -> np.ndarray:
        """Allowed-token mask, optionally narrowed to a remaining budget of
        ``remaining`` sequence slots (EOS included)."""
        base = self.base_masks[state]
        if remaining is None or remaining - 2 >= self.max_next_dist[state]:
            return base
        mask = (base.astype(bool) & (self.next_dist[state] <= remaining - 2)).astype(np.uint8)
        mask.flags.writeable = False
        return mask

    def allowed_tokens(self, state: int, remaining: int | None = None) -> tuple[int, ...]:
        return tuple(int(t) for t in np.nonzero(self.mask_for(state, remaining))[0])

    def step(self, state: int, token: int) -> int:
        """Advance by one allowed token. EOS is terminal: permitted only in
        accepting states, leaving the state unchanged."""
        if token == self.vocab.eos_id:
            if state in self.accepting:
                return state
            raise RejectedToken(token, state)
        target = int(self.next_state[state, token]) if 0 <= token < len(self.vocab) else -1
        if target < 0:
            raise RejectedToken(token, state)
        return target


class Guide:
    """Compiled regex constraint bound to a vocabulary."""

    def __init__(self, regex: str, vocab: Vocabulary):
        self.regex = regex
        self.vocab = vocab
        node = parse_regex(regex)
        alphabet = set(" ")
        for s in vocab.surfaces:
            alphabet.update(s)
        stack = [node]
        while stack:
            n = stack.pop()
            if n[0] == "char":
                alphabet.update(n[2])
            elif n[0] in ("cat", "alt"):
                stack.extend(n[1])
            elif n[0] in ("star", "plus", "opt"):
                stack.append(n[1])
        self.dfa = build_dfa(node, alphabet)
        self.index = TokenIndex(self.dfa, vocab)

    @property
    def min_tokens(self) -> int | None:
        """Length of the shortest matching token sequence (EOS excluded),
        or None when no vocabulary sequence matches at all."""
        return self.index.dist(self.index.start)

    def language_empty(self, max_length: int | None = None) -> bool:
        """True when no token sequence (plus EOS) can satisfy the regex,
        optionally within a total budget of ``max_length`` slots."""
        d = self.min_tokens
        if d is None:
            return True
        return max_length is not None and d + 1 > max_length

    def matches_text(self, text: str) -> bool:
        return self.dfa.accepts(text)

    def matches_tokens(self, tokens: Sequence[int]) -> bool:
        """Walk the index over a full sample (EOS-terminated or not)."""
        state = self.index.start
        for i, t in enumerate(tokens):
            if t == self.vocab.eos_id:
                return state in self.index.accepting and i == len(tokens) - 1
            target = int(self.index.next_state[state, t]) if 0 <= t < len(self.vocab) else -1
            if target < 0:
                return False
            state = target
        return state in self.index.accepting


def compile_guide(regex: str, vocab: Vocabulary) -> Guide:
    return Guide(regex, vocab)
