"""Scenario scripts: a line-oriented DSL plus the built-in 8-node fixture.

A scenario fixes the hypercube dimension, routing mode, seed, radio
range and timers, then lists timed events::

    dim 4
    mode proactive
    at 0 join a 0.0 0.0
    at 1 join b 0.9 0.0
    at 5 send a b
    at 6 resolve a b

``#`` starts a comment.  Events may appear out of order; they are
stably sorted by tick.  ``pin_hash NAME BITS`` overrides the virtual
address an identifier hashes to, which makes specific rendezvous
managers reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

EVENT_KINDS = ("join", "leave", "move", "send", "resolve", "cut", "link", "pin_hash")

MODES = ("proactive", "reactive")


class ScenarioParseError(ValueError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


@dataclass(frozen=True)
class ScenarioEvent:
    tick: int
    kind: str
    args: tuple
    line: int = 0


@dataclass
class Scenario:
    dim: int = 4
    mode: str = "proactive"
    seed: int = 0
    radio_range: float = 1.0
    mark_lifetime: int = 1000
    cache_lifetime: int = 500
    events: list[ScenarioEvent] = field(default_factory=list)

    def sorted_events(self) -> list[ScenarioEvent]:
        return sorted(self.events, key=lambda e: e.tick)


def _int(token: str, line_no: int, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise ScenarioParseError(line_no, f"{what} must be an integer, got {token!r}") from None


def _float(token: str, line_no: int, what: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise ScenarioParseError(line_no, f"{what} must be a number, got {token!r}") from None


def parse_scenario(text: str) -> Scenario:
    """Parse scenario text; raises ScenarioParseError with the offending line."""
    sc = Scenario()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        head = tokens[0]
        if head == "dim":
            if len(tokens) != 2:
                raise ScenarioParseError(line_no, "dim takes one argument")
            sc.dim = _int(tokens[1], line_no, "dim")
            if not 1 <= sc.dim <= 64:
                raise ScenarioParseError(line_no, f"dim must be in [1, 64], got {sc.dim}")
        elif head == "mode":
            if len(tokens) != 2 or tokens[1] not in MODES:
                raise ScenarioParseError(line_no, f"mode must be one of {MODES}")
            sc.mode = tokens[1]
        elif head == "seed":
            if len(tokens) != 2:
                raise ScenarioParseError(line_no, "seed takes one argument")
            sc.seed = _int(tokens[1], line_no, "seed")
        elif head == "range":
            if len(tokens) != 2:
                raise ScenarioParseError(line_no, "range takes one argument")
            sc.radio_range = _float(tokens[1], line_no, "range")
        elif head == "mark_lifetime":
            if len(tokens) != 2:
                raise ScenarioParseError(line_no, "mark_lifetime takes one argument")
            sc.mark_lifetime = _int(tokens[1], line_no, "mark_lifetime")
        elif head == "cache_lifetime":
            if len(tokens) != 2:
                raise ScenarioParseError(line_no, "cache_lifetime takes one argument")
            sc.cache_lifetime = _int(tokens[1], line_no, "cache_lifetime")
        elif head == "at":
            sc.events.append(_parse_event(tokens, line_no))
        else:
            raise ScenarioParseError(line_no, f"unknown directive {head!r}")
    for ev in sc.events:
        if ev.kind == "pin_hash":
            bits = ev.args[1]
            if len(bits) != sc.dim:
                raise ScenarioParseError(
                    ev.line, f"pin_hash value {bits!r} is not {sc.dim} bits"
                )
    sc.events = sc.sorted_events()
    return sc


def _parse_event(tokens: list[str], line_no: int) -> ScenarioEvent:
    if len(tokens) < 3:
        raise ScenarioParseError(line_no, "event needs at least 'at TICK KIND'")
    tick = _int(tokens[1], line_no, "tick")
    if tick < 0:
        raise ScenarioParseError(line_no, f"tick must be non-negative, got {tick}")
    kind = tokens[2]
    args = tokens[3:]
    if kind == "join" or kind == "move":
        if len(args) != 3:
            raise ScenarioParseError(line_no, f"{kind} takes NAME X Y")
        return ScenarioEvent(
            tick, kind, (args[0], _float(args[1], line_no, "x"), _float(args[2], line_no, "y")), line_no
        )
    if kind == "leave":
        if len(args) != 1:
            raise ScenarioParseError(line_no, "leave takes NAME")
        return ScenarioEvent(tick, kind, (args[0],), line_no)
    if kind == "send":
        if len(args) not in (2, 3):
            raise ScenarioParseError(line_no, "send takes SRC DST [COUNT]")
        count = _int(args[2], line_no, "count") if len(args) == 3 else 1
        if count < 1:
            raise ScenarioParseError(line_no, f"count must be positive, got {count}")
        return ScenarioEvent(tick, kind, (args[0], args[1], count), line_no)
    if kind == "resolve":
        if len(args) != 2:
            raise ScenarioParseError(line_no, "resolve takes SRC DST")
        return ScenarioEvent(tick, kind, (args[0], args[1]), line_no)
    if kind in ("cut", "link"):
        if len(args) != 2:
            raise ScenarioParseError(line_no, f"{kind} takes A B")
        return ScenarioEvent(tick, kind, (args[0], args[1]), line_no)
    if kind == "pin_hash":
        if len(args) != 2 or any(c not in "01" for c in args[1]):
            raise ScenarioParseError(line_no, "pin_hash takes NAME BITS")
        return ScenarioEvent(tick, kind, (args[0], args[1]), line_no)
    raise ScenarioParseError(line_no, f"unknown event kind {kind!r}")


# The 8-node demonstration network.  Positions realize exactly the
# intended radio graph under unit range: a 7-cycle of neighbors plus one
# node (1010) physically wedged between 1000 and 0100 without reaching
# anyone else.  Join order makes delegation reproduce the advertised
# addresses and masks; names equal final main addresses.
FIG3_POSITIONS: dict[str, tuple[float, float]] = {
    "0000": (1.20, 0.00),
    "1000": (0.66, 0.82),
    "0100": (0.66, -0.82),
    "1100": (-0.23, 1.02),
    "1110": (-0.95, 0.46),
    "1111": (-0.95, -0.46),
    "0110": (-0.23, -1.02),
    "1010": (0.10, 0.00),
}

FIG3_JOIN_ORDER = ["0000", "1000", "0100", "1100", "1110", "1111", "0110", "1010"]

FIG3_DEMOS = {
    "send-1110-0110": "proactive",
    "resolve-0110-1101": "proactive",
    "reactive-0100-1111": "reactive",
    "reactive-1000-0110": "reactive",
    "recover-1100-1110": "proactive",
}


def build_fixture_fig3(mode: str | None = None, demo: str | None = None) -> Scenario:
    """The demonstration network, optionally with one scripted demo on top.

    Demos pick their natural routing mode unless ``mode`` overrides it.
    """
    if demo is not None and demo not in FIG3_DEMOS:
        raise ValueError(f"unknown demo {demo!r}; choose from {sorted(FIG3_DEMOS)}")
    if mode is None:
        mode = FIG3_DEMOS[demo] if demo is not None else "proactive"
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")

    events: list[ScenarioEvent] = [
        ScenarioEvent(0, "pin_hash", ("1010", "1101")),
        ScenarioEvent(0, "pin_hash", ("0100", "0101")),
    ]
    for i, name in enumerate(FIG3_JOIN_ORDER, start=1):
        x, y = FIG3_POSITIONS[name]
        events.append(ScenarioEvent(i, "join", (name, x, y)))

    if demo == "send-1110-0110":
        events.append(ScenarioEvent(30, "send", ("1110", "0110", 1)))
    elif demo == "resolve-0110-1101":
        events.append(ScenarioEvent(30, "resolve", ("0110", "1010")))
    elif demo == "reactive-0100-1111":
        events.append(ScenarioEvent(30, "send", ("0100", "1111", 1)))
    elif demo == "reactive-1000-0110":
        events.append(ScenarioEvent(30, "send", ("1000", "0110", 1)))
    elif demo == "recover-1100-1110":
        events.append(ScenarioEvent(30, "cut", ("1100", "1110")))
        for src in FIG3_JOIN_ORDER:
            for dst in FIG3_JOIN_ORDER:
                if src != dst:
                    events.append(ScenarioEvent(60, "send", (src, dst, 1)))

    sc = Scenario(dim=4, mode=mode, radio_range=1.0, events=events)
    sc.events = sc.sorted_events()
    return sc


def scenario_with_seed(sc: Scenario, seed: int) -> Scenario:
    return replace(sc, seed=seed, events=list(sc.events))
