"""Workload scripts: a line-oriented mutator language.

One directive per line; ``#`` starts a comment::

    alloc NAME SIZE          allocate a SIZE-byte node, bind handle NAME to it
    copy SRC DST             bind DST to a copy of handle SRC
    drop NAME                drop handle NAME
    link PARENT CHILD        store a copy of CHILD in PARENT's child list
    unlink PARENT CHILD      remove the first such child handle
    collect                  force a collection
    assert_live NAME         the record NAME points at is still allocated
    assert_reclaimed NAME    the record NAME points at has been reclaimed

Every name is introduced exactly once, by ``alloc`` or as the target of
``copy``.  After ``drop NAME`` the name still identifies its record for
the assertions but can no longer be used as a handle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

ARITY = {
    "alloc": 2,
    "copy": 2,
    "drop": 1,
    "link": 2,
    "unlink": 2,
    "collect": 0,
    "assert_live": 1,
    "assert_reclaimed": 1,
}


class ScriptError(ValueError):
    def __init__(self, line: int, token: str, message: str) -> None:
        self.line = line
        self.token = token
        super().__init__(f"line {line}: {message} (at {token!r})")


@dataclass(frozen=True)
class Directive:
    op: str
    args: tuple[str, ...] = ()
    line: int = field(default=0, compare=False)

    def __str__(self) -> str:
        return " ".join((self.op, *self.args))


@dataclass
class WorkloadScript:
    directives: list[Directive] = field(default_factory=list)

    def __iter__(self):
        return iter(self.directives)

    def __len__(self) -> int:
        return len(self.directives)

    def to_text(self) -> str:
        return "".join(f"{d}\n" for d in self.directives)


class _Validator:
    def __init__(self) -> None:
        self.names: set[str] = set()
        self.dropped: set[str] = set()

    def introduce(self, name: str, line: int) -> None:
        if name in self.names:
            raise ScriptError(line, name, f"name {name!r} is already defined")
        self.names.add(name)

    def handle(self, name: str, line: int) -> None:
        if name not in self.names:
            raise ScriptError(line, name, f"undefined name {name!r}")
        if name in self.dropped:
            raise ScriptError(line, name, f"handle {name!r} was dropped")

    def record(self, name: str, line: int) -> None:
        if name not in self.names:
            raise ScriptError(line, name, f"undefined name {name!r}")

    def check(self, d: Directive) -> None:
        op, args, line = d.op, d.args, d.line
        if op == "alloc":
            name, size = args
            try:
                if int(size) < 0:
                    raise ValueError
            except ValueError:
                raise ScriptError(line, size, "size must be a non-negative integer") from None
            self.introduce(name, line)
        elif op == "copy":
            self.handle(args[0], line)
            self.introduce(args[1], line)
        elif op == "drop":
            self.handle(args[0], line)
            self.dropped.add(args[0])
        elif op in ("link", "unlink"):
            self.handle(args[0], line)
            self.handle(args[1], line)
        elif op in ("assert_live", "assert_reclaimed"):
            self.record(args[0], line)


def parse_script(text: str) -> WorkloadScript:
    """Parse and validate ``text``; raises :class:`ScriptError` on the first problem."""
    validator = _Validator()
    directives = []
    for number, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if not tokens:
            continue
        op, args = tokens[0], tuple(tokens[1:])
        if op not in ARITY:
            raise ScriptError(number, op, f"unknown directive {op!r}")
        if len(args) != ARITY[op]:
            token = args[ARITY[op]] if len(args) > ARITY[op] else op
            raise ScriptError(number, token, f"{op} takes {ARITY[op]} argument(s), got {len(args)}")
        directive = Directive(op, args, number)
        validator.check(directive)
        directives.append(directive)
    return WorkloadScript(directives)


def load_script(path: str | Path) -> WorkloadScript:
    return parse_script(Path(path).read_text(encoding="utf-8"))


class ScriptBuilder:
    """Build a script in code.

    >>> s = ScriptBuilder().alloc("a", 64).drop("a").collect().build()
    >>> print(s.to_text(), end="")
    alloc a 64
    drop a
    collect
    """

    def __init__(self) -> None:
        self._directives: list[Directive] = []

    def _add(self, op: str, *args: object) -> ScriptBuilder:
        self._directives.append(Directive(op, tuple(str(a) for a in args), len(self._directives) + 1))
        return self

    def alloc(self, name: str, size: int) -> ScriptBuilder:
        return self._add("alloc", name, size)

    def copy(self, src: str, dst: str) -> ScriptBuilder:
        return self._add("copy", src, dst)

    def drop(self, name: str) -> ScriptBuilder:
        return self._add("drop", name)

    def link(self, parent: str, child: str) -> ScriptBuilder:
        return self._add("link", parent, child)

    def unlink(self, parent: str, child: str) -> ScriptBuilder:
        return self._add("unlink", parent, child)

    def collect(self) -> ScriptBuilder:
        return self._add("collect")

    def assert_live(self, name: str) -> ScriptBuilder:
        return self._add("assert_live", name)

    def assert_reclaimed(self, name: str) -> ScriptBuilder:
        return self._add("assert_reclaimed", name)

    def build(self) -> WorkloadScript:
        validator = _Validator()
        for directive in self._directives:
            validator.check(directive)
        return WorkloadScript(list(self._directives))
