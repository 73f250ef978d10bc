"""Trace and finalize protocols.

A type may live on the managed heap only if the collector can enumerate
the handles inside its values.  Three kinds of types qualify:

* scalars (numbers, text, bytes, ``None``, enums), which contain nothing;
* the builtin containers ``list``, ``tuple``, ``set``, ``frozenset`` and
  ``dict``, traced element by element at run time;
* classes with a ``__trace__(self, visit)`` method.

``@traceable`` writes ``__trace__`` for an annotated class (usually a
dataclass) from its field annotations, and adds a no-op ``__finalize__``
unless the class already defines one.  Hand-written hooks are fine too.

A finalizer is called by the sweeper with the payload, exactly once, just
before the record is released.  It must not allocate, copy handles out, or
dereference other handles.
"""

from __future__ import annotations

import enum
import sys
import types
import typing
from collections.abc import Callable, Mapping, MutableSequence, Sequence
from collections.abc import Set as AbstractSet
from typing import Any, ClassVar, Optional, TypeVar, Union

from gcheap.errors import DerivationError, UntraceableTypeError
from gcheap.handle import ManagedRef

Visit = Callable[[ManagedRef], None]
FieldTracer = Callable[[Any, Visit], None]

C = TypeVar("C", bound=type)

SCALAR_TYPES: frozenset[type] = frozenset(
    {int, float, complex, bool, str, bytes, bytearray, type(None), range}
)
_SEQUENCE_TYPES = (list, tuple, set, frozenset)

# Marker for ``Annotated[X, NO_TRACE]``: the field is skipped by derivation.
NO_TRACE = object()


def is_scalar_type(tp: Any) -> bool:
    return tp in SCALAR_TYPES or (isinstance(tp, type) and issubclass(tp, enum.Enum))


def is_traceable_type(tp: type) -> bool:
    if is_scalar_type(tp) or tp is ManagedRef:
        return True
    if issubclass(tp, (*_SEQUENCE_TYPES, dict)):
        return True
    return callable(getattr(tp, "__trace__", None))


def trace(value: Any, visit: Visit) -> None:
    """Call ``visit`` once for every handle inside ``value``.

    Managed payloads reached through a handle are not entered; the visit
    stops at the handle.
    """
    tp = type(value)
    if tp is ManagedRef:
        visit(value)
    elif tp in SCALAR_TYPES:
        return
    elif tp is list or tp is tuple:
        for item in value:
            trace(item, visit)
    elif tp is dict:
        for key, item in value.items():
            trace(key, visit)
            trace(item, visit)
    else:
        hook = getattr(tp, "__trace__", None)
        if hook is not None:
            hook(value, visit)
        elif isinstance(value, enum.Enum):
            return
        elif isinstance(value, (list, tuple, set, frozenset)):
            for item in value:
                trace(item, visit)
        elif isinstance(value, dict):
            for key, item in value.items():
                trace(key, visit)
                trace(item, visit)
        else:
            raise UntraceableTypeError(
                f"{tp.__qualname__} has no __trace__ hook; decorate it with "
                "@traceable or define __trace__(self, visit)"
            )


def trace_handles(value: Any) -> list[ManagedRef]:
    """Return the handles inside ``value`` in visit order."""
    found: list[ManagedRef] = []
    trace(value, found.append)
    return found


def default_finalize(payload: Any) -> None:
    """The finalizer generated by ``@traceable``: does nothing."""


def finalizer_for(tp: type) -> Callable[[Any], None] | None:
    return getattr(tp, "__finalize__", None)


# -- derivation ---------------------------------------------------------------


def _visit_handle(value: Any, visit: Visit) -> None:
    if value is not None:
        visit(value)


def _trace_nested(value: Any, visit: Visit) -> None:
    if value is not None:
        trace(value, visit)


def _each(inner: FieldTracer) -> FieldTracer:
    def trace_each(value: Any, visit: Visit) -> None:
        if value is not None:
            for item in value:
                inner(item, visit)

    return trace_each


def _positional(inners: list[FieldTracer | None]) -> FieldTracer:
    def trace_positional(value: Any, visit: Visit) -> None:
        if value is not None:
            for inner, item in zip(inners, value):
                if inner is not None:
                    inner(item, visit)

    return trace_positional


def _mapping(key: FieldTracer | None, val: FieldTracer | None) -> FieldTracer:
    def trace_mapping(value: Any, visit: Visit) -> None:
        if value is None:
            return
        for k, v in value.items():
            if key is not None:
                key(k, visit)
            if val is not None:
                val(v, visit)

    return trace_mapping


def _optional(inner: FieldTracer) -> FieldTracer:
    def trace_optional(value: Any, visit: Visit) -> None:
        if value is not None:
            inner(value, visit)

    return trace_optional


def field_tracer(annotation: Any, owner: str, field: str) -> FieldTracer | None:
    """Build the tracer for one annotated field.

    Returns ``None`` when values of the annotated type can never contain a
    handle.  Raises :class:`DerivationError` for kinds that cannot be traced.
    """
    if annotation is Any:
        raise DerivationError(owner, field, "Any is not a traceable kind")
    if isinstance(annotation, (str, typing.ForwardRef)):
        raise DerivationError(owner, field, f"unresolved forward reference {annotation!r}")

    origin = typing.get_origin(annotation)
    args = typing.get_args(annotation)

    if origin is typing.Annotated:
        if any(meta is NO_TRACE for meta in annotation.__metadata__):
            return None
        return field_tracer(args[0], owner, field)

    if annotation is ManagedRef or origin is ManagedRef:
        return _visit_handle
    if is_scalar_type(annotation):
        return None

    if origin is Union or origin is types.UnionType:
        members = [a for a in args if a is not type(None)]
        if len(members) == len(args):
            if all(is_scalar_type(m) for m in members):
                return None
            raise DerivationError(
                owner, field, "only Optional[...] unions of a traceable kind are supported"
            )
        if len(members) != 1:
            inners = [field_tracer(m, owner, field) for m in members]
            if any(i is not None for i in inners):
                raise DerivationError(
                    owner, field, "only Optional[...] unions of a traceable kind are supported"
                )
            return None
        inner = field_tracer(members[0], owner, field)
        return None if inner is None else _optional(inner)

    if origin is tuple:
        if len(args) == 2 and args[1] is Ellipsis:
            inner = field_tracer(args[0], owner, field)
            return None if inner is None else _each(inner)
        if not args or args == ((),):
            raise DerivationError(owner, field, "tuple needs element types")
        inners = [field_tracer(a, owner, field) for a in args]
        return None if all(i is None for i in inners) else _positional(inners)

    if origin in (list, set, frozenset, Sequence, MutableSequence, AbstractSet):
        if not args:
            raise DerivationError(owner, field, "sequence needs an element type")
        inner = field_tracer(args[0], owner, field)
        return None if inner is None else _each(inner)

    if origin in (dict, Mapping, typing.MutableMapping):
        if len(args) != 2:
            raise DerivationError(owner, field, "mapping needs key and value types")
        key = field_tracer(args[0], owner, field)
        val = field_tracer(args[1], owner, field)
        return None if key is None and val is None else _mapping(key, val)

    if annotation in (list, tuple, set, frozenset, dict):
        raise DerivationError(
            owner, field, f"bare {annotation.__name__} needs element types, e.g. list[ManagedRef]"
        )

    if isinstance(annotation, type) and callable(getattr(annotation, "__trace__", None)):
        return _trace_nested

    name = getattr(annotation, "__qualname__", None) or repr(annotation)
    raise DerivationError(owner, field, f"{name} is not a traceable kind")


def _field_annotations(cls: type) -> dict[str, Any]:
    module = sys.modules.get(cls.__module__)
    globalns = dict(vars(module)) if module is not None else {}
    hints = typing.get_type_hints(
        cls, globalns=globalns, localns={cls.__name__: cls}, include_extras=True
    )
    return {
        name: hint
        for name, hint in hints.items()
        if typing.get_origin(hint) is not ClassVar and hint is not ClassVar
    }


def derive_trace(cls: type) -> list[tuple[str, FieldTracer]]:
    """Derive per-field tracers for ``cls`` in declaration order.

    Fields whose kind cannot hold a handle are omitted from the result.
    """
    owner = cls.__qualname__
    try:
        annotations = _field_annotations(cls)
    except NameError as exc:
        raise DerivationError(owner, "<annotations>", f"unresolved name ({exc})") from exc
    tracers = []
    for name, annotation in annotations.items():
        tracer = field_tracer(annotation, owner, name)
        if tracer is not None:
            tracers.append((name, tracer))
    return tracers


def _install_trace(cls: type) -> None:
    resolved: list[tuple[str, FieldTracer]] | None = None

    def __trace__(self: Any, visit: Visit) -> None:
        nonlocal resolved
        if resolved is None:
            resolved = derive_trace(cls)
        for name, tracer in resolved:
            tracer(getattr(self, name), visit)

    try:
        resolved = derive_trace(cls)
    except DerivationError as exc:
        # a name defined later in the module; resolve on first use
        if exc.field != "<annotations>":
            raise
    __trace__.__qualname__ = f"{cls.__qualname__}.__trace__"
    cls.__trace__ = __trace__


@typing.overload
def traceable(cls: C) -> C: ...
@typing.overload
def traceable(
    *, finalize: Optional[Callable[[Any], None]] = None
) -> Callable[[C], C]: ...


def traceable(cls=None, *, finalize=None):
    """Class decorator deriving ``__trace__`` and a default ``__finalize__``.

    ``finalize`` overrides the finalizer; a ``__finalize__`` method already
    defined on the class is kept.
    """

    def wrap(cls: C) -> C:
        if "__trace__" not in cls.__dict__:
            _install_trace(cls)
        if finalize is not None:
            cls.__finalize__ = finalize
        elif getattr(cls, "__finalize__", None) is None:
            cls.__finalize__ = default_finalize
        return cls

    if cls is None:
        return wrap
    return wrap(cls)
