"""String-diagram expressions: syntax, typechecking and layer normal form.

Expressions are immutable trees.  ``a >> b`` builds sequential
composition (first ``a``, then ``b``) and ``a @ b`` parallel composition.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Mapping, Tuple

from .errors import TypeMismatch, UnboundName
from .objects import ObjectRef, tensor_all

Signature = Mapping[str, Tuple[ObjectRef, ObjectRef]]


class Expr:
    def __rshift__(self, other):
        return Seq((*_flat(self, Seq), *_flat(other, Seq)))

    def __matmul__(self, other):
        return Par((*_flat(self, Par), *_flat(other, Par)))


def _flat(e, cls):
    return e.children if isinstance(e, cls) else (e,)


@dataclass(frozen=True)
class Gen(Expr):
    name: str


@dataclass(frozen=True)
class State(Expr):
    """A generator with trivial domain (a distribution)."""

    name: str


@dataclass(frozen=True)
class Id(Expr):
    obj: ObjectRef


@dataclass(frozen=True)
class Copy(Expr):
    obj: ObjectRef


@dataclass(frozen=True)
class Delete(Expr):
    obj: ObjectRef


@dataclass(frozen=True)
class Swap(Expr):
    left: ObjectRef
    right: ObjectRef


@dataclass(frozen=True)
class Seq(Expr):
    children: Tuple[Expr, ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))


@dataclass(frozen=True)
class Par(Expr):
    children: Tuple[Expr, ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))


PRIMITIVES = (Gen, State, Id, Copy, Delete, Swap)


def seq(*children) -> Seq:
    return Seq(children)


def par(*children) -> Par:
    return Par(children)


def _kind_of(expr, signature):
    if isinstance(expr, (Id, Copy, Delete)):
        return expr.obj.kind
    if isinstance(expr, Swap):
        return expr.left.kind
    if isinstance(expr, (Gen, State)):
        if expr.name in signature:
            return signature[expr.name][0].kind
        return None
    for c in expr.children:
        k = _kind_of(c, signature)
        if k is not None:
            return k
    return None


def typecheck(expr: Expr, signature: Signature, _path=()) -> Tuple[ObjectRef, ObjectRef]:
    """Return the unique ``(dom, cod)`` of ``expr``.

    Raises :class:`UnboundName` for a generator missing from
    ``signature`` and :class:`TypeMismatch` (carrying the path of the
    offending sub-expression) for ill-typed compositions.
    """
    path = _path
    if isinstance(expr, Gen):
        if expr.name not in signature:
            raise UnboundName(expr.name, path)
        return signature[expr.name]
    if isinstance(expr, State):
        if expr.name not in signature:
            raise UnboundName(expr.name, path)
        dom, cod = signature[expr.name]
        if not dom.is_unit:
            raise TypeMismatch(f"state {expr.name!r} has non-trivial domain {dom}", path)
        return dom, cod
    if isinstance(expr, Id):
        return expr.obj, expr.obj
    if isinstance(expr, Copy):
        return expr.obj, expr.obj @ expr.obj
    if isinstance(expr, Delete):
        return expr.obj, ObjectRef.unit(expr.obj.kind)
    if isinstance(expr, Swap):
        if expr.left.kind != expr.right.kind:
            raise TypeMismatch("swap of objects from different backends", path)
        return expr.left @ expr.right, expr.right @ expr.left
    if isinstance(expr, (Seq, Par)):
        if not expr.children:
            raise TypeMismatch(f"empty {type(expr).__name__.lower()}", path)
        tag = type(expr).__name__.lower()
        types = [typecheck(c, signature, path + (f"{tag}[{i}]",))
                 for i, c in enumerate(expr.children)]
        kinds = {t[0].kind for t in types}
        if len(kinds) > 1:
            raise TypeMismatch(f"mixed backends {sorted(kinds)}", path)
        if isinstance(expr, Par):
            kind = kinds.pop()
            return tensor_all(kind, (t[0] for t in types)), tensor_all(kind, (t[1] for t in types))
        for i in range(len(types) - 1):
            if types[i][1] != types[i + 1][0]:
                raise TypeMismatch(
                    f"codomain {types[i][1]} does not match domain {types[i + 1][0]}",
                    path + (f"seq[{i + 1}]",))
        return types[0][0], types[-1][1]
    raise TypeError(f"not a kernel expression: {expr!r}")


# -- normal form -------------------------------------------------------------

@dataclass(frozen=True)
class Layer:
    """One horizontal slice: primitive cells side by side, spanning every wire."""

    cells: Tuple[Expr, ...]
    dom: ObjectRef
    cod: ObjectRef

    @property
    def is_identity(self) -> bool:
        return all(isinstance(c, Id) for c in self.cells)

    def to_expr(self) -> Expr:
        if not self.cells:
            return Id(self.dom)
        return self.cells[0] if len(self.cells) == 1 else Par(self.cells)


@dataclass(frozen=True)
class NormalForm:
    layers: Tuple[Layer, ...]
    dom: ObjectRef
    cod: ObjectRef

    def __len__(self):
        return len(self.layers)

    def to_expr(self) -> Expr:
        if len(self.layers) == 1:
            return self.layers[0].to_expr()
        return Seq(tuple(layer.to_expr() for layer in self.layers))


def _sweep(expr, signature):
    """Layer lists of ``(cell, dom, cod)`` triples, scheduled as early as possible."""
    if isinstance(expr, PRIMITIVES):
        dom, cod = typecheck(expr, signature)
        return [[(expr, dom, cod)]], dom, cod
    if isinstance(expr, Seq):
        layers = []
        dom = cod = None
        for i, c in enumerate(expr.children):
            ls, d, cod = _sweep(c, signature)
            if i == 0:
                dom = d
            layers.extend(ls)
        return layers, dom, cod
    parts = [_sweep(c, signature) for c in expr.children]
    depth = max(len(ls) for ls, _, _ in parts)
    layers = [[] for _ in range(depth)]
    for ls, d, c in parts:
        for k in range(depth):
            if k < len(ls):
                layers[k].extend(ls[k])
            else:
                layers[k].append((Id(c), c, c))
    kind = parts[0][1].kind
    return layers, tensor_all(kind, (p[1] for p in parts)), tensor_all(kind, (p[2] for p in parts))


def normalize(expr: Expr, signature: Signature) -> NormalForm:
    """Flatten ``expr`` into a list of layers.

    Parallel branches are aligned left to right, each cell placed in the
    earliest layer its inputs allow; shorter branches are padded with
    identities.  Identity cells on the unit are dropped, as are layers made
    only of identities (unless nothing else is left).
    """
    dom, cod = typecheck(expr, signature)
    raw, _, _ = _sweep(expr, signature)
    layers = []
    for cells in raw:
        cells = [(e, d, c) for e, d, c in cells if not (isinstance(e, Id) and d.is_unit)]
        kind = dom.kind
        layer = Layer(tuple(e for e, _, _ in cells),
                      tensor_all(kind, (d for _, d, _ in cells)),
                      tensor_all(kind, (c for _, _, c in cells)))
        if not layer.is_identity:
            layers.append(layer)
    if not layers:
        layers = [Layer((Id(dom),) if not dom.is_unit else (), dom, cod)]
    return NormalForm(tuple(layers), dom, cod)


def signature_from_bindings(bindings: Mapping, kind: str, sizes) -> Dict[str, Tuple[ObjectRef, ObjectRef]]:
    """Single-wire signature inferred from kernel shapes via ``sizes(kernel) -> (dom, cod)``."""
    sig = {}
    for name, k in bindings.items():
        d, c = sizes(k)
        sig[name] = (ObjectRef(kind, (d,)), ObjectRef(kind, (c,)))
    return sig
