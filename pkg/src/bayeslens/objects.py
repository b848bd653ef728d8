"""Objects of the two concrete Markov categories.

An :class:`ObjectRef` is a list of atomic wires.  A finite set of
cardinality ``n`` is one wire of size ``n``; a Euclidean space of
dimension ``n`` is one wire of size ``n``.  Tensoring concatenates wire
lists, so the diagram layer can always recover the wire profile of a
composite object.  Unit wires (cardinality 1, dimension 0) are dropped at
construction, which makes the monoidal unit the empty wire list.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple

FINSTOCH = "finstoch"
GAUSS = "gauss"
KINDS = (FINSTOCH, GAUSS)


def _unit_size(kind):
    return 1 if kind == FINSTOCH else 0


@dataclass(frozen=True)
class ObjectRef:
    kind: str
    wires: Tuple[int, ...] = ()
    labels: Optional[Tuple[Optional[Tuple[str, ...]], ...]] = field(
        default=None, compare=False, repr=False)
    name: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown backend kind {self.kind!r}")
        wires = tuple(int(w) for w in self.wires)
        labels = self.labels
        if labels is not None and len(labels) != len(wires):
            raise ValueError("one label tuple (or None) is required per wire")
        if self.kind == FINSTOCH and any(w < 1 for w in wires):
            raise ValueError("finstoch cardinality must be >= 1")
        if self.kind == GAUSS and any(w < 0 for w in wires):
            raise ValueError("gauss dimension must be >= 0")
        unit = _unit_size(self.kind)
        keep = [i for i, w in enumerate(wires) if w != unit]
        if labels is not None:
            labels = tuple(labels[i] for i in keep)
            for w, lab in zip((wires[i] for i in keep), labels):
                if lab is not None and len(lab) != w:
                    raise ValueError("label count must match cardinality")
        object.__setattr__(self, "wires", tuple(wires[i] for i in keep))
        object.__setattr__(self, "labels", labels)

    @classmethod
    def finite(cls, card, labels=None, name=None):
        labs = None if labels is None else (tuple(str(x) for x in labels),)
        return cls(FINSTOCH, (card,), labs, name)

    @classmethod
    def euclidean(cls, dim, name=None):
        return cls(GAUSS, (dim,), None, name)

    @classmethod
    def unit(cls, kind):
        return cls(kind, ())

    @property
    def size(self) -> int:
        """Cardinality (finstoch) or dimension (gauss) of the whole object."""
        if self.kind == FINSTOCH:
            return math.prod(self.wires)
        return sum(self.wires)

    @property
    def is_unit(self) -> bool:
        return not self.wires

    def __len__(self):
        return len(self.wires)

    def tensor(self, other: "ObjectRef") -> "ObjectRef":
        if other.kind != self.kind:
            raise ValueError("cannot tensor objects of different backends")
        if self.labels is None and other.labels is None:
            labels = None
        else:
            labels = (self.labels or (None,) * len(self)) + \
                (other.labels or (None,) * len(other))
        if self.is_unit or other.is_unit:
            name = other.name if self.is_unit else self.name
        elif self.name or other.name:
            name = f"{self}⊗{other}"
        else:
            name = None
        return ObjectRef(self.kind, self.wires + other.wires, labels, name)

    def __matmul__(self, other):
        return self.tensor(other)

    def split(self, k: int) -> Tuple["ObjectRef", "ObjectRef"]:
        """Split into the first ``k`` wires and the rest."""
        labs = self.labels
        left = ObjectRef(self.kind, self.wires[:k], None if labs is None else labs[:k])
        right = ObjectRef(self.kind, self.wires[k:], None if labs is None else labs[k:])
        return left, right

    def element_labels(self) -> list:
        """Human-readable label for every element of a finite object.

        Composite objects join per-wire labels with commas, row-major.
        """
        if self.kind != FINSTOCH:
            raise TypeError("only finite objects have elements")
        per_wire = []
        for i, w in enumerate(self.wires):
            lab = None if self.labels is None else self.labels[i]
            per_wire.append(list(lab) if lab is not None else [str(j) for j in range(w)])
        out = [""]
        for labs in per_wire:
            out = [f"{a},{b}" if a else b for a in out for b in labs]
        return out if per_wire else ["*"]

    def __str__(self):
        if self.name:
            return self.name
        if self.is_unit:
            return "I"
        return "⊗".join(str(w) for w in self.wires)


def tensor_all(kind: str, objs: Iterable[ObjectRef]) -> ObjectRef:
    out = ObjectRef.unit(kind)
    for o in objs:
        out = out.tensor(o)
    return out


def flat_index(indices: Sequence[int], wires: Sequence[int]) -> int:
    """Row-major index of a tuple of per-wire indices."""
    if len(indices) != len(wires):
        raise ValueError(f"expected {len(wires)} indices, got {len(indices)}")
    idx = 0
    for i, w in zip(indices, wires):
        if not 0 <= i < w:
            raise ValueError(f"index {i} out of range for wire of size {w}")
        idx = idx * w + i
    return idx
