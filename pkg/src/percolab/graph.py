"""The three graph families over the end-rooted k-regular tree.

Tree vertices are written in coordinates relative to the origin: walk
``up`` steps towards the fixed end, then descend along ``word``.  Every vertex
has k-1 children labelled ``0..k-2``; the ancestor chain is pinned by declaring
that the vertex ``up - 1`` steps above the origin is child ``k-2`` of the one
``up`` steps above.  A word hanging below an ancestor therefore never starts
with ``k-2`` (that would retrace towards the origin), which makes the
coordinates canonical.
"""
from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from . import hashing as hs


class MalformedInputError(ValueError):
    pass


class Family(str, enum.Enum):
    TREE = "tree"
    TXZ = "txz"
    LL = "ll"

    @classmethod
    def parse(cls, name):
        if isinstance(name, Family):
            return name
        aliases = {
            "tree": cls.TREE, "t": cls.TREE,
            "txz": cls.TXZ, "treetimeszd": cls.TXZ, "product": cls.TXZ,
            "ll": cls.LL, "lamplighter": cls.LL,
        }
        try:
            return aliases[str(name).lower()]
        except KeyError:
            raise MalformedInputError(f"unknown graph family {name!r}") from None


class EdgeKind(enum.IntEnum):
    TREE = hs.KIND_TREE
    LATTICE = hs.KIND_LATTICE
    FLIP = hs.KIND_FLIP


@dataclass(frozen=True)
class GraphSpec:
    family: Family
    k: int
    d: int = 0

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        if self.k < 3:
            raise MalformedInputError(f"tree degree must be >= 3, got {self.k}")
        if self.family is Family.TXZ:
            if not 1 <= self.d <= 2:
                raise MalformedInputError(f"lattice dimension must be 1 or 2, got {self.d}")
        elif self.d != 0:
            raise MalformedInputError(f"d is only meaningful for txz, got d={self.d}")

    @property
    def degree(self):
        if self.family is Family.TXZ:
            return self.k + 2 * self.d
        if self.family is Family.LL:
            return self.k + 1
        return self.k

    def to_json(self):
        return json.dumps({"family": self.family.value, "k": self.k, "d": self.d})

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text) if isinstance(text, str) else dict(text)
        return cls(obj["family"], int(obj["k"]), int(obj.get("d", 0)))


@dataclass(frozen=True, order=True)
class TreeVertex:
    up: int = 0
    word: tuple = ()

    @property
    def height(self):
        return self.up - len(self.word)

    def validate(self, k):
        if self.up < 0:
            raise MalformedInputError(f"negative up_steps in {self}")
        for i, digit in enumerate(self.word):
            top = k - 3 if (i == 0 and self.up >= 1) else k - 2
            if not 0 <= digit <= top:
                raise MalformedInputError(f"invalid digit {digit} at position {i} of {self} for k={k}")

    def parent(self):
        if self.word:
            return TreeVertex(self.up, self.word[:-1])
        return TreeVertex(self.up + 1, ())

    def child(self, digit, k):
        if self.up >= 1 and not self.word:
            if digit == k - 2:
                return TreeVertex(self.up - 1, ())
            return TreeVertex(self.up, (digit,))
        return TreeVertex(self.up, self.word + (digit,))

    def to_bytes(self):
        return struct.pack(">qI", self.up, len(self.word)) + bytes(self.word)


ORIGIN = TreeVertex()


@lru_cache(maxsize=1 << 16)
def tree_fp(t):
    fa, fb = hs.ancestor_fp(t.up)
    for digit in t.word:
        fa, fb = hs.fold_fp(fa, fb, digit)
    return fa, fb


@dataclass(frozen=True, order=True)
class SiteId:
    tree: TreeVertex = ORIGIN
    fiber: tuple = ()

    def to_bytes(self):
        out = [self.tree.to_bytes(), struct.pack(">I", len(self.fiber))]
        for item in self.fiber:
            out.append(item.to_bytes() if isinstance(item, TreeVertex) else struct.pack(">q", item))
        return b"".join(out)


def origin(g):
    if g.family is Family.TXZ:
        return SiteId(ORIGIN, (0,) * g.d)
    return SiteId(ORIGIN, ())


def fiber_key(g, fiber):
    if g.family is Family.TREE:
        return 0, 0
    if g.family is Family.TXZ:
        x = fiber[0]
        y = fiber[1] if g.d > 1 else 0
        return hs.lattice_key(x, y)
    za = zb = 0
    for lamp in fiber:
        a, b = hs.zobrist(*tree_fp(lamp))
        za ^= a
        zb ^= b
    return za, zb


def site_fp(g, v):
    return hs.site_fp(*tree_fp(v.tree), *fiber_key(g, v.fiber))


def _flip(lamps, t):
    s = set(lamps)
    s.symmetric_difference_update({t})
    return tuple(sorted(s))


def neighbors(g, v):
    """Graph neighbours of ``v`` as ``(SiteId, EdgeKind)`` pairs.

    Order is fixed: tree parent, children ``0..k-2``, then lattice moves
    ``+e_i, -e_i`` per axis (T x Z^d) or the lamp flip (lamplighter).  The
    compiled explorer enumerates in the same order.
    """
    t = v.tree
    t.validate(g.k)
    out = [(SiteId(t.parent(), v.fiber), EdgeKind.TREE)]
    out.extend((SiteId(t.child(dgt, g.k), v.fiber), EdgeKind.TREE) for dgt in range(g.k - 1))
    if g.family is Family.TXZ:
        if len(v.fiber) != g.d:
            raise MalformedInputError(f"fiber {v.fiber} is not a point of Z^{g.d}")
        for axis in range(g.d):
            for step in (1, -1):
                x = list(v.fiber)
                x[axis] += step
                out.append((SiteId(t, tuple(x)), EdgeKind.LATTICE))
    elif g.family is Family.LL:
        out.append((SiteId(t, _flip(v.fiber, t)), EdgeKind.FLIP))
    return out


def height_between(u, v):
    return v.tree.height - u.tree.height


def modular(g, u, v):
    """Modular function (k-1)^h(u,v), as an exact rational."""
    return Fraction(g.k - 1) ** height_between(u, v)


def descendant_fiber_representative(g, base, n, index):
    """The site over the ``index``-th generation-``n`` descendant of ``base``'s tree vertex.

    ``index`` is read as ``n`` base-(k-1) digits, most significant first.  The
    fiber coordinate is copied from ``base``.
    """
    m = g.k - 1
    if n < 0 or not 0 <= index < m ** n:
        raise MalformedInputError(f"descendant index {index} out of range for n={n}, k={g.k}")
    digits = []
    for _ in range(n):
        index, r = divmod(index, m)
        digits.append(r)
    t = base.tree
    for dgt in reversed(digits):
        t = t.child(dgt, g.k)
    return SiteId(t, base.fiber)


def same_height_target(m):
    """Tree vertex at distance ``m`` (even) from the origin at the same height: up m/2, down m/2."""
    if m < 0 or m % 2:
        raise MalformedInputError(f"same-height distance must be even and >= 0, got {m}")
    return TreeVertex(m // 2, (0,) * (m // 2))


@dataclass(frozen=True)
class SlabWindow:
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > 0 or self.hi < self.lo:
            raise MalformedInputError(f"invalid slab window [{self.lo}, {self.hi}]")

    def __contains__(self, h):
        return self.lo <= h <= self.hi


@dataclass(frozen=True)
class EdgeKey:
    """Canonical identifier of an undirected edge.

    ``a`` and ``b`` are the endpoints ordered by their byte serialisation, so
    ``EdgeKey.of(g, u, v, kind) == EdgeKey.of(g, v, u, kind)``.
    """
    kind: EdgeKind
    a: SiteId
    b: SiteId
    spec: GraphSpec = field(compare=False, default=None, repr=False)

    @classmethod
    def of(cls, g, u, v, kind):
        kind = EdgeKind(kind)
        a, b = sorted((u, v), key=SiteId.to_bytes)
        return cls(kind, a, b, g)

    def to_bytes(self):
        return bytes([int(self.kind)]) + self.a.to_bytes() + self.b.to_bytes()

    def fingerprint(self):
        g = self.spec
        a, b = self.a, self.b
        if self.kind is EdgeKind.TREE:
            low = a if a.tree.height < b.tree.height else b
            return hs.edge_fp(hs.KIND_TREE, *site_fp(g, low))
        if self.kind is EdgeKind.LATTICE:
            axis = next(i for i in range(len(a.fiber)) if a.fiber[i] != b.fiber[i])
            low = a if a.fiber[axis] < b.fiber[axis] else b
            return hs.edge_fp(hs.KIND_LATTICE + axis, *site_fp(g, low))
        key = min(fiber_key(g, a.fiber), fiber_key(g, b.fiber))
        return hs.edge_fp(hs.KIND_FLIP, *hs.site_fp(*tree_fp(a.tree), *key))

