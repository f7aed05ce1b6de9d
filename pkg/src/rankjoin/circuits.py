"""Boolean circuits over replicated shares, evaluated on whole 64-bit words.

Every gate acts bitwise on uint64 arrays, so a vector of ``n`` values costs
the same number of rounds as a single value.  XOR, NOT, shifts and AND with
a public constant are local.  An AND of two shared words costs one round in
which each party sends one word per element to its predecessor.

Word-level AND counts and depths (one round per AND layer):

    ===========  =========  =====
    gate         word ANDs  depth
    ===========  =========  =====
    AND          1          1
    MUX          1          1
    EQ           6          6
    ADD, SUB     12         7
    LT           12         7
    MAX, MIN     13         8
    MUL          138        18
    ===========  =========  =====

Adders use a Kogge-Stone carry network; MUL sums 64 partial products with a
carry-save tree of full adders and finishes with one ADD.
"""

from __future__ import annotations

import enum
import functools

import numpy as np

ALL_ONES = np.uint64(0xFFFFFFFFFFFFFFFF)
ONE = np.uint64(1)
_U = np.uint64


class SharedVector:
    """One party's view ``(first, second)`` of a replicated array of words."""

    __slots__ = ("first", "second")

    def __init__(self, first, second):
        self.first = first if type(first) is np.ndarray and first.dtype == np.uint64 else np.asarray(first, np.uint64)
        self.second = second if type(second) is np.ndarray and second.dtype == np.uint64 else np.asarray(second, np.uint64)

    @property
    def shape(self):
        return self.first.shape

    @property
    def n(self) -> int:
        return self.first.shape[-1]

    def __len__(self):
        return self.first.shape[0]

    def __xor__(self, other: "SharedVector") -> "SharedVector":
        return SharedVector(self.first ^ other.first, self.second ^ other.second)

    def __getitem__(self, idx) -> "SharedVector":
        return SharedVector(self.first[idx], self.second[idx])

    def take(self, idx, axis=-1) -> "SharedVector":
        return SharedVector(np.take(self.first, idx, axis=axis), np.take(self.second, idx, axis=axis))

    def map(self, f) -> "SharedVector":
        """Apply the same XOR-linear map to both words."""
        return SharedVector(f(self.first), f(self.second))

    def copy(self) -> "SharedVector":
        return SharedVector(self.first.copy(), self.second.copy())

    def reshape(self, *shape) -> "SharedVector":
        return SharedVector(self.first.reshape(*shape), self.second.reshape(*shape))

    def __repr__(self):
        return f"SharedVector(shape={self.shape})"


def stack(vs, axis=0) -> SharedVector:
    return SharedVector(np.stack([v.first for v in vs], axis=axis), np.stack([v.second for v in vs], axis=axis))


def concat(vs, axis=-1) -> SharedVector:
    return SharedVector(
        np.concatenate([v.first for v in vs], axis=axis),
        np.concatenate([v.second for v in vs], axis=axis),
    )


def as_rows(x: SharedVector) -> SharedVector:
    return x if x.first.ndim > 1 else x.reshape(1, -1)


# ---------------------------------------------------------------- sharing --

def public(ctx, values) -> SharedVector:
    """Sharing of a public array with words ``(c, 0, 0)``; no communication."""
    c = np.asarray(values, dtype=np.uint64)
    z = np.zeros_like(c)
    if ctx.party == 0:
        return SharedVector(c, z)
    if ctx.party == 1:
        return SharedVector(z, z.copy())
    return SharedVector(z, c)


def zeros(ctx, shape) -> SharedVector:
    z = np.zeros(shape, dtype=np.uint64)
    return SharedVector(z, z.copy())


def xor_public(ctx, x: SharedVector, c) -> SharedVector:
    c = np.asarray(c, dtype=np.uint64)
    if ctx.party == 0:
        return SharedVector(x.first ^ c, np.broadcast_to(x.second, np.broadcast_shapes(x.shape, c.shape)).copy())
    if ctx.party == 2:
        return SharedVector(np.broadcast_to(x.first, np.broadcast_shapes(x.shape, c.shape)).copy(), x.second ^ c)
    shape = np.broadcast_shapes(x.shape, c.shape)
    return SharedVector(np.broadcast_to(x.first, shape).copy(), np.broadcast_to(x.second, shape).copy())


def invert(ctx, x: SharedVector) -> SharedVector:
    return xor_public(ctx, x, ALL_ONES)


def not_bit(ctx, b: SharedVector) -> SharedVector:
    return xor_public(ctx, b, ONE)


def and_public(x: SharedVector, c) -> SharedVector:
    c = np.asarray(c, dtype=np.uint64)
    return SharedVector(x.first & c, x.second & c)


def shl(x: SharedVector, k: int) -> SharedVector:
    return SharedVector(x.first << _U(k), x.second << _U(k))


def shr(x: SharedVector, k: int) -> SharedVector:
    return SharedVector(x.first >> _U(k), x.second >> _U(k))


def rotl(x: SharedVector, k: int) -> SharedVector:
    return x.map(lambda w: (w << _U(k)) | (w >> _U(64 - k)))


def bit_mask(b: SharedVector) -> SharedVector:
    """All-ones where the low bit is set: ``0 - (w & 1)`` is XOR-linear in ``w``."""
    return b.map(lambda w: _U(0) - (w & ONE))


def input_share(ctx, owner: int, values=None, shape=None) -> SharedVector:
    """The owner (0-based) shares a private array in one round.

    The two words adjacent to the owner come from its pairwise seeds; the
    third goes to both other parties.
    """
    if ctx.party == owner:
        v = np.asarray(values, dtype=np.uint64)
        shape = v.shape
    shape = tuple(shape)
    me, nxt, prv = ctx.party, (owner + 1) % 3, (owner - 1) % 3
    if me == owner:
        v_own = ctx.prg.prev.words(shape)
        v_next = ctx.prg.next.words(shape)
        v_last = v ^ v_own ^ v_next
        ctx.exchange({nxt: v_last, prv: v_last})
        return SharedVector(v_own, v_next)
    if me == nxt:
        first = ctx.prg.prev.words(shape)
        got = ctx.exchange({}, expect=[owner])[owner].reshape(shape)
        return SharedVector(first, got)
    second = ctx.prg.next.words(shape)
    got = ctx.exchange({}, expect=[owner])[owner].reshape(shape)
    return SharedVector(got, second)


def random_shared(ctx, shape) -> SharedVector:
    """Fresh sharing of a uniformly random value, free of communication."""
    first, second = ctx.prg.random_share(shape)
    return SharedVector(first, second)


def reveal(ctx, x: SharedVector) -> np.ndarray:
    """Open to all parties: each sends its second word to its predecessor."""
    got = ctx.exchange({ctx.prev: x.second}, expect=[ctx.next])[ctx.next]
    return x.first ^ x.second ^ got.reshape(x.shape)


def reveal_to(ctx, x: SharedVector, party: int):
    """Open to a single party; returns None elsewhere."""
    if ctx.party == (party + 1) % 3:
        ctx.exchange({party: x.second})
        return None
    if ctx.party == party:
        got = ctx.exchange({}, expect=[(party + 1) % 3])[(party + 1) % 3]
        return x.first ^ x.second ^ got.reshape(x.shape)
    return None


# ------------------------------------------------------------------ gates --

def and_many(ctx, pairs) -> list[SharedVector]:
    """Multiply several pairs in a single round."""
    zs = []
    for x, y in pairs:
        zs.append((x.first & y.first) ^ (x.first & y.second) ^ (x.second & y.first))
    flat = np.concatenate([z.ravel() for z in zs]) if zs else np.zeros(0, np.uint64)
    flat ^= ctx.prg.zero_share(flat.size)
    got = ctx.exchange({ctx.prev: flat}, expect=[ctx.next])[ctx.next]
    out, at = [], 0
    for z in zs:
        k = z.size
        out.append(SharedVector(flat[at:at + k].reshape(z.shape), got[at:at + k].reshape(z.shape)))
        at += k
    return out


def and_(ctx, x: SharedVector, y: SharedVector) -> SharedVector:
    return and_many(ctx, [(x, y)])[0]


def or_bits(ctx, a: SharedVector, b: SharedVector) -> SharedVector:
    return a ^ b ^ and_(ctx, a, b)


def mux(ctx, c: SharedVector, x: SharedVector, y: SharedVector) -> SharedVector:
    """``x`` where bit ``c`` is set, else ``y``."""
    return y ^ and_(ctx, bit_mask(c), x ^ y)


def _carry_chain(ctx, g: SharedVector, p: SharedVector) -> SharedVector:
    # Generate and propagate of one group are never both set, so OR is XOR.
    for k in (1, 2, 4, 8, 16):
        a, b = and_many(ctx, [(p, shl(g, k)), (p, shl(p, k))])
        g, p = g ^ a, b
    return g ^ and_(ctx, p, shl(g, 32))


def add(ctx, x: SharedVector, y: SharedVector) -> SharedVector:
    p = x ^ y
    g = _carry_chain(ctx, and_(ctx, x, y), p)
    return p ^ shl(g, 1)


def sub(ctx, x: SharedVector, y: SharedVector) -> SharedVector:
    yb = invert(ctx, y)
    p = x ^ yb
    g = _carry_chain(ctx, and_(ctx, x, yb) ^ and_public(p, ONE), p)
    return xor_public(ctx, p ^ shl(g, 1), ONE)


def lt(ctx, x: SharedVector, y: SharedVector) -> SharedVector:
    """Unsigned ``x < y`` as a 0/1 word: no carry out of ``x + ~y + 1``."""
    yb = invert(ctx, y)
    p = x ^ yb
    g = _carry_chain(ctx, and_(ctx, x, yb) ^ and_public(p, ONE), p)
    return not_bit(ctx, shr(g, 63))


def eq(ctx, x: SharedVector, y: SharedVector) -> SharedVector:
    e = invert(ctx, x ^ y)
    for k in (32, 16, 8, 4, 2, 1):
        e = and_(ctx, e, shr(e, k))
    return and_public(e, ONE)


def rows_equal(ctx, a: SharedVector, b: SharedVector) -> SharedVector:
    """Equality of whole columns: ``a`` and ``b`` have shape ``(w, n)``."""
    e = invert(ctx, a ^ b)
    while e.shape[0] > 1:
        half = e.shape[0] // 2
        prod = and_(ctx, e[:half], e[half:2 * half])
        e = concat([prod, e[2 * half:]], axis=0) if e.shape[0] % 2 else prod
    e = e[0]
    for k in (32, 16, 8, 4, 2, 1):
        e = and_(ctx, e, shr(e, k))
    return and_public(e, ONE)


def maximum(ctx, x, y):
    return mux(ctx, lt(ctx, x, y), y, x)


def minimum(ctx, x, y):
    return mux(ctx, lt(ctx, x, y), x, y)


def mul(ctx, x: SharedVector, y: SharedVector) -> SharedVector:
    """Product modulo 2**64."""
    shape = np.broadcast_shapes(x.shape, y.shape)
    xs = stack([shl(x, j).map(lambda w: np.broadcast_to(w, shape)) for j in range(64)])
    masks = stack([bit_mask(shr(y, j)).map(lambda w: np.broadcast_to(w, shape)) for j in range(64)])
    partial = and_(ctx, xs, masks)
    terms = [partial[j] for j in range(64)]
    while len(terms) > 2:
        groups = len(terms) // 3
        a = stack(terms[0:3 * groups:3])
        b = stack(terms[1:3 * groups:3])
        c = stack(terms[2:3 * groups:3])
        rest = terms[3 * groups:]
        # majority(a, b, c) = ((a ^ c) & (b ^ c)) ^ c
        carry = and_(ctx, a ^ c, b ^ c) ^ c
        s = a ^ b ^ c
        carry = shl(carry, 1)
        terms = [s[i] for i in range(groups)] + [carry[i] for i in range(groups)] + rest
    return add(ctx, terms[0], terms[1])


class GateKind(enum.Enum):
    AND = "and"
    XOR = "xor"
    NOT = "not"
    ADD = "add"
    SUB = "sub"
    LT = "lt"
    EQ = "eq"
    MUX = "mux"
    MUL = "mul"
    MAX = "max"
    MIN = "min"


def eval_gate_batch(ctx, kind: GateKind, x, y=None, c=None) -> SharedVector:
    kind = GateKind(kind)
    if kind is GateKind.XOR:
        return x ^ y
    if kind is GateKind.NOT:
        return invert(ctx, x)
    if kind is GateKind.MUX:
        return mux(ctx, c, x, y)
    return {
        GateKind.AND: and_,
        GateKind.ADD: add,
        GateKind.SUB: sub,
        GateKind.LT: lt,
        GateKind.EQ: eq,
        GateKind.MUL: mul,
        GateKind.MAX: maximum,
        GateKind.MIN: minimum,
    }[kind](ctx, x, y)


# -------------------------------------------------------- prefix networks --

def _merge(a: list, b: list) -> list:
    """Run two schedules over disjoint positions side by side."""
    out = []
    for i in range(max(len(a), len(b))):
        out.append([x for sched in (a, b) if i < len(sched) for x in sched[i]])
    return out


def _depth_optimal(idx: np.ndarray) -> list:
    # Position idx[k] ends up holding the combine of idx[0..k].
    n = idx.size
    if n < 2:
        return []
    h = 1 << ((n - 1).bit_length() - 1)  # largest power of two below n
    left, fixup = _pairwise(idx[:h])
    levels = _merge(left, _depth_optimal(idx[h:]))
    # idx[h-1] is final before the left half's fix-ups, so both share a level.
    levels.append(fixup + [(np.full(n - h, idx[h - 1]), idx[h:])])
    return levels


def _pairwise(idx: np.ndarray) -> tuple:
    # Fold pairs, solve the odd positions, then leave the even positions'
    # fix-up level to the caller.  ``idx.size`` is a power of two.
    if idx.size < 2:
        return [], []
    odd = idx[1::2]
    levels = [[(idx[0::2], odd)]] + _depth_optimal(odd)
    return levels, [(idx[1:-1:2], idx[2::2])]


def _work_efficient(n: int) -> list:
    levels = []
    d, top = 1, 0
    while d < n:
        r = np.arange(2 * d - 1, n, 2 * d)
        if r.size == 0:
            break
        levels.append((r - d, r))
        top, d = d, d * 2
    d = top
    while d >= 1:
        r = np.arange(3 * d - 1, n, 2 * d)
        if r.size:
            levels.append((r - d, r))
        d //= 2
    return levels


@functools.lru_cache(maxsize=None)
def scan_levels(n: int, layout: str = "brent-kung") -> tuple:
    """Prefix network as ``(left, right)`` index arrays per level.

    Within a level every ``right[i]`` absorbs ``left[i]``, reading values
    from before the level; levels run one after another.

    ``brent-kung`` makes at most ``2n - 2 - floor(log2 n)`` combines in at most
    ``2 * ceil(log2 n) - 1`` levels.  ``ladner-fischer`` needs exactly
    ``ceil(log2 n)`` levels but up to ``4n`` combines, and its combine count
    is not proportional to ``n``.
    """
    if layout == "brent-kung":
        return tuple(_work_efficient(n))
    if layout != "ladner-fischer":
        raise ValueError(f"unknown prefix layout {layout!r}")
    levels = []
    for level in _depth_optimal(np.arange(n)):
        left = np.concatenate([l for l, _ in level])
        right = np.concatenate([r for _, r in level])
        if right.size:
            levels.append((left, right))
    return tuple(levels)


def scan(ctx, state: list, combine) -> list:
    """Inclusive scan along the last axis of each array in ``state``.

    ``combine(ctx, left, right)`` receives lists of the same length as
    ``state`` and must be associative.
    """
    state = [s.copy() for s in state]
    for left, right in scan_levels(state[0].n, ctx.config.prefix_layout):
        out = combine(ctx, [s.take(left) for s in state], [s.take(right) for s in state])
        for s, o in zip(state, out):
            s.first[..., right] = o.first
            s.second[..., right] = o.second
    return state


class ScanOp(enum.Enum):
    ADD = "add"
    MAX = "max"
    MIN = "min"
    COPY = "copy"


def _value_combine(op: ScanOp):
    if op is ScanOp.ADD:
        return lambda ctx, l, r: [add(ctx, l[0], r[0])]
    if op is ScanOp.MAX:
        return lambda ctx, l, r: [maximum(ctx, l[0], r[0])]
    if op is ScanOp.MIN:
        return lambda ctx, l, r: [minimum(ctx, l[0], r[0])]

    def copy(ctx, l, r):
        # (v1, x1) . (v2, x2) = (v1 | v2, x2 if v2 else x1)
        a, b = and_many(ctx, [(bit_mask(r[1]), r[0] ^ l[0]), (l[1], r[1])])
        return [l[0] ^ a, l[1] ^ r[1] ^ b]

    return copy


def prefix_sum(ctx, x: SharedVector, op=ScanOp.ADD, valid: SharedVector | None = None) -> SharedVector:
    """Inclusive prefix of ``x`` along its last axis.

    For COPY, ``valid`` flags the entries that carry a value and every entry
    receives the nearest valid value at or before it.  For the other
    operators an optional ``valid`` makes invalid entries absorbing: the
    returned pair is ``(prefix, prefix_and_of_valid)``.
    """
    op = ScanOp(op)
    if x.n == 0:
        return x if (valid is None or op is ScanOp.COPY) else (x, valid)
    if op is ScanOp.COPY:
        if valid is None:
            raise ValueError("prefix COPY needs validity flags")
        return scan(ctx, [x, valid], _value_combine(op))[0]
    inner = _value_combine(op)
    if valid is None:
        return scan(ctx, [x], inner)[0]

    def with_valid(ctx, l, r):
        return inner(ctx, l[:1], r[:1]) + [and_(ctx, l[1], r[1])]

    out = scan(ctx, [x, valid], with_valid)
    return out[0], out[1]


def segmented_scan(ctx, heads: SharedVector, x: SharedVector, op=ScanOp.ADD) -> SharedVector:
    """Prefix of ``x`` restarted wherever ``heads`` has bit 1.

    COPY hands every row the value at the head of its segment.
    """
    op = ScanOp(op)
    if x.n == 0:
        return x
    if op is ScanOp.COPY:
        return prefix_sum(ctx, x, op, valid=heads)
    inner = _value_combine(op)

    def combine(ctx, l, r):
        # (h1, x1) . (h2, x2) = (h1 | h2, x2 if h2 else x1 op x2)
        merged = inner(ctx, l[1:], r[1:])[0]
        a, b = and_many(ctx, [(bit_mask(r[0]), r[1] ^ merged), (l[0], r[0])])
        return [l[0] ^ r[0] ^ b, merged ^ a]

    return scan(ctx, [heads, x], combine)[1]


def segment_heads(ctx, keys: SharedVector, marker: SharedVector | None = None) -> SharedVector:
    """Bit 1 where a row's key differs from the previous row's.

    With a marker, keys of dummy rows are blanked first so all dummies form
    segments of their own, apart from every real key.
    """
    keys = as_rows(keys)
    n = keys.n
    if n == 0:
        return zeros(ctx, (0,))
    if marker is not None:
        keys = concat([and_(ctx, keys, bit_mask(marker)), marker.reshape(1, -1)], axis=0)
    if n == 1:
        return public(ctx, np.ones(1, np.uint64))
    same = rows_equal(ctx, keys.take(np.arange(1, n)), keys.take(np.arange(n - 1)))
    return concat([public(ctx, np.ones(1, np.uint64)), not_bit(ctx, same)])


def segment_ends(ctx, heads: SharedVector) -> SharedVector:
    """Bit 1 on the last row of each segment; a local shift of the heads."""
    if heads.n == 0:
        return heads
    return concat([heads.take(np.arange(1, heads.n)), public(ctx, np.ones(1, np.uint64))])


def segmented_prefix_sum(ctx, keys: SharedVector, x: SharedVector, op=ScanOp.ADD, marker=None) -> SharedVector:
    """Prefix of ``x`` within runs of equal ``keys`` (rows already grouped)."""
    return segmented_scan(ctx, segment_heads(ctx, keys, marker), x, op)


def sum_all(ctx, x: SharedVector) -> SharedVector:
    """Sum along the last axis with a balanced tree of adders."""
    if x.n == 0:
        return zeros(ctx, x.shape[:-1])
    while x.n > 1:
        half = x.n // 2
        s = add(ctx, x.take(np.arange(half)), x.take(np.arange(half, 2 * half)))
        x = concat([s, x.take(np.arange(2 * half, x.n))]) if x.n % 2 else s
    return x.take(0)
