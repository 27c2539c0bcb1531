"""d-bit hypercube addresses, prefix blocks, and the delegation tree.

Addresses are unsigned integers read as d-bit strings; bit d-1 is the
leftmost (most significant) bit of the textual rendering.  A block
``p/b`` fixes the top ``b`` bits of ``p`` and spans the ``2^(d-b)``
addresses sharing that prefix.  Delegation always hands out the upper
half of a block, which induces a tree over the addresses themselves:
the parent of any nonzero address is the address with its lowest set
bit cleared.  Everything here is pure and immutable.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

MAX_DIM = 64


class DimensionMismatch(ValueError):
    """Raised when addresses from different-dimension hypercubes are mixed."""


class BlockExhausted(ValueError):
    """Raised when a full-length block is asked to split again."""


@dataclass(frozen=True, order=True)
class Address:
    """A node coordinate in the d-dimensional hypercube."""

    value: int
    dim: int

    def __post_init__(self) -> None:
        if not 1 <= self.dim <= MAX_DIM:
            raise ValueError(f"dimension must be in [1, {MAX_DIM}], got {self.dim}")
        if not 0 <= self.value < (1 << self.dim):
            raise ValueError(f"address {self.value:#x} does not fit in {self.dim} bits")

    def __str__(self) -> str:
        return format(self.value, f"0{self.dim}b")


@dataclass(frozen=True)
class AddressBlock:
    """A prefix block: the top ``mask_len`` bits of ``base`` are fixed.

    ``base`` is the smallest address of the block, so all bits below
    position ``dim - mask_len`` must be zero.
    """

    base: Address
    mask_len: int

    def __post_init__(self) -> None:
        d = self.base.dim
        if not 0 <= self.mask_len <= d:
            raise ValueError(f"mask length {self.mask_len} out of range for d={d}")
        low = d - self.mask_len
        if self.base.value & ((1 << low) - 1):
            raise ValueError(f"block base {self.base} has bits set below the mask")

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def size(self) -> int:
        return 1 << (self.dim - self.mask_len)

    def contains_value(self, value: int) -> bool:
        low = self.dim - self.mask_len
        return (value >> low) == (self.base.value >> low)

    def __str__(self) -> str:
        return f"{self.base}/{self.mask_len}"


def _same_dim(a: Address, b: Address) -> None:
    if a.dim != b.dim:
        raise DimensionMismatch(f"{a.dim}-bit vs {b.dim}-bit address")


def xor_distance(a: Address, b: Address) -> int:
    """Number of coordinates in which two addresses differ."""
    _same_dim(a, b)
    return (a.value ^ b.value).bit_count()


def is_adjacent(a: Address, b: Address) -> bool:
    """True iff the two addresses differ in exactly one dimension."""
    return xor_distance(a, b) == 1


def matches_prefix(dest: Address, block: AddressBlock) -> bool:
    """First-match test: do the top ``mask_len`` bits of dest equal the block's?"""
    if dest.dim != block.dim:
        raise DimensionMismatch(f"{dest.dim}-bit address vs {block.dim}-bit block")
    return block.contains_value(dest.value)


def block_addresses(block: AddressBlock) -> list[Address]:
    """All addresses of a block in ascending order.

    Refuses blocks larger than 2^20 addresses; use ``contains_value`` for
    membership tests on big blocks.
    """
    if block.dim - block.mask_len > 20:
        raise ValueError(f"block {block} too large to enumerate")
    d = block.dim
    return [Address(v, d) for v in range(block.base.value, block.base.value + block.size)]


def split_block(block: AddressBlock) -> tuple[AddressBlock, AddressBlock]:
    """Halve a block: (retained lower half, delegated upper half)."""
    d = block.dim
    if block.mask_len >= d:
        raise BlockExhausted(f"block {block} has no free half to delegate")
    new_mask = block.mask_len + 1
    retained = AddressBlock(block.base, new_mask)
    delegated = AddressBlock(Address(block.base.value + (1 << (d - new_mask)), d), new_mask)
    return retained, delegated


def tree_parent(a: Address) -> Address | None:
    """Parent in the delegation tree: clear the lowest set bit; None at the root."""
    if a.value == 0:
        return None
    return Address(a.value & (a.value - 1), a.dim)


def tree_depth(a: Address) -> int:
    """Hops from an address to the tree root (its popcount)."""
    return a.value.bit_count()


def tree_ancestors(a: Address) -> list[Address]:
    """Strict ancestors of ``a`` from its parent up to the root."""
    out = []
    v = a.value
    while v:
        v &= v - 1
        out.append(Address(v, a.dim))
    return out


@lru_cache(maxsize=1 << 17)
def tree_distance_int(a: int, b: int) -> int:
    """Hop count between two address values along delegation-tree edges.

    Walks the deeper endpoint toward the root one cleared bit at a time;
    dimension-independent because parents are derived from the value alone.
    """
    steps = 0
    while a != b:
        if a.bit_count() >= b.bit_count():
            a &= a - 1
        else:
            b &= b - 1
        steps += 1
    return steps


def tree_distance(a: Address, b: Address) -> int:
    _same_dim(a, b)
    return tree_distance_int(a.value, b.value)


def subtree_block(a: Address) -> AddressBlock:
    """The block of all tree descendants of ``a`` (including ``a`` itself)."""
    if a.value == 0:
        return AddressBlock(a, 0)
    trailing = (a.value & -a.value).bit_length() - 1
    return AddressBlock(a, a.dim - trailing)


def parse_address(text: str, dim: int | None = None) -> Address:
    """Parse a bit string like ``0110``; ``dim`` defaults to its length."""
    text = text.strip()
    if not text or any(c not in "01" for c in text):
        raise ValueError(f"malformed address {text!r}")
    d = dim if dim is not None else len(text)
    if len(text) != d:
        raise ValueError(f"address {text!r} is not {d} bits")
    return Address(int(text, 2), d)


def parse_block(text: str, dim: int | None = None) -> AddressBlock:
    """Parse ``0110m3`` or ``0110/3``; the slash form is used on output."""
    text = text.strip()
    for sep in ("/", "m"):
        if sep in text:
            bits, _, mask = text.partition(sep)
            return AddressBlock(parse_address(bits, dim), int(mask))
    raise ValueError(f"malformed block {text!r}")
