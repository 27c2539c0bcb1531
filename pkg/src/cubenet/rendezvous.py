"""Identity-to-address lookup via rendezvous managers.

Every node registers its (universal id, current address) pair at the node
managing the virtual address V = low d bits of the FNV-1a-64 digest of
its id.  Lookups route to the same manager; answers are cached with a
timeout at the asking node.  Scenario files may pin V per identifier to
make specific managers reproducible regardless of the hash.
"""

from __future__ import annotations

from dataclasses import dataclass

from .addressing import AddressBlock
from .membership import Node, transfer_store

FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211
_MASK64 = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & _MASK64
    return h


def hash_to_virtual(uid: str | bytes, dim: int) -> int:
    """Virtual address of an identifier: low d bits of its FNV-1a-64 digest."""
    data = uid.encode("utf-8") if isinstance(uid, str) else uid
    return fnv1a64(data) & ((1 << dim) - 1)


@dataclass(frozen=True)
class ResolutionCacheEntry:
    uid: str
    resolved: int
    expires_at: int


def store_put(manager: Node, v: int, uid: str, e: int) -> None:
    """Record (or overwrite) an identity's current address at its manager."""
    manager.store.setdefault(v, {})[uid] = e


def store_get(manager: Node, v: int, uid: str) -> int | None:
    return manager.store.get(v, {}).get(uid)


def transfer_entries(src: Node, dst: Node, block: AddressBlock) -> int:
    """Move every stored entry whose virtual address lies in ``block``."""
    return transfer_store(src, dst, block)


def cache_put(node: Node, uid: str, e: int, expires_at: int) -> None:
    node.cache[uid] = (e, expires_at)


def cache_get(node: Node, uid: str, now: int) -> int | None:
    """A still-fresh cached address for ``uid``, dropping it if expired."""
    hit = node.cache.get(uid)
    if hit is None:
        return None
    e, expires_at = hit
    if expires_at <= now:
        del node.cache[uid]
        return None
    return e
