from cubenet.addressing import parse_block
from cubenet.membership import Node
from cubenet.rendezvous import (
    FNV_OFFSET,
    cache_get,
    cache_put,
    fnv1a64,
    hash_to_virtual,
    store_get,
    store_put,
    transfer_entries,
)


def mk_node(name, block_text):
    block = parse_block(block_text)
    return Node(name=name, dim=block.dim, main=block.base, block=block, initial_mask=block.mask_len)


class TestHash:
    def test_empty_input_is_offset_basis(self):
        assert fnv1a64(b"") == FNV_OFFSET == 14695981039346656037

    def test_known_vector(self):
        # published FNV-1a-64 test vector
        assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C

    def test_virtual_address_is_low_bits(self):
        assert hash_to_virtual("", 4) == FNV_OFFSET & 0xF == 0b0101

    def test_deterministic(self):
        assert hash_to_virtual("node-7", 9) == hash_to_virtual("node-7", 9)

    def test_accepts_bytes(self):
        assert hash_to_virtual(b"xyz", 8) == fnv1a64(b"xyz") & 0xFF


class TestStore:
    def test_put_overwrites_per_identity(self):
        n = mk_node("m", "0000/2")
        store_put(n, 0b0001, "u", 7)
        store_put(n, 0b0001, "u", 9)
        assert store_get(n, 0b0001, "u") == 9
        assert n.store_size() == 1

    def test_miss(self):
        n = mk_node("m", "0000/2")
        assert store_get(n, 0b0001, "nope") is None

    def test_transfer_moves_only_block_entries(self):
        src = mk_node("src", "0000/2")
        dst = mk_node("dst", "0010/3")
        store_put(src, 0b0010, "u1", 1)
        store_put(src, 0b0011, "u2", 2)
        store_put(src, 0b0000, "u3", 3)
        moved = transfer_entries(src, dst, parse_block("0010/3"))
        assert moved == 2
        assert store_get(dst, 0b0010, "u1") == 1
        assert store_get(dst, 0b0011, "u2") == 2
        assert store_get(src, 0b0000, "u3") == 3
        assert src.store_size() == 1 and dst.store_size() == 2

    def test_transfer_conserves_count(self):
        src = mk_node("src", "0000/1")
        dst = mk_node("dst", "0100/2")
        for v in range(8):
            store_put(src, v, f"u{v}", v)
        before = src.store_size() + dst.store_size()
        transfer_entries(src, dst, parse_block("0100/2"))
        assert src.store_size() + dst.store_size() == before

    def test_empty_transfer_is_noop(self):
        src = mk_node("src", "0000/2")
        dst = mk_node("dst", "0010/3")
        assert transfer_entries(src, dst, parse_block("0010/3")) == 0


class TestCache:
    def test_fresh_hit(self):
        n = mk_node("o", "0000/2")
        cache_put(n, "u", 5, expires_at=100)
        assert cache_get(n, "u", now=99) == 5

    def test_expiry(self):
        n = mk_node("o", "0000/2")
        cache_put(n, "u", 5, expires_at=100)
        assert cache_get(n, "u", now=100) is None
        assert "u" not in n.cache

    def test_miss(self):
        n = mk_node("o", "0000/2")
        assert cache_get(n, "u", now=0) is None
