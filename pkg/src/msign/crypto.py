"""Hashing, deterministic signatures, Merkle trees and canonical serialization.

Everything that ends up inside a broadcast travels through this module:
objects are serialized with a fixed, schema-ordered byte encoding, hashed
with domain-separated SHA-256, and combined into a binary hash tree whose
root is what gets signed and published.  All functions are pure; nothing
here keeps mutable state.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from typing import Sequence

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric import ed25519

DIGEST_SIZE = 32

# Domain-separation prefixes: plain hashing vs. two-child tree reduction.
_DOMAIN_HASH0 = b"\x00"
_DOMAIN_HASH2 = b"\x02"

# Test hook: when set at import time, hash0 output is corrupted by one byte.
# Used by the self-check harness to prove that fault injection is detected.
_FAULT_HASH0 = os.environ.get("MSIGN_FAULT_INJECT", "") == "hash0"


class SerializationError(TypeError):
    """Object has no canonical byte encoding."""


class EmptyLeaves(ValueError):
    """A hash tree needs at least one leaf."""


class IndexOutOfRange(IndexError):
    """Leaf index beyond the original (unpadded) leaf list."""


def hash0(message: bytes) -> bytes:
    """Preimage-resistant hash of arbitrary bytes (32-byte output)."""
    digest = hashlib.sha256(_DOMAIN_HASH0 + message).digest()
    if _FAULT_HASH0:
        digest = digest[:-1] + bytes([digest[-1] ^ 0x01])
    return digest


def hash2(left: bytes, right: bytes) -> bytes:
    """Tree-reduction hash of two 32-byte digests into one."""
    if len(left) != DIGEST_SIZE or len(right) != DIGEST_SIZE:
        raise ValueError("hash2 operands must be 32-byte digests")
    return hashlib.sha256(_DOMAIN_HASH2 + left + right).digest()


# ---------------------------------------------------------------------------
# Canonical encoding primitives
# ---------------------------------------------------------------------------
#
# Fixed field order per type, little-endian integers, length-prefixed
# variable fields.  A one-byte type tag keeps encodings of different types
# from colliding.

TAG_KEY = 0x4B
TAG_VERIFIER_SPEC = 0x56
TAG_MODEL_INFO = 0x49
TAG_BROADCAST_BODY = 0x42


def _u8(v: int) -> bytes:
    return v.to_bytes(1, "little")


def _u16(v: int) -> bytes:
    return v.to_bytes(2, "little")


def _u32(v: int) -> bytes:
    return v.to_bytes(4, "little")


def _u64(v: int) -> bytes:
    return v.to_bytes(8, "little")


def _blob(b: bytes) -> bytes:
    if len(b) > 0xFFFF:
        raise SerializationError("variable field longer than 65535 bytes")
    return _u16(len(b)) + b


def _text(s: str) -> bytes:
    return _blob(s.encode("utf-8"))


class _Reader:
    """Cursor over canonical bytes; raises ValueError on truncation."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ValueError("truncated canonical encoding")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return int.from_bytes(self.take(2), "little")

    def u32(self) -> int:
        return int.from_bytes(self.take(4), "little")

    def u64(self) -> int:
        return int.from_bytes(self.take(8), "little")

    def blob(self) -> bytes:
        return self.take(self.u16())

    def text(self) -> str:
        return self.blob().decode("utf-8")

    def done(self) -> None:
        if self.pos != len(self.data):
            raise ValueError("trailing bytes after canonical encoding")


def canonical_encode(obj) -> bytes:
    """Schema-ordered byte encoding, bit-exact across runs and platforms.

    Accepts any object exposing ``canonical_bytes()`` (keys, verifier
    specifications, model info, broadcast bodies).
    """
    enc = getattr(obj, "canonical_bytes", None)
    if enc is None:
        raise SerializationError(f"{type(obj).__name__} has no canonical form")
    return enc()


# ---------------------------------------------------------------------------
# Identities and leaf signatures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SigningIdentity:
    """An author's signing keypair plus its public identifier."""

    author_id: str
    private_key: ed25519.Ed25519PrivateKey = field(repr=False)
    public_key: bytes  # raw 32-byte verification key

    @classmethod
    def generate(cls, author_id: str, seed: bytes) -> "SigningIdentity":
        if len(seed) != 32:
            raise ValueError("identity seed must be 32 bytes")
        priv = ed25519.Ed25519PrivateKey.from_private_bytes(seed)
        pub = priv.public_key().public_bytes_raw()
        return cls(author_id=author_id, private_key=priv, public_key=pub)

    def sign(self, message: bytes) -> bytes:
        return self.private_key.sign(message)


def verify_signature(public_key: bytes, message: bytes, signature: bytes) -> bool:
    try:
        ed25519.Ed25519PublicKey.from_public_bytes(public_key).verify(
            signature, message
        )
        return True
    except (InvalidSignature, ValueError, TypeError):
        return False


def sign_object(identity: SigningIdentity, obj) -> bytes:
    """Signature over hash0 of the object's canonical encoding."""
    return identity.sign(hash0(canonical_encode(obj)))


def hash1_sign(identity: SigningIdentity, obj) -> bytes:
    """Leaf digest for an object: hash0 of its deterministic signature.

    The signature itself is what a third party later checks; only its hash
    enters the tree so every leaf is a fixed 32 bytes.
    """
    return hash0(sign_object(identity, obj))


def verify_leaf(public_key: bytes, obj, claimed_leaf: bytes, signature: bytes) -> bool:
    """True iff signature matches the object under public_key and hashes to the leaf."""
    try:
        message = hash0(canonical_encode(obj))
    except SerializationError:
        return False
    if not verify_signature(public_key, message, signature):
        return False
    return hash0(signature) == claimed_leaf


# ---------------------------------------------------------------------------
# Merkle tree with positional labels
# ---------------------------------------------------------------------------
#
# Nodes are labeled by their path from the root: "" is the root, "0"/"1"
# its children, and so on; leaves of a tree of height h carry h-bit labels.
# The leaf level is padded to the next power of two by repeating the last
# digest, so every internal node has both children and the label scheme is
# unambiguous.


@dataclass(frozen=True)
class MerkleTree:
    leaf_digests: tuple[bytes, ...]  # original, unpadded
    nodes: dict[str, bytes]  # label -> digest, root at ""
    root: bytes
    padded_count: int

    @property
    def height(self) -> int:
        return (self.padded_count - 1).bit_length()

    @property
    def pad_labels(self) -> tuple[str, ...]:
        h = self.height
        return tuple(
            format(i, f"0{h}b") if h else ""
            for i in range(len(self.leaf_digests), self.padded_count)
        )


@dataclass(frozen=True)
class AuthPath:
    """Sibling digests needed to recompute the root from one leaf."""

    leaf_index: int
    leaf_digest: bytes
    siblings: tuple[tuple[str, bytes], ...]  # (position label, digest), bottom-up

    def canonical_bytes(self) -> bytes:
        out = [_u32(self.leaf_index), self.leaf_digest, _u16(len(self.siblings))]
        for label, digest in self.siblings:
            out.append(_text(label))
            out.append(digest)
        return b"".join(out)


def _next_pow2(n: int) -> int:
    return 1 << (n - 1).bit_length() if n > 1 else 1


def build_merkle(leaves: Sequence[bytes]) -> MerkleTree:
    """Reduce an ordered list of 32-byte digests into a labeled hash tree."""
    if not leaves:
        raise EmptyLeaves("cannot build a tree from zero leaves")
    for leaf in leaves:
        if len(leaf) != DIGEST_SIZE:
            raise ValueError("every leaf must be a 32-byte digest")

    padded = list(leaves) + [leaves[-1]] * (_next_pow2(len(leaves)) - len(leaves))
    height = (len(padded) - 1).bit_length()

    nodes: dict[str, bytes] = {}
    level = padded
    depth = height
    while True:
        for i, digest in enumerate(level):
            label = format(i, f"0{depth}b") if depth else ""
            nodes[label] = digest
        if len(level) == 1:
            break
        level = [hash2(level[i], level[i + 1]) for i in range(0, len(level), 2)]
        depth -= 1

    return MerkleTree(
        leaf_digests=tuple(leaves),
        nodes=nodes,
        root=nodes[""],
        padded_count=len(padded),
    )


def prove_membership(tree: MerkleTree, leaf_index: int) -> AuthPath:
    """Authentication path for one leaf: its sibling at every level."""
    if not 0 <= leaf_index < len(tree.leaf_digests):
        raise IndexOutOfRange(
            f"leaf index {leaf_index} out of range for {len(tree.leaf_digests)} leaves"
        )
    siblings = []
    index = leaf_index
    for depth in range(tree.height, 0, -1):
        sib = index ^ 1
        label = format(sib, f"0{depth}b")
        siblings.append((label, tree.nodes[label]))
        index //= 2
    return AuthPath(
        leaf_index=leaf_index,
        leaf_digest=tree.leaf_digests[leaf_index],
        siblings=tuple(siblings),
    )


def verify_membership(path: AuthPath, root: bytes) -> bool:
    """Fold the leaf through its siblings; accept iff the root matches.

    Left/right placement is read off each sibling's label: a label ending
    in "0" sits to the left of the running node.  Malformed paths return
    False rather than raising.
    """
    try:
        current = path.leaf_digest
        if len(current) != DIGEST_SIZE:
            return False
        for label, digest in path.siblings:
            if not label or any(c not in "01" for c in label):
                return False
            if label[-1] == "0":
                current = hash2(digest, current)
            else:
                current = hash2(current, digest)
        return current == root
    except (ValueError, TypeError, AttributeError):
        return False


# ---------------------------------------------------------------------------
# Model info and broadcasts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelInfo:
    """Public description of what a broadcast is about."""

    layer_shapes: tuple[tuple[int, int], ...]
    round_index: int
    protocol_version: int = 1

    def canonical_bytes(self) -> bytes:
        out = [
            _u8(TAG_MODEL_INFO),
            _u8(self.protocol_version),
            _u32(self.round_index),
            _u16(len(self.layer_shapes)),
        ]
        for fan_in, fan_out in self.layer_shapes:
            out.append(_u32(fan_in))
            out.append(_u32(fan_out))
        return b"".join(out)

    @classmethod
    def from_canonical(cls, data: bytes) -> "ModelInfo":
        r = _Reader(data)
        if r.u8() != TAG_MODEL_INFO:
            raise ValueError("not a model-info encoding")
        version = r.u8()
        round_index = r.u32()
        shapes = tuple((r.u32(), r.u32()) for _ in range(r.u16()))
        r.done()
        return cls(
            layer_shapes=shapes, round_index=round_index, protocol_version=version
        )


@dataclass(frozen=True)
class Broadcast:
    """Signed, timestamped commitment to a tree root plus model info."""

    timestamp: int
    root: bytes
    info: ModelInfo
    signature: bytes
    signer: str

    def body_bytes(self) -> bytes:
        return (
            _u8(TAG_BROADCAST_BODY)
            + _u64(self.timestamp)
            + self.root
            + canonical_encode(self.info)
        )

    def wire_bytes(self) -> bytes:
        """Transport encoding:
        [8B timestamp LE][32B root][2B len + info][2B len + sig][2B len + signer].
        """
        return (
            _u64(self.timestamp)
            + self.root
            + _blob(canonical_encode(self.info))
            + _blob(self.signature)
            + _text(self.signer)
        )

    @classmethod
    def from_wire(cls, data: bytes) -> "Broadcast":
        r = _Reader(data)
        timestamp = r.u64()
        root = r.take(DIGEST_SIZE)
        info = ModelInfo.from_canonical(r.blob())
        signature = r.blob()
        signer = r.text()
        r.done()
        return cls(
            timestamp=timestamp, root=root, info=info, signature=signature, signer=signer
        )


def make_broadcast(
    identity: SigningIdentity, timestamp: int, root: bytes, info: ModelInfo
) -> Broadcast:
    if len(root) != DIGEST_SIZE:
        raise ValueError("broadcast root must be a 32-byte digest")
    unsigned = Broadcast(
        timestamp=timestamp, root=root, info=info, signature=b"", signer=identity.author_id
    )
    signature = identity.sign(unsigned.body_bytes())
    return Broadcast(
        timestamp=timestamp,
        root=root,
        info=info,
        signature=signature,
        signer=identity.author_id,
    )


def verify_broadcast(broadcast: Broadcast, public_key: bytes) -> bool:
    return verify_signature(public_key, broadcast.body_bytes(), broadcast.signature)
