"""Federated training orchestration with per-round evidence broadcasting.

Two modes:

* centralized -- an aggregator plants its key plus a per-author
  surveillance key into every distributed copy, broadcasts a signed tree
  root over that material each round, applies the authors' gradients to a
  clean model it keeps aside, and after the last round embeds everyone's
  own key into the final model and hands each author the authentication
  path it needs for independent proof.
* peer-to-peer -- authors pass the model along a schedule; each tunes
  locally, embeds its own key plus a fresh per-step surveillance key,
  and broadcasts its own tree; the last author assembles the global tree
  from everyone's submitted leaf hashes and publishes.

Simulation state (delivered model copies, surveillance specs) is kept on
the records so attacks and tracing can replay history; only digests and
broadcasts are part of the public transcript.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import crypto
from .crypto import (
    AuthPath,
    Broadcast,
    MerkleTree,
    ModelInfo,
    SigningIdentity,
    build_merkle,
    hash0,
    hash1_sign,
    make_broadcast,
    prove_membership,
    sign_object,
)
from .model import Dataset, ToyModel, evaluate, local_gradient, model_bytes
from .seeds import derive_rng, derive_seed
from .watermark import (
    Key,
    Scheme,
    SurveillanceKey,
    VerifierSpec,
    gen,
    gen_surveillance,
    verify_watermark,
)

PROTOCOL_VERSION = 1
DEFAULT_CLOCK_START = 1_700_000_000


class CapacityExceeded(RuntimeError):
    pass


class LogicalClock:
    """Deterministic stand-in for wall time; one tick per broadcast."""

    def __init__(self, start: int = DEFAULT_CLOCK_START):
        self.now = start

    def tick(self) -> int:
        self.now += 1
        return self.now


@dataclass
class Author:
    id: str
    identity: SigningIdentity
    key: Key
    local_data: Dataset
    # signature over the author's own key, produced once at setup and
    # submitted to whoever assembles the final tree
    key_signature: bytes = b""

    def sign_key(self) -> None:
        self.key_signature = sign_object(self.identity, self.key)


@dataclass
class Aggregator:
    identity: SigningIdentity
    key0: Key
    lr_alpha: float
    surveillance: dict[str, SurveillanceKey] = field(default_factory=dict)
    surveillance_specs: dict[str, VerifierSpec] = field(default_factory=dict)
    key0_signature: bytes = b""

    def sign_key(self) -> None:
        self.key0_signature = sign_object(self.identity, self.key0)


@dataclass(frozen=True)
class AuthorRound:
    """What one author saw in one round (model kept for simulation)."""

    model_digest: bytes
    broadcast: Broadcast
    model: ToyModel
    verifier_specs: tuple[VerifierSpec, ...]


@dataclass(frozen=True)
class RoundRecord:
    round: int
    per_author: dict[str, AuthorRound]
    aggregated_digest: bytes
    test_accuracy: float


@dataclass(frozen=True)
class AuthorPackage:
    """Evidence material one author receives after the final broadcast."""

    auth_path: AuthPath
    verifier_spec: VerifierSpec
    leaf_signature: bytes


@dataclass(frozen=True)
class FinalPackage:
    final_model: ToyModel
    final_broadcast: Broadcast
    intermediates: dict[str, AuthorPackage]
    info: ModelInfo
    tree: MerkleTree


@dataclass
class FLConfig:
    alpha: float | None = None  # None: normalize so one round == one GD step
    lr: float = 0.5
    security_param: int = 256
    clock_start: int = DEFAULT_CLOCK_START
    watermarking: bool = True
    capacity_precheck: bool = True
    precheck_delta: float = 0.25
    # peer-to-peer local tuning per step
    p2p_tune_epochs: int = 3
    p2p_tune_lr: float = 0.01


def make_model_digest(model: ToyModel) -> bytes:
    return hash0(model_bytes(model))


def split_among_authors(data: Dataset, k: int) -> list[Dataset]:
    """Disjoint, equally sized shards in index order."""
    per = data.weight // k
    return [data.subset(np.arange(i * per, (i + 1) * per)) for i in range(k)]


def make_authors(
    k: int, shards: list[Dataset], master_seed: int | bytes, security_param: int = 256
) -> list[Author]:
    authors = []
    for i in range(k):
        aid = f"author-{i + 1}"
        identity = SigningIdentity.generate(aid, derive_seed(master_seed, "ident", aid))
        key = gen(security_param, derive_rng(master_seed, "key", aid), aid)
        author = Author(id=aid, identity=identity, key=key, local_data=shards[i])
        author.sign_key()
        authors.append(author)
    return authors


def make_aggregator(
    master_seed: int | bytes, alpha: float | None = None, security_param: int = 256
) -> Aggregator:
    identity = SigningIdentity.generate(
        "aggregator", derive_seed(master_seed, "ident", "aggregator")
    )
    key0 = gen(security_param, derive_rng(master_seed, "key", "aggregator"), "aggregator")
    agg = Aggregator(identity=identity, key0=key0, lr_alpha=alpha if alpha else 0.0)
    agg.sign_key()
    return agg


def aggregate(
    model: ToyModel, gradients: list[tuple[np.ndarray, int]], alpha: float
) -> ToyModel:
    """Weighted gradient-average update: params + alpha * sum(w_k * delta_k)."""
    total = np.zeros_like(model.params)
    for delta, weight in gradients:
        if len(delta) != model.num_params:
            raise ValueError("gradient length does not match model")
        total += weight * delta
    return model.with_params(model.params + alpha * total)


def _leaf_order_digests(
    key_leaves: list[bytes], ver_leaves: list[bytes], info_leaf: bytes
) -> list[bytes]:
    # Fixed order: keys in ascending author index, then verifiers, then info.
    return key_leaves + ver_leaves + [info_leaf]


def _merkle_over(
    key_leaves: list[bytes], ver_leaves: list[bytes], info_leaf: bytes
) -> MerkleTree:
    return build_merkle(_leaf_order_digests(key_leaves, ver_leaves, info_leaf))


def capacity_precheck(
    model: ToyModel,
    scheme: Scheme,
    needed: int,
    test: Dataset,
    delta: float,
    rng: np.random.Generator,
) -> None:
    """Cheap feasibility check: the model must hold ``needed`` marks.

    Embeds ``needed`` fresh keys into a throwaway copy, then re-verifies
    all of them and bounds the accuracy loss.  Raises CapacityExceeded on
    the first violated condition.
    """
    baseline = evaluate(model, test).accuracy
    current = model
    marks: list[tuple[Key, VerifierSpec]] = []
    for i in range(needed):
        probe = gen(256, rng, f"precheck-{i}")
        try:
            current, spec = scheme.embed(current, probe)
        except Exception as exc:
            raise CapacityExceeded(f"embedding mark {i + 1}/{needed} failed") from exc
        marks.append((probe, spec))
    for probe, spec in marks:
        if not scheme.verify(current, probe, spec):
            raise CapacityExceeded(
                f"only {needed - 1} of {needed} marks survived the precheck"
            )
    if evaluate(current, test).accuracy < baseline - delta:
        raise CapacityExceeded(
            f"accuracy under {needed} marks dropped more than {delta}"
        )


def run_centralized(
    authors: list[Author],
    aggregator: Aggregator,
    scheme: Scheme | None,
    rounds: int,
    config: FLConfig,
    initial_model: ToyModel,
    test: Dataset,
    master_seed: int | bytes = 0,
) -> tuple[FinalPackage, list[RoundRecord]]:
    """Centralized federated training under the evidence-broadcast protocol."""
    k = len(authors)
    alpha = config.alpha
    if alpha is None:
        total = sum(a.local_data.weight for a in authors)
        alpha = config.lr / total

    clock = LogicalClock(config.clock_start)
    clean = initial_model
    arch = initial_model.layer_shapes
    records: list[RoundRecord] = []

    watermarking = config.watermarking and scheme is not None
    if watermarking:
        if config.capacity_precheck:
            capacity_precheck(
                clean,
                scheme,
                k + 1,
                test,
                config.precheck_delta,
                derive_rng(master_seed, "precheck"),
            )
        for author in authors:
            if author.id not in aggregator.surveillance:
                aggregator.surveillance[author.id] = gen_surveillance(
                    config.security_param,
                    derive_rng(master_seed, "surveillance", author.id),
                    author.id,
                )

    for rnd in range(1, rounds + 1):
        info = ModelInfo(layer_shapes=arch, round_index=rnd, protocol_version=PROTOCOL_VERSION)
        info_leaf = hash1_sign(aggregator.identity, info)
        per_author: dict[str, AuthorRound] = {}
        gradients: list[tuple[np.ndarray, int]] = []

        for author in authors:
            if watermarking:
                skey = aggregator.surveillance[author.id]
                marked, spec0 = scheme.embed(clean, aggregator.key0)
                marked, spec_dag = scheme.embed(marked, skey)
                aggregator.surveillance_specs[author.id] = spec_dag
                vers = (spec0, spec_dag)
                key_leaves = [
                    hash1_sign(aggregator.identity, aggregator.key0),
                    hash1_sign(aggregator.identity, skey),
                ]
                ver_leaves = [
                    hash1_sign(aggregator.identity, spec0),
                    hash1_sign(aggregator.identity, spec_dag),
                ]
            else:
                marked, vers, key_leaves, ver_leaves = clean, (), [], []

            tree = _merkle_over(key_leaves, ver_leaves, info_leaf)
            broadcast = make_broadcast(aggregator.identity, clock.tick(), tree.root, info)

            # author computes its update direction on the delivered copy
            delta = -local_gradient(marked, author.local_data)
            gradients.append((delta, author.local_data.weight))
            per_author[author.id] = AuthorRound(
                model_digest=make_model_digest(marked),
                broadcast=broadcast,
                model=marked,
                verifier_specs=vers,
            )

        clean = aggregate(clean, gradients, alpha)
        records.append(
            RoundRecord(
                round=rnd,
                per_author=per_author,
                aggregated_digest=make_model_digest(clean),
                test_accuracy=evaluate(clean, test).accuracy,
            )
        )

    # final embedding of everyone's own key, then the global broadcast
    final_info = ModelInfo(
        layer_shapes=arch, round_index=rounds + 1, protocol_version=PROTOCOL_VERSION
    )
    final_model = clean
    participants: list[tuple[str, Key, bytes]] = [
        ("aggregator", aggregator.key0, aggregator.key0_signature)
    ] + [(a.id, a.key, a.key_signature) for a in authors]

    specs: dict[str, VerifierSpec] = {}
    key_leaves, ver_leaves = [], []
    if watermarking:
        for pid, key, signature in participants:
            final_model, spec = scheme.embed(final_model, key)
            specs[pid] = spec
            key_leaves.append(hash0(signature))
            ver_leaves.append(hash1_sign(aggregator.identity, spec))
    info_leaf = hash1_sign(aggregator.identity, final_info)
    tree = _merkle_over(key_leaves, ver_leaves, info_leaf)
    final_broadcast = make_broadcast(
        aggregator.identity, clock.tick(), tree.root, final_info
    )

    intermediates: dict[str, AuthorPackage] = {}
    if watermarking:
        signatures = {pid: sig for pid, _, sig in participants}
        for index, (pid, _, _) in enumerate(participants):
            intermediates[pid] = AuthorPackage(
                auth_path=prove_membership(tree, index),
                verifier_spec=specs[pid],
                leaf_signature=signatures[pid],
            )

    package = FinalPackage(
        final_model=final_model,
        final_broadcast=final_broadcast,
        intermediates=intermediates,
        info=final_info,
        tree=tree,
    )
    return package, records


# ---------------------------------------------------------------------------
# Peer-to-peer mode
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class P2PStepRecord:
    """One position in the chain: its broadcast plus tracing material."""

    position: int  # 1-based
    author_id: str
    broadcast: Broadcast
    model_out: ToyModel
    model_digest: bytes
    surveillance_key: SurveillanceKey
    surveillance_spec: VerifierSpec
    own_spec: VerifierSpec
    # leaf digests in broadcast order, kept so consistency of later
    # disclosures against the recorded root can be checked
    own_key_leaf: bytes
    own_ver_leaf: bytes
    surveillance_key_leaf: bytes
    surveillance_ver_leaf: bytes
    info_leaf: bytes
    surveillance_key_signature: bytes
    surveillance_ver_signature: bytes


def run_p2p(
    authors: list[Author],
    schedule: list[str],
    scheme: Scheme,
    config: FLConfig,
    initial_model: ToyModel,
    test: Dataset,
    master_seed: int | bytes = 0,
) -> tuple[FinalPackage, list[P2PStepRecord]]:
    """Chain-structured training: tune, embed, broadcast, pass along.

    ``schedule`` lists author ids, repetitions allowed.  The last position
    collects everyone's leaf hashes, builds the global tree, broadcasts it
    and publishes the model.
    """
    by_id = {a.id: a for a in authors}
    if not schedule or any(s not in by_id for s in schedule):
        raise ValueError("schedule must name known authors")
    steps = len(schedule)
    arch = initial_model.layer_shapes
    clock = LogicalClock(config.clock_start)

    if config.capacity_precheck:
        capacity_precheck(
            initial_model,
            scheme,
            min(steps + 1, 2 * len(authors) + 1),
            test,
            config.precheck_delta,
            derive_rng(master_seed, "p2p-precheck"),
        )

    current = initial_model
    records: list[P2PStepRecord] = []
    own_specs: dict[str, VerifierSpec] = {}

    for t, author_id in enumerate(schedule, start=1):
        author = by_id[author_id]
        current = (
            current
            if config.p2p_tune_epochs == 0
            else _tune(current, author.local_data, config.p2p_tune_epochs, config.p2p_tune_lr)
        )
        skey = gen_surveillance(
            config.security_param,
            derive_rng(master_seed, "p2p-surveillance", t),
            author_id,
        )
        current, own_spec = scheme.embed(current, author.key)
        current, dag_spec = scheme.embed(current, skey)
        own_specs[author_id] = own_spec

        info = ModelInfo(layer_shapes=arch, round_index=t, protocol_version=PROTOCOL_VERSION)
        own_key_leaf = hash0(author.key_signature)
        skey_sig = sign_object(author.identity, skey)
        skey_leaf = hash0(skey_sig)
        own_ver_sig = sign_object(author.identity, own_spec)
        own_ver_leaf = hash0(own_ver_sig)
        dag_ver_sig = sign_object(author.identity, dag_spec)
        dag_ver_leaf = hash0(dag_ver_sig)
        info_leaf = hash1_sign(author.identity, info)
        tree = _merkle_over(
            [own_key_leaf, skey_leaf], [own_ver_leaf, dag_ver_leaf], info_leaf
        )
        broadcast = make_broadcast(author.identity, clock.tick(), tree.root, info)
        records.append(
            P2PStepRecord(
                position=t,
                author_id=author_id,
                broadcast=broadcast,
                model_out=current,
                model_digest=make_model_digest(current),
                surveillance_key=skey,
                surveillance_spec=dag_spec,
                own_spec=own_spec,
                own_key_leaf=own_key_leaf,
                own_ver_leaf=own_ver_leaf,
                surveillance_key_leaf=skey_leaf,
                surveillance_ver_leaf=dag_ver_leaf,
                info_leaf=info_leaf,
                surveillance_key_signature=skey_sig,
                surveillance_ver_signature=dag_ver_sig,
            )
        )

    # Final global tree assembled by the last author in the schedule from
    # every author's submitted leaf hashes, in ascending author order.
    last = by_id[schedule[-1]]
    final_info = ModelInfo(
        layer_shapes=arch, round_index=steps + 1, protocol_version=PROTOCOL_VERSION
    )
    ordered = sorted(authors, key=lambda a: a.id)
    key_leaves = [hash0(a.key_signature) for a in ordered]
    ver_leaves = [hash1_sign(last.identity, own_specs[a.id]) for a in ordered]
    info_leaf = hash1_sign(last.identity, final_info)
    tree = _merkle_over(key_leaves, ver_leaves, info_leaf)
    final_broadcast = make_broadcast(last.identity, clock.tick(), tree.root, final_info)

    intermediates = {
        a.id: AuthorPackage(
            auth_path=prove_membership(tree, i),
            verifier_spec=own_specs[a.id],
            leaf_signature=a.key_signature,
        )
        for i, a in enumerate(ordered)
    }
    package = FinalPackage(
        final_model=current,
        final_broadcast=final_broadcast,
        intermediates=intermediates,
        info=final_info,
        tree=tree,
    )
    return package, records


def _tune(model: ToyModel, data: Dataset, epochs: int, lr: float) -> ToyModel:
    params = model.params
    current = model
    for _ in range(epochs):
        params = params - lr * local_gradient(current, data)
        current = model.with_params(params)
    return current
