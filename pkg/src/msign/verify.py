"""The public verification community: proofs, recovery, traitor tracing.

Agents independently check three things for an ownership claim: that the
claimed key leaf sits in a recorded broadcast's tree (membership), that
the leaf was signed by the claimant (binding), and that the watermark
itself is present in the suspicious model (scheme verification).  The
verdict is a majority vote so a minority of dishonest agents cannot flip
the outcome.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .crypto import (
    AuthPath,
    Broadcast,
    ModelInfo,
    hash0,
    verify_leaf,
    verify_membership,
)
from .model import ToyModel
from .watermark import Key, SchemeMismatch, VerifierSpec, verify_watermark

if TYPE_CHECKING:
    from .fl import Aggregator, P2PStepRecord


class UnknownBroadcast(LookupError):
    pass


class AmbiguousTrace(RuntimeError):
    """More than one surveillance key verified; capacity violation upstream."""


class InconsistentHistory(RuntimeError):
    """A disclosed leaf does not match the author's recorded broadcast."""

    def __init__(self, position: int, author_id: str):
        super().__init__(f"position {position} ({author_id}) disclosed forged material")
        self.position = position
        self.author_id = author_id


class NotAParticipant(LookupError):
    pass


@dataclass(frozen=True)
class Evidence:
    """What a claimant submits: key, verifier, info and a partial proof."""

    key: Key
    verifier: VerifierSpec
    info: ModelInfo
    auth_path: AuthPath
    leaf_signature: bytes


@dataclass(frozen=True)
class CommunityAgent:
    id: str
    behavior: str = "honest"  # honest | always-accept | always-reject


@dataclass
class Community:
    agents: list[CommunityAgent]
    broadcast_log: list[Broadcast] = field(default_factory=list)

    def record(self, broadcast: Broadcast) -> None:
        self.broadcast_log.append(broadcast)

    def knows(self, broadcast: Broadcast) -> bool:
        return broadcast in self.broadcast_log


def make_community(size: int = 7, dissenters: int = 0) -> Community:
    """Honest community, optionally with trailing always-reject agents."""
    agents = [
        CommunityAgent(id=f"agent-{i + 1}", behavior="honest")
        for i in range(size - dissenters)
    ]
    agents += [
        CommunityAgent(id=f"agent-{size - dissenters + i + 1}", behavior="always-reject")
        for i in range(dissenters)
    ]
    return Community(agents=agents)


@dataclass(frozen=True)
class AgentVote:
    agent_id: str
    vote: bool
    checks: dict[str, bool]


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    votes_for: int
    votes_against: int
    votes: tuple[AgentVote, ...] = ()

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "votes_for": self.votes_for,
            "votes_against": self.votes_against,
            "per_agent": [
                {"agent": v.agent_id, "vote": v.vote, "checks": v.checks}
                for v in self.votes
            ],
        }


def _tally(community: Community, honest_vote: bool, checks: dict[str, bool]) -> Verdict:
    votes = []
    for agent in community.agents:
        if agent.behavior == "always-accept":
            vote = True
        elif agent.behavior == "always-reject":
            vote = False
        else:
            vote = honest_vote
        votes.append(AgentVote(agent_id=agent.id, vote=vote, checks=dict(checks)))
    votes_for = sum(v.vote for v in votes)
    votes_against = len(votes) - votes_for
    return Verdict(
        accepted=votes_for > len(community.agents) / 2,
        votes_for=votes_for,
        votes_against=votes_against,
        votes=tuple(votes),
    )


def _honest_checks(
    suspicious_model: ToyModel,
    evidence: Evidence,
    reference_broadcast: Broadcast,
    claimant_public_key: bytes,
) -> dict[str, bool]:
    checks = {
        "membership": verify_membership(evidence.auth_path, reference_broadcast.root),
        "leaf": verify_leaf(
            claimant_public_key,
            evidence.key,
            evidence.auth_path.leaf_digest,
            evidence.leaf_signature,
        ),
        # the published commitment must describe the model under dispute
        "info": (
            evidence.info == reference_broadcast.info
            and evidence.info.layer_shapes == suspicious_model.layer_shapes
        ),
    }
    try:
        checks["scheme"] = verify_watermark(
            suspicious_model, evidence.key, evidence.verifier
        )
    except (SchemeMismatch, ValueError):
        checks["scheme"] = False
    return checks


def prove_ownership(
    community: Community,
    suspicious_model: ToyModel,
    evidence: Evidence,
    reference_broadcast: Broadcast,
    claimant_public_key: bytes,
) -> Verdict:
    """Independent ownership proof against one recorded broadcast."""
    if not community.knows(reference_broadcast):
        raise UnknownBroadcast("reference broadcast is not in the public log")
    checks = _honest_checks(
        suspicious_model, evidence, reference_broadcast, claimant_public_key
    )
    return _tally(community, all(checks.values()), checks)


def recover_ownership(
    community: Community,
    suspicious_model: ToyModel,
    victim_evidence: Evidence,
    victim_public_key: bytes,
    coauthor_evidence: Evidence,
    coauthor_public_key: bytes,
    reference_broadcast: Broadcast,
) -> Verdict:
    """Re-establish a spoiled author's ownership through one co-author.

    The co-author must prove ownership of the suspicious model outright;
    the victim's key leaf must additionally sit in the same tree, which
    shows the victim was incorporated before the broadcast was signed.
    The victim's own scheme verification is expected to fail (that is the
    point of recovery) and is not required.
    """
    if not community.knows(reference_broadcast):
        raise UnknownBroadcast("reference broadcast is not in the public log")
    co_checks = _honest_checks(
        suspicious_model, coauthor_evidence, reference_broadcast, coauthor_public_key
    )
    victim_checks = {
        "victim_membership": verify_membership(
            victim_evidence.auth_path, reference_broadcast.root
        ),
        "victim_leaf": verify_leaf(
            victim_public_key,
            victim_evidence.key,
            victim_evidence.auth_path.leaf_digest,
            victim_evidence.leaf_signature,
        ),
        "victim_info": victim_evidence.info == reference_broadcast.info,
    }
    checks = {f"coauthor_{k}": v for k, v in co_checks.items()} | victim_checks
    return _tally(community, all(checks.values()), checks)


def earlier_broadcast(a: Broadcast, b: Broadcast) -> Broadcast:
    """Priority rule for competing claims: the earlier recorded timestamp."""
    return a if a.timestamp <= b.timestamp else b


# ---------------------------------------------------------------------------
# Traitor tracing
# ---------------------------------------------------------------------------


def trace_traitor_centralized(
    aggregator: "Aggregator", suspicious_model: ToyModel
) -> str | None:
    """Return the author whose surveillance key is inside the model.

    None when no surveillance key verifies (the model is not a leaked
    intermediate copy).  Multiple hits are surfaced, not tie-broken.
    """
    hits = []
    for author_id, skey in aggregator.surveillance.items():
        spec = aggregator.surveillance_specs.get(author_id)
        if spec is None:
            continue
        if verify_watermark(suspicious_model, skey, spec):
            hits.append(author_id)
    if len(hits) > 1:
        raise AmbiguousTrace(f"multiple surveillance keys verified: {hits}")
    return hits[0] if hits else None


def trace_traitor_p2p(
    step_records: list["P2PStepRecord"],
    pirated_model: ToyModel,
    community: Community,
    public_keys: dict[str, bytes],
) -> int:
    """Walk the chain; the first position whose surveillance mark is
    absent pins the leak to the position before it.

    Each position discloses its surveillance key and verifier together
    with their leaf signatures, plus the leaf hashes of its own (still
    private) key and verifier; the community recomputes the position's
    broadcast root before trusting the disclosure.  Returns the traitor's
    position, or the final position when the chain is clean (honest
    publication by the last author).
    """
    from .crypto import build_merkle

    for record in step_records:
        signer_pub = public_keys.get(record.author_id, b"")
        # disclosed surveillance material must hash to the recorded leaves
        ok_key = verify_leaf(
            signer_pub,
            record.surveillance_key,
            record.surveillance_key_leaf,
            record.surveillance_key_signature,
        )
        ok_ver = verify_leaf(
            signer_pub,
            record.surveillance_spec,
            record.surveillance_ver_leaf,
            record.surveillance_ver_signature,
        )
        tree = build_merkle(
            [
                record.own_key_leaf,
                record.surveillance_key_leaf,
                record.own_ver_leaf,
                record.surveillance_ver_leaf,
                record.info_leaf,
            ]
        )
        if not (ok_key and ok_ver and tree.root == record.broadcast.root):
            raise InconsistentHistory(record.position, record.author_id)

        honest_vote = verify_watermark(
            pirated_model, record.surveillance_key, record.surveillance_spec
        )
        verdict = _tally(community, honest_vote, {"surveillance": honest_vote})
        if not verdict.accepted:
            return record.position - 1
    return step_records[-1].position
