"""Simulated execute-order-validate transaction pipeline.

Identities come from a certificate authority that never re-admits a
revoked registration. Endorsing peers simulate chaincode execution
deterministically and sign the result; the ordering service cuts blocks
by batch size or timeout while a majority of orderers is up; committing
peers re-check policy, duplicates, and read-set versions (the MVCC
check that kills double spends), apply valid writes to the world state,
and append every transaction to the log regardless of legality.

Signatures are HMAC tags keyed by each identity's key tag; transaction
ids are content digests, so the tx-id-only body hash still pins every
payload byte. Hashing is bit-exact: header = SHA-256(number as 8-byte
big-endian || prev_hash || body_hash), body = SHA-256 of the
concatenated tx ids, genesis prev_hash = 32 zero bytes.
"""

from __future__ import annotations

import hashlib
import hmac
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

ZERO_HASH = bytes(32)

ROLES = frozenset(
    {"client", "endorsing_peer", "committing_peer", "leading_peer", "orderer", "ca"}
)

TX_KINDS = frozenset(
    {
        "qa_request",
        "service_offer",
        "service_proposal",
        "service_process",
        "feedback",
        "reputation_update",
        "data_index",
    }
)


class IntegrityError(Exception):
    """Ledger content fails hash or replay verification."""


class BlockRejected(Exception):
    """Candidate block does not extend the current tip."""


@dataclass(frozen=True)
class Identity:
    id: str
    org: str
    role: str
    key_tag: str  # hex; the HMAC signing key


def sign(identity: Identity, message: bytes) -> str:
    return hmac.new(bytes.fromhex(identity.key_tag), message, "sha256").hexdigest()


def verify_sig(identity: Identity, message: bytes, sig: str) -> bool:
    return hmac.compare_digest(sign(identity, message), sig)


class CertificateAuthority:
    """Issues identities bound to registration info; revocation is final."""

    def __init__(self, secret: bytes = b"rcchain-ca"):
        self._secret = secret
        self._issued: dict[str, Identity] = {}
        self._revoked: set[str] = set()

    def register(self, org: str, role: str, registration_info: str) -> Identity:
        if role not in ROLES:
            raise ValueError(f"unknown role {role!r}")
        if not registration_info:
            raise ValueError("registration info must be nonempty")
        if registration_info in self._revoked:
            raise ValueError(f"registration {registration_info!r} was revoked")
        if registration_info in self._issued:
            raise ValueError(f"registration {registration_info!r} already bound")
        key_tag = hmac.new(
            self._secret, f"{org}|{role}|{registration_info}".encode(), "sha256"
        ).hexdigest()
        ident = Identity(id=registration_info, org=org, role=role, key_tag=key_tag)
        self._issued[registration_info] = ident
        return ident

    def revoke(self, registration_info: str) -> None:
        self._revoked.add(registration_info)
        self._issued.pop(registration_info, None)

    def lookup(self, registration_info: str) -> Optional[Identity]:
        return self._issued.get(registration_info)


@dataclass(frozen=True)
class EndorsementPolicy:
    required_orgs: frozenset[str]
    threshold: int = 1

    def __post_init__(self):
        if self.threshold < 1:
            raise ValueError("policy threshold must be >= 1")
        if not self.required_orgs:
            raise ValueError("policy needs at least one required org")


def _tx_digest(kind: str, payload: bytes, client_id: str, created_at: float, nonce: int) -> str:
    h = hashlib.sha256()
    for part in (kind.encode(), payload, client_id.encode(),
                 repr(float(created_at)).encode(), str(nonce).encode()):
        h.update(len(part).to_bytes(4, "big"))
        h.update(part)
    return h.hexdigest()


@dataclass(frozen=True)
class TransactionProposal:
    tx_id: str
    kind: str
    payload: bytes
    client: Identity
    created_at: float
    nonce: int
    client_sig: str

    def digest_ok(self) -> bool:
        return self.tx_id == _tx_digest(
            self.kind, self.payload, self.client.id, self.created_at, self.nonce
        )


def propose(
    kind: str, payload: bytes, client: Identity, created_at: float, nonce: int = 0
) -> TransactionProposal:
    if kind not in TX_KINDS:
        raise ValueError(f"unknown transaction kind {kind!r}")
    tx_id = _tx_digest(kind, payload, client.id, created_at, nonce)
    return TransactionProposal(
        tx_id=tx_id,
        kind=kind,
        payload=payload,
        client=client,
        created_at=created_at,
        nonce=nonce,
        client_sig=sign(client, tx_id.encode()),
    )


@dataclass(frozen=True)
class Endorsement:
    tx_id: str
    endorser: Identity
    result_hash: str
    sig: str


@dataclass(frozen=True)
class EndorsedTransaction:
    proposal: TransactionProposal
    read_set: tuple[tuple[str, int], ...]
    write_set: tuple[tuple[str, str], ...]
    endorsements: tuple[Endorsement, ...]

    @property
    def tx_id(self) -> str:
        return self.proposal.tx_id

    @property
    def kind(self) -> str:
        return self.proposal.kind


def simulate_execution(
    kind: str, payload: bytes, world_state: dict[str, tuple[str, int]]
) -> tuple[tuple[tuple[str, int], ...], tuple[tuple[str, str], ...]]:
    """Deterministic chaincode stand-in: read-modify-write of the payload's
    state key against the current world-state version."""
    doc = json.loads(payload.decode())
    key = doc["state_key"]
    value = doc["state_value"]
    if not isinstance(key, str) or not isinstance(value, str):
        raise ValueError("state_key and state_value must be strings")
    _, version = world_state.get(key, ("", 0))
    return ((key, version),), ((key, value),)


def _result_hash(read_set, write_set) -> str:
    canon = json.dumps({"reads": list(read_set), "writes": list(write_set)},
                       sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def endorse(
    proposal: TransactionProposal,
    policy: Optional[EndorsementPolicy],
    peers: Iterable[Identity],
    world_state: dict[str, tuple[str, int]],
    unreachable: frozenset[str] = frozenset(),
) -> EndorsedTransaction:
    """Collect endorsements from every reachable endorsing peer of the
    policy's required orgs (all given peers when policy is None).

    Unreachable peers contribute nothing (execution timeout); whether
    the result satisfies the policy is the caller's check_policy call —
    an unsatisfied result means "resubmit", not an exception.
    """
    if not proposal.digest_ok():
        raise ValueError("proposal content does not match its tx id")
    read_set, write_set = simulate_execution(proposal.kind, proposal.payload, world_state)
    rh = _result_hash(read_set, write_set)
    endorsements = []
    for peer in peers:
        if peer.role != "endorsing_peer":
            raise ValueError(f"{peer.id} is not an endorsing peer")
        if policy is not None and peer.org not in policy.required_orgs:
            continue
        if peer.id in unreachable:
            continue
        msg = (proposal.tx_id + rh).encode()
        endorsements.append(
            Endorsement(tx_id=proposal.tx_id, endorser=peer, result_hash=rh,
                        sig=sign(peer, msg))
        )
    return EndorsedTransaction(
        proposal=proposal,
        read_set=read_set,
        write_set=write_set,
        endorsements=tuple(endorsements),
    )


def check_policy(tx: EndorsedTransaction, policy: EndorsementPolicy) -> bool:
    counts: dict[str, int] = {}
    for e in tx.endorsements:
        if e.result_hash != _result_hash(tx.read_set, tx.write_set):
            continue
        if not verify_sig(e.endorser, (e.tx_id + e.result_hash).encode(), e.sig):
            continue
        counts[e.endorser.org] = counts.get(e.endorser.org, 0) + 1
    return all(counts.get(org, 0) >= policy.threshold for org in policy.required_orgs)


# ---------------------------------------------------------------------------
# ordering
# ---------------------------------------------------------------------------

@dataclass
class OrderingConfig:
    batch_size: int = 10
    batch_timeout_s: float = 2.0
    orderer_count: int = 3
    crashed: set[str] = field(default_factory=set)

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.orderer_count < 1:
            raise ValueError("orderer_count must be >= 1")

    def majority_up(self) -> bool:
        up = self.orderer_count - len(self.crashed)
        return 2 * up > self.orderer_count


@dataclass(frozen=True)
class PendingTx:
    submitted_at: float
    tx: EndorsedTransaction


def order_batch(
    pending: deque[PendingTx], cfg: OrderingConfig, now: float
) -> Optional[list[EndorsedTransaction]]:
    """Cut a batch: exactly batch_size oldest when over-full, everything
    pending when the oldest has waited past the timeout, else nothing.
    Stalls (returns None, queue untouched) without an orderer majority."""
    if not cfg.majority_up() or not pending:
        return None
    if len(pending) >= cfg.batch_size:
        return [pending.popleft().tx for _ in range(cfg.batch_size)]
    if now - pending[0].submitted_at >= cfg.batch_timeout_s:
        return [pending.popleft().tx for _ in range(len(pending))]
    return None


# ---------------------------------------------------------------------------
# blocks and the chain ledger
# ---------------------------------------------------------------------------

def body_hash(txs: Iterable[EndorsedTransaction]) -> bytes:
    return hashlib.sha256(b"".join(tx.tx_id.encode() for tx in txs)).digest()


def header_hash(number: int, prev_hash: bytes, body: bytes) -> bytes:
    return hashlib.sha256(number.to_bytes(8, "big") + prev_hash + body).digest()


@dataclass(frozen=True)
class BlockProposal:
    number: int
    prev_hash: bytes
    txs: tuple[EndorsedTransaction, ...]


@dataclass(frozen=True)
class Block:
    number: int
    prev_hash: bytes
    txs: tuple[EndorsedTransaction, ...]
    body_hash: bytes
    validity: tuple[tuple[bool, Optional[str]], ...]

    def header(self) -> bytes:
        return header_hash(self.number, self.prev_hash, self.body_hash)


@dataclass(frozen=True)
class TxLogEntry:
    tx_id: str
    kind: str
    block_number: int
    valid: bool
    reason: Optional[str]


@dataclass(frozen=True)
class CommitReport:
    block_number: int
    results: tuple[tuple[str, bool, Optional[str]], ...]  # (tx_id, valid, reason)

    @property
    def valid_count(self) -> int:
        return sum(1 for _, ok, _ in self.results if ok)


class ChainLedger:
    """Hash-chained blocks plus the versioned world state and the
    append-only transaction log."""

    def __init__(self):
        genesis = Block(0, ZERO_HASH, (), body_hash(()), ())
        self.blocks: list[Block] = [genesis]
        self.world_state: dict[str, tuple[str, int]] = {}
        self.tx_log: list[TxLogEntry] = []
        self._seen_tx_ids: set[str] = set()

    @property
    def tip(self) -> Block:
        return self.blocks[-1]

    def next_proposal(self, txs: Iterable[EndorsedTransaction]) -> BlockProposal:
        return BlockProposal(self.tip.number + 1, self.tip.header(), tuple(txs))

    def has_tx(self, tx_id: str) -> bool:
        return tx_id in self._seen_tx_ids


def _validate_tx(
    tx: EndorsedTransaction,
    policy: EndorsementPolicy,
    world_state,
    seen: set[str],
) -> Optional[str]:
    """Reason the transaction is invalid, or None. Check order: structure,
    signatures/policy, duplicate, read-set versions."""
    if not tx.proposal.digest_ok():
        return "structure"
    if not verify_sig(tx.proposal.client, tx.proposal.tx_id.encode(), tx.proposal.client_sig):
        return "signature"
    if not tx.endorsements or not check_policy(tx, policy):
        return "policy"
    if tx.tx_id in seen:
        return "duplicate"
    for key, version in tx.read_set:
        if world_state.get(key, ("", 0))[1] != version:
            return "mvcc_conflict"
    return None


def validate_and_commit(
    candidate: BlockProposal, ledger: ChainLedger, policy: EndorsementPolicy
) -> CommitReport:
    """Validate every transaction in order, apply valid write sets, append
    all of them to the log, and seal the block onto the chain."""
    if candidate.number != ledger.tip.number + 1:
        raise BlockRejected(
            f"expected block {ledger.tip.number + 1}, got {candidate.number}"
        )
    if candidate.prev_hash != ledger.tip.header():
        raise BlockRejected(f"block {candidate.number} does not link to the tip")
    results = []
    for tx in candidate.txs:
        reason = _validate_tx(tx, policy, ledger.world_state, ledger._seen_tx_ids)
        valid = reason is None
        if valid:
            for key, value in tx.write_set:
                _, version = ledger.world_state.get(key, ("", 0))
                ledger.world_state[key] = (value, version + 1)
        ledger._seen_tx_ids.add(tx.tx_id)
        ledger.tx_log.append(
            TxLogEntry(tx.tx_id, tx.kind, candidate.number, valid, reason)
        )
        results.append((tx.tx_id, valid, reason))
    block = Block(
        number=candidate.number,
        prev_hash=candidate.prev_hash,
        txs=candidate.txs,
        body_hash=body_hash(candidate.txs),
        validity=tuple((ok, reason) for _, ok, reason in results),
    )
    ledger.blocks.append(block)
    return CommitReport(candidate.number, tuple(results))


def sync_peer(lagging: ChainLedger, source: ChainLedger, policy: EndorsementPolicy) -> None:
    """Replay the source's missing blocks onto the lagging ledger.

    The shared prefix must match hash-for-hash and every replayed block
    must re-validate to the flags the source recorded; divergence is an
    integrity error, never silently repaired.
    """
    if lagging.tip.number > source.tip.number:
        raise IntegrityError("lagging ledger is ahead of the source")
    for k in range(lagging.tip.number + 1):
        if lagging.blocks[k].header() != source.blocks[k].header():
            raise IntegrityError(f"divergent prefix at block {k}")
    for k in range(lagging.tip.number + 1, source.tip.number + 1):
        blk = source.blocks[k]
        for tx in blk.txs:
            if not tx.proposal.digest_ok():
                raise IntegrityError(f"block {k} carries a tampered transaction")
        report = validate_and_commit(
            BlockProposal(blk.number, blk.prev_hash, blk.txs), lagging, policy
        )
        replay_flags = tuple((ok, reason) for _, ok, reason in report.results)
        if replay_flags != blk.validity or lagging.tip.header() != blk.header():
            raise IntegrityError(f"replay of block {k} does not match the source")


def verify_chain(ledger: ChainLedger, policy: Optional[EndorsementPolicy] = None) -> Optional[int]:
    """Full audit: link hashes, content digests, and (with a policy) a
    replay of the validity flags and world state from genesis. Returns
    None when clean, else the first bad block number."""
    g = ledger.blocks[0]
    if g.number != 0 or g.prev_hash != ZERO_HASH or g.body_hash != body_hash(g.txs):
        return 0
    scratch: Optional[ChainLedger] = ChainLedger() if policy is not None else None
    for k in range(1, len(ledger.blocks)):
        blk = ledger.blocks[k]
        prev = ledger.blocks[k - 1]
        if blk.number != prev.number + 1:
            return k
        if blk.prev_hash != prev.header():
            return k
        if blk.body_hash != body_hash(blk.txs):
            return k
        if any(not tx.proposal.digest_ok() for tx in blk.txs):
            return k
        if scratch is not None:
            try:
                report = validate_and_commit(
                    BlockProposal(blk.number, blk.prev_hash, blk.txs), scratch, policy
                )
            except BlockRejected:
                return k
            if tuple((ok, r) for _, ok, r in report.results) != blk.validity:
                return k
    if scratch is not None and scratch.world_state != ledger.world_state:
        return ledger.tip.number
    return None


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------

def export_ledger_lines(ledger: ChainLedger) -> list[str]:
    """One canonical-JSON record per block, in block order."""
    lines = []
    for blk in ledger.blocks:
        record = {
            "number": blk.number,
            "prev_hash": blk.prev_hash.hex(),
            "body_hash": blk.body_hash.hex(),
            "txs": [
                {"tx_id": tx.tx_id, "kind": tx.kind, "valid": ok, "reason": reason}
                for tx, (ok, reason) in zip(blk.txs, blk.validity)
            ],
        }
        lines.append(json.dumps(record, sort_keys=True, separators=(",", ":")))
    return lines


def export_world_state(ledger: ChainLedger) -> str:
    doc = {
        key: {"value": value, "version": version}
        for key, (value, version) in sorted(ledger.world_state.items())
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def verify_export_lines(lines: Iterable[str]) -> Optional[int]:
    """Hash-chain audit of an exported ledger file; the export is
    self-verifiable because the body hash covers the tx ids. Returns
    None when clean, else the first bad block number."""
    prev_header: Optional[bytes] = None
    expected_number = 0
    for line in lines:
        record = json.loads(line)
        number = record["number"]
        prev_hash = bytes.fromhex(record["prev_hash"])
        stated_body = bytes.fromhex(record["body_hash"])
        if number != expected_number:
            return number
        if prev_header is None:
            if prev_hash != ZERO_HASH:
                return number
        elif prev_hash != prev_header:
            return number
        recomputed = hashlib.sha256(
            b"".join(tx["tx_id"].encode() for tx in record["txs"])
        ).digest()
        if recomputed != stated_body:
            return number
        prev_header = header_hash(number, prev_hash, stated_body)
        expected_number += 1
    if expected_number == 0:
        raise ValueError("empty ledger export")
    return None
