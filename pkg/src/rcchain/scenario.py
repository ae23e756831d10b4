"""Seeded scenario engine for the crowdsourcing mission lifecycle.

Drives vehicles, RSUs, and organizations through the full flow:
registration, on-chain request, service offers, reputation-based
candidate nomination by the following RSUs with a random final pick by
the leading RSU, on-chain service and delivery records, requester
feedback, and an on-chain reputation update. Ratings touch the
in-memory reputation ledger only when their reputation_update
transaction commits as valid, so replaying the chain reproduces the
reputation state exactly.

All randomness flows from the scenario seed through one generator
consumed in event order; identical config + seed gives byte-identical
exports.
"""

from __future__ import annotations

import heapq
import json
import os
from collections import deque
from dataclasses import dataclass, field
from random import Random
from typing import Callable, Optional

from .ioutil import csv_text, json_text, write_text_atomic
from .ledger import (
    CertificateAuthority,
    ChainLedger,
    EndorsementPolicy,
    EndorsedTransaction,
    Identity,
    OrderingConfig,
    PendingTx,
    check_policy,
    endorse,
    export_ledger_lines,
    export_world_state,
    order_batch,
    propose,
    validate_and_commit,
)
from .reputation import (
    Opinion,
    RatingEvent,
    ReputationLedger,
    ReputationMode,
    ServerCandidate,
    Status,
    TpfsParams,
    classify_status,
    final_reputation,
    select_server,
)

SECONDS_PER_MINUTE = 60.0
PROFILE_KINDS = ("honest", "malicious", "p_type", "untruthful_rater")
MISSION_KINDS = ("qa", "data_share")


class ScenarioConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BehaviorProfile:
    kind: str = "honest"
    switch_at: Optional[float] = None  # minutes; p_type flips here
    fake_rate: float = 0.0

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ScenarioConfigError(f"unknown profile kind {self.kind!r}")
        if not 0.0 <= self.fake_rate <= 1.0:
            raise ScenarioConfigError("fake_rate must be in [0,1]")
        if self.kind == "honest" and self.fake_rate != 0.0:
            raise ScenarioConfigError("honest profiles must have fake_rate 0")
        if self.kind == "p_type" and self.switch_at is None:
            raise ScenarioConfigError("p_type profiles need switch_at")

    def message_is_real(self, t_min: float, rng: Random) -> bool:
        if self.kind == "malicious":
            return rng.random() >= self.fake_rate
        if self.kind == "p_type" and t_min >= self.switch_at:
            return rng.random() >= self.fake_rate
        return True

    def rating_sign(self, honest_sign: bool, rng: Random) -> bool:
        if self.kind == "untruthful_rater" and rng.random() < self.fake_rate:
            return not honest_sign
        return honest_sign


@dataclass(frozen=True)
class OrgSpec:
    name: str
    endorsing_peers: int = 2


@dataclass(frozen=True)
class RsuSpec:
    id: str
    org: str
    area: str


@dataclass(frozen=True)
class VehicleSpec:
    id: str
    org: str
    area: str
    roles: tuple[str, ...] = ("requester", "server")
    profile: BehaviorProfile = BehaviorProfile()


@dataclass(frozen=True)
class ScriptedMission:
    t_min: float
    requester: str
    kind: str = "qa"


@dataclass(frozen=True)
class ArrivalSpec:
    kind: str = "poisson"                      # or "scripted"
    rate_per_min: float = 1.0
    missions: tuple[ScriptedMission, ...] = ()


@dataclass(frozen=True)
class ScenarioConfig:
    duration_min: float
    seed: int
    organizations: tuple[OrgSpec, ...]
    rsus: tuple[RsuSpec, ...]
    vehicles: tuple[VehicleSpec, ...]
    tpfs: TpfsParams = TpfsParams()
    ordering: OrderingConfig = field(default_factory=OrderingConfig)
    policy_orgs: tuple[str, ...] = ()          # empty = every organization
    policy_threshold: int = 1
    arrivals: ArrivalSpec = ArrivalSpec()
    mode: ReputationMode = ReputationMode.TPFS
    unreachable_peers: frozenset[str] = frozenset()


def _check_keys(doc: dict, allowed: set[str], where: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise ScenarioConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise ScenarioConfigError(f"missing key {key!r} in {where}")
    return doc[key]


def parse_scenario_config(doc: dict) -> ScenarioConfig:
    """Strict parse: unknown keys anywhere are fatal, referenced ids must
    be declared, and the seed is mandatory."""
    if not isinstance(doc, dict):
        raise ScenarioConfigError("scenario config must be a JSON object")
    _check_keys(
        doc,
        {
            "duration_min", "seed", "organizations", "rsus", "vehicles",
            "tpfs", "ordering", "policy", "arrivals", "mode", "faults",
        },
        "scenario",
    )
    duration = float(_require(doc, "duration_min", "scenario"))
    if duration <= 0:
        raise ScenarioConfigError("duration_min must be positive")
    seed = _require(doc, "seed", "scenario")
    if not isinstance(seed, int):
        raise ScenarioConfigError("seed must be an integer")

    orgs = []
    for rec in _require(doc, "organizations", "scenario"):
        _check_keys(rec, {"name", "endorsing_peers"}, "organizations[]")
        orgs.append(OrgSpec(rec["name"], int(rec.get("endorsing_peers", 2))))
    org_names = {o.name for o in orgs}
    if len(org_names) != len(orgs):
        raise ScenarioConfigError("duplicate organization names")

    rsus = []
    for rec in doc.get("rsus", []):
        _check_keys(rec, {"id", "org", "area"}, "rsus[]")
        if rec["org"] not in org_names:
            raise ScenarioConfigError(f"rsu {rec['id']!r} references unknown org")
        rsus.append(RsuSpec(rec["id"], rec["org"], rec["area"]))

    vehicles = []
    for rec in doc.get("vehicles", []):
        _check_keys(rec, {"id", "org", "area", "roles", "profile"}, "vehicles[]")
        if rec["org"] not in org_names:
            raise ScenarioConfigError(f"vehicle {rec['id']!r} references unknown org")
        prof_doc = rec.get("profile", {})
        _check_keys(prof_doc, {"kind", "switch_at", "fake_rate"}, "profile")
        kind = prof_doc.get("kind", "honest")
        profile = BehaviorProfile(
            kind=kind,
            switch_at=prof_doc.get("switch_at"),
            fake_rate=float(
                prof_doc.get("fake_rate", 1.0 if kind in ("malicious", "p_type") else 0.0)
            ),
        )
        roles = tuple(rec.get("roles", ["requester", "server"]))
        for role in roles:
            if role not in ("requester", "server", "idler"):
                raise ScenarioConfigError(f"unknown vehicle role {role!r}")
        vehicles.append(VehicleSpec(rec["id"], rec["org"], rec["area"], roles, profile))
    ids = [v.id for v in vehicles] + [r.id for r in rsus]
    if len(set(ids)) != len(ids):
        raise ScenarioConfigError("duplicate agent ids")

    tpfs_doc = doc.get("tpfs", {})
    _check_keys(
        tpfs_doc,
        {
            "t_low", "t_high", "t_service", "t_revoke", "t_trades", "q_select",
            "gamma", "eta", "theta", "simf_floor", "decay_per_minute",
            "negative_penalty", "similarity_weighting",
        },
        "tpfs",
    )
    tpfs = TpfsParams(**tpfs_doc)

    ord_doc = doc.get("ordering", {})
    _check_keys(
        ord_doc,
        {"batch_size", "batch_timeout_s", "orderer_count", "crashed_orderers"},
        "ordering",
    )
    ordering = OrderingConfig(
        batch_size=int(ord_doc.get("batch_size", 10)),
        batch_timeout_s=float(ord_doc.get("batch_timeout_s", 2.0)),
        orderer_count=int(ord_doc.get("orderer_count", 3)),
        crashed=set(ord_doc.get("crashed_orderers", [])),
    )

    pol_doc = doc.get("policy", {})
    _check_keys(pol_doc, {"required_orgs", "threshold"}, "policy")
    policy_orgs = tuple(pol_doc.get("required_orgs", []))
    for org in policy_orgs:
        if org not in org_names:
            raise ScenarioConfigError(f"policy references unknown org {org!r}")

    arr_doc = doc.get("arrivals", {"kind": "poisson", "rate_per_min": 1.0})
    _check_keys(arr_doc, {"kind", "rate_per_min", "missions"}, "arrivals")
    arr_kind = arr_doc.get("kind", "poisson")
    if arr_kind not in ("poisson", "scripted"):
        raise ScenarioConfigError(f"unknown arrival kind {arr_kind!r}")
    missions = []
    vehicle_ids = {v.id for v in vehicles}
    requester_ids = {v.id for v in vehicles if "requester" in v.roles}
    for rec in arr_doc.get("missions", []):
        _check_keys(rec, {"t_min", "requester", "kind"}, "missions[]")
        m = ScriptedMission(
            float(rec["t_min"]), rec["requester"], rec.get("kind", "qa")
        )
        if m.requester not in vehicle_ids:
            raise ScenarioConfigError(f"scripted mission references unknown vehicle {m.requester!r}")
        if m.requester not in requester_ids:
            raise ScenarioConfigError(f"vehicle {m.requester!r} cannot act as requester")
        if m.kind not in MISSION_KINDS:
            raise ScenarioConfigError(f"unknown mission kind {m.kind!r}")
        missions.append(m)
    arrivals = ArrivalSpec(
        kind=arr_kind,
        rate_per_min=float(arr_doc.get("rate_per_min", 1.0)),
        missions=tuple(sorted(missions, key=lambda m: (m.t_min, m.requester))),
    )

    mode_name = doc.get("mode", "TPFS")
    try:
        mode = ReputationMode(mode_name)
    except ValueError:
        raise ScenarioConfigError(f"unknown reputation mode {mode_name!r}") from None

    faults_doc = doc.get("faults", {})
    _check_keys(faults_doc, {"unreachable_peers"}, "faults")

    # every area with a requester-capable vehicle needs an RSU
    rsu_areas = {r.area for r in rsus}
    for v in vehicles:
        if "requester" in v.roles and v.area not in rsu_areas:
            raise ScenarioConfigError(f"area {v.area!r} has requesters but no RSU")

    return ScenarioConfig(
        duration_min=duration,
        seed=seed,
        organizations=tuple(orgs),
        rsus=tuple(rsus),
        vehicles=tuple(vehicles),
        tpfs=tpfs,
        ordering=ordering,
        policy_orgs=policy_orgs,
        policy_threshold=int(pol_doc.get("threshold", 1)),
        arrivals=arrivals,
        mode=mode,
        unreachable_peers=frozenset(faults_doc.get("unreachable_peers", [])),
    )


def load_scenario_config(path: str) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario_config(json.load(fh))


# ---------------------------------------------------------------------------
# run report
# ---------------------------------------------------------------------------

@dataclass
class MissionRecord:
    mission_id: str
    kind: str
    requester: str
    selected: Optional[str] = None
    outcome: Optional[str] = None       # completed_good / completed_bad / abandoned
    t_request_min: float = 0.0
    t_commit_min: Optional[float] = None
    candidates: tuple[str, ...] = ()


@dataclass(frozen=True)
class PerfRecord:
    tx_id: str
    t_arrive: float
    t_endorsed: float
    t_ordered: float
    t_committed: float
    valid: bool


@dataclass(frozen=True)
class TrajectoryRecord:
    time_min: float
    rater: str
    ratee: str
    mode: str
    rfin: float
    status: str


@dataclass
class RunReport:
    seed: int
    chain: ChainLedger
    reputation: ReputationLedger
    policy: EndorsementPolicy
    ca: CertificateAuthority
    missions: list[MissionRecord]
    perf: list[PerfRecord]
    trajectories: list[TrajectoryRecord]
    summary: dict

    def reputation_csv(self) -> str:
        rows = [
            (t.time_min, t.rater, t.ratee, t.mode, t.rfin, t.status)
            for t in self.trajectories
        ]
        return csv_text(["time_min", "rater", "ratee", "mode", "rfin", "status"], rows)

    def missions_csv(self) -> str:
        rows = [
            (m.mission_id, m.kind, m.requester, m.selected, m.outcome,
             m.t_request_min, m.t_commit_min)
            for m in self.missions
        ]
        return csv_text(
            ["mission_id", "kind", "requester", "selected", "outcome",
             "t_request", "t_commit"],
            rows,
        )

    def perf_csv(self) -> str:
        rows = [
            (p.tx_id, p.t_arrive, p.t_endorsed, p.t_ordered, p.t_committed, p.valid)
            for p in self.perf
        ]
        return csv_text(
            ["tx_id", "t_arrive", "t_endorsed", "t_ordered", "t_committed", "valid"],
            rows,
        )

    def write_outputs(self, out_dir: str) -> dict[str, str]:
        os.makedirs(out_dir, exist_ok=True)
        files = {
            "ledger.jsonl": "\n".join(export_ledger_lines(self.chain)) + "\n",
            "world_state.json": export_world_state(self.chain),
            "reputation.csv": self.reputation_csv(),
            "missions.csv": self.missions_csv(),
            "perf.csv": self.perf_csv(),
            "summary.json": json_text(self.summary),
        }
        paths = {}
        for name, text in files.items():
            path = os.path.join(out_dir, name)
            write_text_atomic(path, text)
            paths[name] = path
        return paths


# ---------------------------------------------------------------------------
# engine
# ---------------------------------------------------------------------------

def evaluate_pair(
    ledger: ReputationLedger,
    rater: str,
    ratee: str,
    params: TpfsParams,
    mode: ReputationMode,
    now_min: float,
) -> float:
    """Final score of rater about ratee with opinions gathered from every
    other vehicle that has rated the ratee. Pure given the ledger, so a
    chain replay reproduces it exactly."""
    opinions = [
        Opinion(
            recommender=rec,
            subject=ratee,
            r_ij=ledger.direct_score(rater, rec, now_min),
            r_jf=ledger.direct_score(rec, ratee, now_min),
        )
        for rec in sorted(ledger.raters_of(ratee))
        if rec not in (rater, ratee)
    ]
    return final_reputation(rater, ratee, ledger, opinions, params, mode, now_min)


class _Engine:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.rng = Random(cfg.seed)
        self.now = 0.0  # seconds
        self._events: list = []
        self._seq = 0
        self.ca = CertificateAuthority()
        self.chain = ChainLedger()
        self.reputation = ReputationLedger(cfg.tpfs)
        required = tuple(cfg.policy_orgs) or tuple(o.name for o in cfg.organizations)
        self.policy = EndorsementPolicy(frozenset(required), cfg.policy_threshold)
        self.peers: list[Identity] = []
        self.clients: dict[str, Identity] = {}
        self.vehicle_by_id: dict[str, VehicleSpec] = {v.id: v for v in cfg.vehicles}
        self.pending: deque[PendingTx] = deque()
        self._nonce = 0
        self._rep_seq = 0
        self._tx_meta: dict[str, tuple] = {}
        self.missions: list[MissionRecord] = []
        self.perf: list[PerfRecord] = []
        self.trajectories: list[TrajectoryRecord] = []
        self._register_all()

    # -- registration (lifecycle step 1) --

    def _register_all(self):
        for org in self.cfg.organizations:
            for k in range(org.endorsing_peers):
                self.peers.append(
                    self.ca.register(org.name, "endorsing_peer", f"{org.name}/peer{k}")
                )
        for rsu in self.cfg.rsus:
            self.ca.register(rsu.org, "orderer", rsu.id)
        for v in self.cfg.vehicles:
            self.clients[v.id] = self.ca.register(v.org, "client", v.id)

    # -- event loop --

    def schedule(self, t: float, fn: Callable[[], None]):
        heapq.heappush(self._events, (t, self._seq, fn))
        self._seq += 1

    def run(self):
        self._generate_missions()
        while self._events:
            t, _, fn = heapq.heappop(self._events)
            self.now = max(self.now, t)
            fn()

    def _generate_missions(self):
        arr = self.cfg.arrivals
        requesters = sorted(
            v.id for v in self.cfg.vehicles if "requester" in v.roles
        )
        if arr.kind == "scripted":
            for m in arr.missions:
                self.schedule(
                    m.t_min * SECONDS_PER_MINUTE,
                    lambda m=m: self._start_mission(m.requester, m.kind),
                )
            return
        if not requesters or arr.rate_per_min <= 0:
            return
        t_min = 0.0
        while True:
            t_min += self.rng.expovariate(arr.rate_per_min)
            if t_min >= self.cfg.duration_min:
                break
            self.schedule(
                t_min * SECONDS_PER_MINUTE,
                lambda: self._start_mission(None, None),
            )

    # -- transaction submission --

    def _submit(self, kind: str, state_key: str, state_value: str, client: Identity,
                on_commit: Callable[[bool, float], None]):
        self._nonce += 1
        payload = json.dumps(
            {"state_key": state_key, "state_value": state_value},
            sort_keys=True, separators=(",", ":"),
        ).encode()
        t_arrive = self.now
        endorse_delay = self.rng.expovariate(150.0)
        prop = propose(kind, payload, client, t_arrive, self._nonce)

        def do_endorse(attempt=1):
            tx = endorse(prop, self.policy, self.peers, self.chain.world_state,
                         unreachable=self.cfg.unreachable_peers)
            if not check_policy(tx, self.policy):
                if attempt == 1:  # client resubmits once
                    self.schedule(self.now + 0.05, lambda: do_endorse(attempt=2))
                else:
                    on_commit(False, self.now)
                return
            self.pending.append(PendingTx(self.now, tx))
            self._tx_meta[tx.tx_id] = (t_arrive, self.now, on_commit)
            self._check_cut()
            # microsecond of slack so float roundoff cannot undershoot the
            # timeout comparison in order_batch
            self.schedule(
                self.now + self.cfg.ordering.batch_timeout_s + 1e-6, self._check_cut
            )

        self.schedule(t_arrive + endorse_delay, do_endorse)

    def _check_cut(self):
        while True:
            batch = order_batch(self.pending, self.cfg.ordering, self.now)
            if batch is None:
                return
            self._commit_batch(batch)

    def _commit_batch(self, batch: list[EndorsedTransaction]):
        t_ordered = self.now
        commit_delay = self.rng.expovariate(150.0)
        t_committed = t_ordered + commit_delay
        report = validate_and_commit(self.chain.next_proposal(batch), self.chain, self.policy)
        for tx_id, valid, _reason in report.results:
            t_arrive, t_endorsed, on_commit = self._tx_meta.pop(tx_id)
            self.perf.append(
                PerfRecord(tx_id, t_arrive, t_endorsed, t_ordered, t_committed, valid)
            )
            self.schedule(t_committed, lambda v=valid, cb=on_commit: cb(v, t_committed))

    # -- mission lifecycle --

    def _start_mission(self, requester: Optional[str], kind: Optional[str]):
        eligible = sorted(
            v.id
            for v in self.cfg.vehicles
            if "requester" in v.roles
            and self.reputation.get_status(v.id) is not Status.REVOKED
        )
        if requester is None:
            if not eligible:
                return
            requester = eligible[self.rng.randrange(len(eligible))]
        elif self.reputation.get_status(requester) is Status.REVOKED:
            return
        if kind is None:
            kind = MISSION_KINDS[self.rng.randrange(len(MISSION_KINDS))]
        mission = MissionRecord(
            mission_id=f"m{len(self.missions):05d}",
            kind=kind,
            requester=requester,
            t_request_min=self.now / SECONDS_PER_MINUTE,
        )
        self.missions.append(mission)
        self._submit(
            "qa_request",
            f"mission/{mission.mission_id}",
            json.dumps({"requester": requester, "kind": kind}, sort_keys=True,
                       separators=(",", ":")),
            self.clients[requester],
            lambda valid, t: self._request_committed(mission, valid),
        )

    def _request_committed(self, mission: MissionRecord, valid: bool):
        if not valid:
            mission.outcome = "abandoned"
            return
        requester_area = self.vehicle_by_id[mission.requester].area
        candidates = [
            v.id
            for v in self.cfg.vehicles
            if "server" in v.roles
            and v.id != mission.requester
            and v.area == requester_area
            and self.reputation.get_status(v.id) is not Status.REVOKED
        ]
        if not candidates:
            mission.outcome = "abandoned"
            return
        mission.candidates = tuple(sorted(candidates))
        now_min = self.now / SECONDS_PER_MINUTE
        scored = [
            ServerCandidate(
                vehicle=c,
                rfin=evaluate_pair(
                    self.reputation, mission.requester, c, self.cfg.tpfs,
                    self.cfg.mode, now_min,
                ),
                trade_count=self.reputation.trade_count.get(c, 0),
            )
            for c in mission.candidates
        ]
        area_rsus = sorted(r.id for r in self.cfg.rsus if r.area == requester_area)
        followers = area_rsus[1:] or area_rsus[:1]
        nominations = [
            select_server(scored, self.cfg.tpfs, self.rng) for _ in followers
        ]
        selected = nominations[self.rng.randrange(len(nominations))]
        mission.selected = selected
        self._submit(
            "service_proposal",
            f"service/{mission.mission_id}",
            selected,
            self.clients[selected],
            lambda valid, t: self._service_committed(mission, valid),
        )

    def _service_committed(self, mission: MissionRecord, valid: bool):
        if not valid:
            mission.outcome = "abandoned"
            return
        server = self.vehicle_by_id[mission.selected]
        real = server.profile.message_is_real(self.now / SECONDS_PER_MINUTE, self.rng)
        kind = "service_process" if mission.kind == "qa" else "data_index"
        key_prefix = "proc" if mission.kind == "qa" else "index"
        self._submit(
            kind,
            f"{key_prefix}/{mission.mission_id}",
            "delivered",
            self.clients[mission.selected],
            lambda valid, t: self._delivery_committed(mission, real, valid),
        )

    def _delivery_committed(self, mission: MissionRecord, real: bool, valid: bool):
        if not valid:
            mission.outcome = "abandoned"
            return
        mission.outcome = "completed_good" if real else "completed_bad"
        requester = self.vehicle_by_id[mission.requester]
        sign = requester.profile.rating_sign(real, self.rng)
        self._rep_seq += 1
        rating = {
            "rater": mission.requester,
            "ratee": mission.selected,
            "positive": sign,
            "t_min": self.now / SECONDS_PER_MINUTE,
        }
        self._submit(
            "reputation_update",
            f"rep/{mission.requester}/{mission.selected}/{self._rep_seq}",
            json.dumps(rating, sort_keys=True, separators=(",", ":")),
            self.clients[mission.requester],
            lambda valid, t: self._reputation_committed(mission, rating, valid, t),
        )

    def _reputation_committed(self, mission: MissionRecord, rating: dict,
                              valid: bool, t_committed: float):
        if not valid:
            return
        # score at the rating's own timestamp: the chain carries it, so a
        # replay derives bit-identical reputation state
        apply_reputation_update(
            self.reputation, rating, float(rating["t_min"]), self.cfg.tpfs,
            self.cfg.mode, self.trajectories,
        )
        ratee = rating["ratee"]
        if self.reputation.get_status(ratee) is Status.REVOKED:
            self.ca.revoke(ratee)  # certificate out, re-registration barred
        mission.t_commit_min = t_committed / SECONDS_PER_MINUTE


def apply_reputation_update(
    ledger: ReputationLedger,
    rating: dict,
    now_min: float,
    params: TpfsParams,
    mode: ReputationMode,
    trajectories: Optional[list] = None,
) -> float:
    """Record a committed rating, bump the server's trade count, refresh
    the final score, and step the status machine. Shared verbatim by the
    live engine and the chain replay so both derive identical state."""
    event = RatingEvent(
        rater=rating["rater"],
        ratee=rating["ratee"],
        positive=bool(rating["positive"]),
        timestamp=float(rating["t_min"]),
    )
    ledger.record_rating(event, now=now_min)
    ledger.record_trade(event.ratee)
    rfin = evaluate_pair(ledger, event.rater, event.ratee, params, mode, now_min)
    status = classify_status(event.ratee, rfin, ledger, params)
    if trajectories is not None:
        trajectories.append(
            TrajectoryRecord(
                time_min=now_min,
                rater=event.rater,
                ratee=event.ratee,
                mode=mode.value,
                rfin=rfin,
                status=status.value,
            )
        )
    return rfin


def reputation_from_chain(
    chain: ChainLedger, params: TpfsParams, mode: ReputationMode = ReputationMode.TPFS
) -> ReputationLedger:
    """Rebuild the reputation ledger from the committed valid
    reputation_update transactions alone."""
    ledger = ReputationLedger(params)
    for blk in chain.blocks:
        for tx, (valid, _reason) in zip(blk.txs, blk.validity):
            if not valid or tx.kind != "reputation_update":
                continue
            doc = json.loads(tx.proposal.payload.decode())
            rating = json.loads(doc["state_value"])
            apply_reputation_update(ledger, rating, float(rating["t_min"]), params, mode)
    return ledger


def run_scenario(cfg: ScenarioConfig) -> RunReport:
    engine = _Engine(cfg)
    engine.run()
    missions = engine.missions
    for m in missions:
        if m.outcome is None:  # still in flight when the run drained (e.g. stalled ordering)
            m.outcome = "abandoned"
    outcomes = [m.outcome for m in missions]
    summary = {
        "seed": cfg.seed,
        "duration_min": cfg.duration_min,
        "mode": cfg.mode.value,
        "missions_total": len(missions),
        "completed_good": outcomes.count("completed_good"),
        "completed_bad": outcomes.count("completed_bad"),
        "abandoned": outcomes.count("abandoned"),
        "blocks": engine.chain.tip.number,
        "transactions": len(engine.chain.tx_log),
        "valid_transactions": sum(1 for e in engine.chain.tx_log if e.valid),
        "revoked_vehicles": sorted(
            v for v, s in engine.reputation.status.items() if s is Status.REVOKED
        ),
    }
    return RunReport(
        seed=cfg.seed,
        chain=engine.chain,
        reputation=engine.reputation,
        policy=engine.policy,
        ca=engine.ca,
        missions=missions,
        perf=engine.perf,
        trajectories=engine.trajectories,
        summary=summary,
    )
