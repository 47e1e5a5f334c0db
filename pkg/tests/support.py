"""Shared test machinery: random mutation scripts, mode runners and brute-force oracles."""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field

from fastapi.testclient import TestClient

from casefs.errors import RepositoryError
from casefs.events import CaseFileItemEvent, attach_push
from casefs.models import CaseFileItemDecl, CaseFileItemDefinitionDecl, CaseModel, PropertyDecl
from casefs.repo import Repository
from casefs.repo.types import Ace, ChangeType, ContentStream
from casefs.wire import ChangePoller, RemoteRepository, create_app

DOC_NAMES = ["report", "claim.pdf", "photo", "memo"]
FOLDER_NAMES = ["inbox", "archive", "inbox"]


@dataclass
class Op:
    method: str
    args: tuple = ()
    kwargs: dict = field(default_factory=dict)
    outcome: str | None = None  # error code seen when generated, None for success

    def apply(self, repo):
        return getattr(repo, self.method)(*self.args, **self.kwargs)


def _try(repo, op: Op) -> Op:
    try:
        op.apply(repo)
    except RepositoryError as exc:
        op.outcome = exc.code
    return op


def _live(repo, predicate=lambda r: True):
    return [r for r in repo.objects() if predicate(r)]


def random_script(seed: int, n_ops: int = 24) -> list[Op]:
    """Generate a script by driving a scratch repository; outcomes are recorded per op."""
    rng = random.Random(seed)
    repo = Repository()
    ops: list[Op] = []
    for k in range(rng.randint(1, 2)):
        ops.append(_try(repo, Op("create_object", ("cmis:folder", f"case {seed}-{k}"))))
    kinds = ["doc", "doc", "doc", "folder", "rel", "update", "content", "file", "unfile", "acl", "checkin", "checkin", "delete", "delete"]
    while len(ops) < n_ops:
        kind = rng.choice(kinds)
        op = _pick(rng, repo, kind)
        if op is not None:
            ops.append(_try(repo, op))
    return ops


def _pick(rng: random.Random, repo: Repository, kind: str) -> Op | None:
    folders = _live(repo, lambda r: r.is_folder)
    docs = _live(repo, lambda r: r.base_type.value == "cmis:document")
    if not folders:
        return Op("create_object", ("cmis:folder", f"case {rng.randint(0, 10**6)}"))
    if kind == "doc":
        content = ContentStream.of(rng.randbytes(rng.randint(0, 8)), "application/octet-stream") if rng.random() < 0.5 else None
        props = {"cmis:description": f"d{rng.randint(0, 9)}"} if rng.random() < 0.5 else {}
        return Op("create_object", ("cmis:document", rng.choice(DOC_NAMES), props), {"parent_id": rng.choice(folders).object_id, "content": content})
    if kind == "folder":
        return Op("create_object", ("cmis:folder", rng.choice(FOLDER_NAMES)), {"parent_id": rng.choice(folders).object_id})
    if kind == "rel":
        ends = _live(repo, lambda r: not r.is_relationship)
        if len(ends) < 2:
            return None
        src, dst = rng.sample(ends, 2)
        return Op("create_object", ("cmis:relationship", "refers"), {"source_id": src.object_id, "target_id": dst.object_id})
    everything = _live(repo)
    if kind == "update" and everything:
        value = None if rng.random() < 0.2 else f"u{rng.randint(0, 99)}"
        return Op("update_properties", (rng.choice(everything).object_id, {"cmis:description": value}))
    if kind == "acl" and everything:
        return Op("apply_acl", (rng.choice(everything).object_id, [Ace(f"user{rng.randint(0, 3)}", frozenset({"read"}))]))
    if not docs:
        return None
    doc = rng.choice(docs)
    if kind == "content":
        content = ContentStream.of(rng.randbytes(4), "text/plain") if rng.random() < 0.8 else None
        return Op("set_content_stream", (doc.object_id, content))
    if kind == "file":
        return Op("file_in", (doc.object_id, rng.choice(folders).object_id))
    if kind == "unfile" and doc.parent_ids:
        return Op("unfile", (doc.object_id, rng.choice(doc.parent_ids)))
    if kind == "checkin":
        content = ContentStream.of(rng.randbytes(3), "text/plain") if rng.random() < 0.5 else None
        patch = {"cmis:description": f"v{rng.randint(0, 9)}"} if rng.random() < 0.5 else None
        return Op("checkin", (doc.object_id,), {"content": content, "patch": patch})
    if kind == "delete":
        pool = everything if rng.random() < 0.4 else docs
        return Op("delete_object", (rng.choice(pool).object_id,))
    return None


def run_script(repo, ops: list[Op]) -> list[str | None]:
    outcomes = []
    for op in ops:
        try:
            op.apply(repo)
            outcomes.append(None)
        except RepositoryError as exc:
            outcomes.append(exc.code)
    return outcomes


@dataclass
class ModeRun:
    repo: Repository
    events: list[CaseFileItemEvent]
    outcomes: list[str | None]
    remote: RemoteRepository | None = None


def run_embedded(ops: list[Op]) -> ModeRun:
    repo = Repository()
    events: list[CaseFileItemEvent] = []
    attach_push(repo, events.append)
    return ModeRun(repo, events, run_script(repo, ops))


class WireHarness:
    """One app and test client, reused across runs by swapping the served repository."""

    def __init__(self):
        self.app = create_app(Repository())
        # entering the client keeps one event loop for all requests instead of one per call
        self.client = TestClient(self.app).__enter__()

    def fresh(self) -> tuple[Repository, RemoteRepository]:
        repo = Repository()
        self.app.state.repo = repo
        return repo, RemoteRepository(self.client)


_harness: WireHarness | None = None


def wire_harness() -> WireHarness:
    global _harness
    if _harness is None:
        _harness = WireHarness()
    return _harness


def run_integration(ops: list[Op], checkpoint, restart_at: int | None = None, batch_size: int = 4) -> ModeRun:
    """Run ``ops`` over the wire; a first poller handles one partial batch at
    ``restart_at`` and is discarded, a second resumes from its checkpoint."""
    server_repo, remote = wire_harness().fresh()
    events: list[CaseFileItemEvent] = []
    restart_at = len(ops) // 2 if restart_at is None else restart_at
    outcomes = run_script(remote, ops[:restart_at])
    first = ChangePoller(remote, events.append, batch_size=batch_size, checkpoint_path=checkpoint)
    first.run_once()
    del first
    outcomes += run_script(remote, ops[restart_at:])
    second = ChangePoller(remote, events.append, batch_size=batch_size, checkpoint_path=checkpoint)
    second.drain()
    return ModeRun(server_repo, events, outcomes, remote)


def kind_multiset(events) -> Counter:
    return Counter((e.item_object_id, e.kind.value) for e in events)


def snapshot(repo, include_old_versions: bool = False) -> list[dict]:
    """Object set without timestamps, with content bytes fetched per object."""
    drop = {"creationDate", "lastModificationDate"}
    out = []
    for r in repo.objects(include_old_versions):
        row = {k: v for k, v in r.to_json(with_content=False).items() if k not in drop}
        stream = repo.get_content_stream(r.object_id) if r.base_type.value == "cmis:document" else None
        row["content"] = None if stream is None else stream.data.hex()
        out.append(row)
    return sorted(out, key=lambda d: d["objectId"])


def change_log(repo) -> list[dict]:
    batch, _ = repo.get_content_changes(0, 10**9)
    return [{k: v for k, v in c.to_json().items() if k != "timestamp"} for c in batch]


# -- brute-force navigation oracle -------------------------------------------


class NavOracle:
    """Full scans over the object table and change log; no shared code with CaseFile."""

    def __init__(self, repo: Repository, case_id: str, objects: dict | None = None, log: list[dict] | None = None):
        """``objects``/``log`` let many oracles share one full scan of a large store."""
        self.case_id = case_id
        if objects is None:
            objects = {r.object_id: r for r in repo.objects(include_old_versions=True)}
            objects[case_id] = repo.get_object(case_id)
        self.objects = objects
        created = {}
        for c in change_log(repo) if log is None else log:
            if c["changeType"] == ChangeType.CREATED.value:
                created.setdefault(c["objectId"], c["token"])
        self.created_token = created

    def _latest_of_series(self, series):
        return next(r for r in self.objects.values() if r.version_series_id == series and r.is_latest_version)

    def _reachable(self, rec) -> bool:
        frontier, seen = list(rec.parent_ids), set()
        while frontier:
            pid = frontier.pop()
            if pid == self.case_id:
                return True
            if pid in seen or pid not in self.objects:
                continue
            seen.add(pid)
            frontier.extend(self.objects[pid].parent_ids)
        return False

    def items(self):
        if not hasattr(self, "_items"):
            self._items = [
                r for r in self.objects.values()
                if r.is_latest_version and not r.is_relationship and r.object_id != self.case_id and self._reachable(r)
            ]
        return self._items

    def resolve(self, name):
        hits = sorted((r for r in self.items() if r.name == name), key=lambda r: r.case_index)
        return hits[0].object_id if hits else None

    def resolve_at(self, name, index):
        hits = [r.object_id for r in self.items() if r.name == name and r.case_index == index]
        assert len(hits) <= 1
        return hits[0] if hits else None

    def child(self, folder_id, name):
        hits = sorted(
            (r for r in self.objects.values() if r.is_latest_version and folder_id in r.parent_ids and r.name == name),
            key=lambda r: r.case_index,
        )
        return hits[0].object_id if hits else None

    def parent(self, object_id):
        if object_id == self.case_id:
            return None
        for pid in self.objects[object_id].parent_ids:
            if self.objects[pid].case_root_id == self.case_id:
                return pid
        return None

    def _rels(self):
        rels = [r for r in self.objects.values() if r.is_relationship and r.is_latest_version]
        return sorted(rels, key=lambda r: self.created_token[r.object_id])

    def source(self, object_id):
        series = self.objects[object_id].version_series_id
        for rel in self._rels():
            if self.objects[rel.target_id].version_series_id == series:
                return self._latest_of_series(self.objects[rel.source_id].version_series_id).object_id
        return None

    def property(self, object_id, name):
        value = self.objects[object_id].properties.get(name)
        return None if value is None else value.value

    def target(self, object_id, name):
        series = self.objects[object_id].version_series_id
        for rel in self._rels():
            if self.objects[rel.source_id].version_series_id == series:
                tgt = self._latest_of_series(self.objects[rel.target_id].version_series_id)
                if tgt.name == name:
                    return tgt.object_id
        return None


# -- random case generator -------------------------------------------------

CASE_NAMES = ["a", "b", "c", "d"]  # tiny pool so duplicate names are certain


def random_case(repo: Repository, rng: random.Random, max_objects: int = 50, max_depth: int = 8) -> str:
    """Grow one case with nested folders, multi-filing, relationships, checkins and deletes."""
    case = repo.create_object("cmis:folder", f"case {rng.randint(0, 10**9)}")
    depth = {case.object_id: 0}
    docs: list[str] = []
    ends = [case.object_id]
    steps = 1
    while steps < max_objects:
        steps += 1
        roll = rng.random()
        folders = list(depth)
        if roll < 0.25:
            parents = [f for f in folders if depth[f] < max_depth]
            parent = max(parents, key=lambda f: (depth[f], rng.random())) if rng.random() < 0.3 else rng.choice(parents)
            rec = repo.create_object("cmis:folder", rng.choice(CASE_NAMES), parent_id=parent)
            depth[rec.object_id] = depth[parent] + 1
            ends.append(rec.object_id)
        elif roll < 0.6 or not docs:
            props = {"cmis:description": f"v{rng.randint(0, 3)}"} if rng.random() < 0.5 else {}
            rec = repo.create_object("cmis:document", rng.choice(CASE_NAMES), props, parent_id=rng.choice(folders))
            docs.append(rec.object_id)
            ends.append(rec.object_id)
        elif roll < 0.75:
            src, dst = rng.sample(ends, 2)
            repo.create_object("cmis:relationship", "rel", source_id=src, target_id=dst)
        elif roll < 0.83:
            doc = repo.get_object(rng.choice(docs))
            target = rng.choice(folders)
            if target not in doc.parent_ids:
                repo.file_in(doc.object_id, target)
        elif roll < 0.92:
            old = rng.choice(docs)
            patch = {"cmis:description": f"v{rng.randint(0, 3)}"} if rng.random() < 0.5 else None
            new = repo.checkin(old, patch=patch).object_id
            docs[docs.index(old)] = new
            ends[ends.index(old)] = new
        else:
            gone = docs.pop(rng.randrange(len(docs)))
            repo.delete_object(gone)
            ends.remove(gone)
    return case.object_id


# -- model generators --------------------------------------------------------

DEF_URI = "http://www.omg.org/spec/CMMN/DefinitionType/"
PROP_URI = "http://www.omg.org/spec/CMMN/PropertyType/"
ALL_DEFINITION_URIS = [
    DEF_URI + s
    for s in (
        "CMISFolder", "CMISDocument", "CMISRelationship", "XSDElement", "XSDComplexType",
        "XSDSimpleType", "Unknown", "Unspecified", "CMISPolicy", "CMISItem", "CMISSecondary",
    )
]
ALL_PROPERTY_URIS = [
    PROP_URI + s
    for s in (
        "string", "boolean", "integer", "float", "double", "duration", "dateTime", "time", "date",
        "gYearMonth", "gYear", "gMonthDay", "gDay", "gMonth", "hexBinary", "base64Binary", "anyURI",
        "QName", "decimal", "Id", "HTML",
    )
]
MULTIPLICITIES = ["ZeroOrOne", "ZeroOrMore", "ExactlyOne", "OneOrMore", "Unspecified", "Unknown"]


def every_uri_model(with_ext: bool = True):
    """One definition per definition URI, each carrying one property per property URI."""
    defs = []
    for i, uri in enumerate(ALL_DEFINITION_URIS):
        props = [
            PropertyDecl(f"p{j}", puri, {"CMISPropertyId": f"x:p{j}"} if with_ext else {})
            for j, puri in enumerate(ALL_PROPERTY_URIS)
        ]
        defs.append(CaseFileItemDefinitionDecl(f"def{i}", uri, props, {"CMISTypeId": f"x:t{i}"} if with_ext else {}))
    leaf = CaseFileItemDecl("leaf", "def1", "ZeroOrMore", ext={"CMISObjectId": "obj-9", "index": 2} if with_ext else {})
    folder = CaseFileItemDecl("folder", "def0", "ExactlyOne", [leaf], ext={"index": 0} if with_ext else {})
    rel = CaseFileItemDecl("rel", "def2", target_refs=["leaf"])
    return CaseModel(
        "every uri",
        defs,
        [folder, rel],
        description="all rows",
        ext={"CMISObjectId": "obj-1"} if with_ext else {},
        metadata={"embeddedGeneralizations": {"CaseFile": "cmis:folder"}},
    )


def random_model(seed: int):
    """Random valid model; roughly half the nodes carry extension attributes."""
    rng = random.Random(seed)
    coin = lambda: rng.random() < 0.5  # noqa: E731
    defs = []
    for i in range(rng.randint(1, 5)):
        props = [
            PropertyDecl(f"p{j}", rng.choice(ALL_PROPERTY_URIS), {"CMISPropertyId": f"x:{i}.{j}"} if coin() else {})
            for j in range(rng.randint(0, 4))
        ]
        defs.append(
            CaseFileItemDefinitionDecl(f"d{i}", rng.choice(ALL_DEFINITION_URIS), props, {"CMISTypeId": f"x:{i}"} if coin() else {})
        )
    names = iter(f"item{n}" for n in range(1000))
    all_items = []

    def make(depth):
        ext = {}
        if coin():
            ext["CMISObjectId"] = f"obj-{rng.randint(1, 99)}"
        if coin():
            ext["index"] = rng.randint(0, 5)
        item = CaseFileItemDecl(next(names), rng.choice(defs).name, rng.choice(MULTIPLICITIES), ext=ext)
        all_items.append(item)
        if depth < 3:
            item.children = [make(depth + 1) for _ in range(rng.randint(0, 2))]
        return item

    items = [make(0) for _ in range(rng.randint(0, 3))]
    for item in all_items:
        if all_items and rng.random() < 0.2:
            item.target_refs = [rng.choice(all_items).name]
    return CaseModel(f"model {seed}", defs, items, "d" if coin() else "", {"CMISObjectId": "obj-1"} if coin() else {})
