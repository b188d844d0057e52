"""Acceptance suite: ten scripted criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines as they happen.  The module is ordered: criteria 6 and 9 share one
subprocess server, and criterion 10 kills and restarts it, so it must run
last.  Randomized criteria use fixed seeds; counts and tolerances are stated
inline and are exact (zero tolerated failures unless a line says otherwise).
"""

from __future__ import annotations

import hashlib
import os
import random
import subprocess
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import httpx
import pytest
from click.testing import CliRunner

import refcheck
from gate_corpus import CASES
from confplane.cli import main as cli_main
from confplane.diff import (
    Addition,
    Deletion,
    Modification,
    apply_group_diff,
    apply_param_set_diff,
    config_group_diff,
    param_set_diff,
    render_diff_json,
)
from confplane.dissemination import Condition, LabelQuery
from confplane.errors import ConfigNotFound, NoMatchingNodes, ValidationFailed
from confplane.schemas import translate_schema_yaml
from confplane.model import (
    ConfigGroup,
    ConfigId,
    StandaloneConfig,
    parse_group_yaml,
    parse_standalone_yaml,
    group_document,
    standalone_document,
)
from confplane.plane import ControlPlane

SEED = 20260815


def _report(num: int, name: str, ok: bool, detail: str = "") -> None:
    verdict = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[acceptance] criterion {num:02d} {name}: {verdict}{suffix}")
    assert ok, f"criterion {num:02d} {name}: {detail}"


def _fresh_plane(tmp_path, tag: str) -> ControlPlane:
    return ControlPlane(str(tmp_path / f"{tag}.db"))


# ---------------------------------------------------------------------------
# shared subprocess server (criteria 6, 9, 10)

class _Server:
    def __init__(self, store_path):
        self.store_path = store_path
        self.proc = None
        self.url = None

    def start(self) -> str:
        self.proc = subprocess.Popen(
            [
                sys.executable, "-m", "confplane.api",
                "--listen", "127.0.0.1:0",
                "--store", str(self.store_path),
            ],
            stdout=subprocess.PIPE,
            stderr=subprocess.STDOUT,
            text=True,
        )
        deadline = time.monotonic() + 15
        while True:
            line = self.proc.stdout.readline()
            if "listening on " in line:
                self.url = line.split("listening on ", 1)[1].split()[0]
                return self.url
            if not line or time.monotonic() > deadline:
                raise RuntimeError("acceptance server failed to start")

    def kill(self) -> None:
        self.proc.kill()
        self.proc.wait(timeout=10)


@pytest.fixture(scope="module")
def server(tmp_path_factory):
    handle = _Server(tmp_path_factory.mktemp("acceptance") / "store.db")
    handle.start()
    yield handle
    if handle.proc and handle.proc.poll() is None:
        handle.proc.terminate()
        handle.proc.wait(timeout=10)


# record paths acknowledged over HTTP; criterion 10 replays them after a crash
ACKNOWLEDGED: list[str] = []


# ---------------------------------------------------------------------------
# 1. golden diff rendering

GOLDEN_REF = {"configA": {"pA": "vA"}, "configB": {"pB": "vB"}}
GOLDEN_TARGET = {"configA": {"pA": "vA2"}, "configC": {"pC": "vC"}}
GOLDEN_PRETTY = """{
    "configA": [
        {
            "type": "Modification",
            "key": "pA",
            "oldValue": "vA",
            "newValue": "vA2"
        }],
    "configB": [
        {
            "type": "Deletion",
            "key": "pB",
            "value": "vB"
        }],
    "configC": [
        {
            "type": "Addition",
            "key": "pC",
            "value": "vC"
        }]
}"""


def test_criterion_01_golden_group_diff(tmp_path):
    plane = _fresh_plane(tmp_path, "c1")
    try:
        plane.configs.put_config(ConfigGroup(ConfigId("orgA", "group1", "1.0.0"), GOLDEN_REF))
        plane.configs.put_config(ConfigGroup(ConfigId("orgA", "group1", "1.0.1"), GOLDEN_TARGET))
        result = plane.configs.diff_versions(
            ConfigId("orgA", "group1", "1.0.0"),
            ConfigId("orgA", "group1", "1.0.1"),
            "group",
        )
        rendered = render_diff_json(result, pretty=True)
        _report(1, "golden group diff bytes", rendered == GOLDEN_PRETTY,
                "rendering drifted from the frozen golden" if rendered != GOLDEN_PRETTY else "exact bytes")
    finally:
        plane.close()


# ---------------------------------------------------------------------------
# 2. diff exactness on constructed mutation sets

_KEYS = "abcde"


def _value(rng: random.Random) -> str:
    return f"v{rng.randrange(1000)}"


def _mutation_case(rng: random.Random):
    ref = {k: _value(rng) for k in _KEYS if rng.random() < 0.6}
    target = dict(ref)
    wanted = set()
    for key in _KEYS:
        roll = rng.random()
        if key in ref:
            if roll < 0.3:
                del target[key]
                wanted.add(Deletion(key, ref[key]))
            elif roll < 0.6:
                new = _value(rng)
                while new == ref[key]:
                    new = _value(rng)
                target[key] = new
                wanted.add(Modification(key, ref[key], new))
        elif roll < 0.5:
            value = _value(rng)
            target[key] = value
            wanted.add(Addition(key, value))
    return ref, target, wanted


def _ordering_holds(result) -> bool:
    deletions = [d for d in result if isinstance(d, Deletion)]
    others = [d for d in result if not isinstance(d, Deletion)]
    if result != others + deletions:
        return False
    other_keys = [d.key for d in others]
    deletion_keys = [d.key for d in deletions]
    return other_keys == sorted(other_keys) and deletion_keys == sorted(deletion_keys)


def test_criterion_02_diff_exactness():
    rng = random.Random(SEED + 2)
    failures = 0
    for _ in range(1000):
        ref, target, wanted = _mutation_case(rng)
        result = param_set_diff(ref, target)
        if set(result) != wanted or not _ordering_holds(result):
            failures += 1
    _report(2, "diff exactness over 1000 mutation sets", failures == 0,
            f"{failures} mismatches" if failures else "1000/1000 exact")


# ---------------------------------------------------------------------------
# 3. reorder invariance

def _random_params(rng: random.Random, min_size=0, max_size=12) -> dict[str, str]:
    alphabet = "abcdefghij-_."
    params = {}
    for _ in range(rng.randint(min_size, max_size)):
        key = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 8)))
        params[key] = _value(rng)
    return params


def _random_group(rng: random.Random) -> dict[str, dict[str, str]]:
    # named sets stay non-empty: an empty set has no parameters to diff, so
    # the diff cannot see it and apply cannot recreate it
    return {
        f"s{i}": _random_params(rng, min_size=1, max_size=6)
        for i in range(rng.randint(0, 5))
    }


def _shuffled(mapping, rng: random.Random):
    items = list(mapping.items())
    rng.shuffle(items)
    return dict(items)


def test_criterion_03_reorder_invariance():
    rng = random.Random(SEED + 3)
    failures = 0
    for _ in range(100):
        params = _random_params(rng)
        if param_set_diff(params, _shuffled(params, rng)) != []:
            failures += 1
    for _ in range(100):
        group = _random_group(rng)
        shuffled = {name: _shuffled(params, rng) for name, params in _shuffled(group, rng).items()}
        if config_group_diff(group, shuffled) != {}:
            failures += 1
    _report(3, "reorder invariance over 200 configs", failures == 0,
            f"{failures} non-empty diffs" if failures else "200/200 empty")


# ---------------------------------------------------------------------------
# 4. apply/diff round trip

def test_criterion_04_patch_round_trip():
    rng = random.Random(SEED + 4)
    failures = 0
    for _ in range(1000):
        ref = _random_params(rng, max_size=8)
        target = _random_params(rng, max_size=8)
        if apply_param_set_diff(ref, param_set_diff(ref, target)) != target:
            failures += 1
    for _ in range(500):
        ref = _random_group(rng)
        target = _random_group(rng)
        if apply_group_diff(ref, config_group_diff(ref, target)) != target:
            failures += 1
    _report(4, "patch round trip (1000 standalone, 500 group)", failures == 0,
            f"{failures} mismatches" if failures else "1500/1500 equal")


# ---------------------------------------------------------------------------
# 5. schema gate agreement and rejected-put hygiene

def _store_digest(path: str) -> str:
    digest = hashlib.sha256()
    for suffix in ("", "-wal"):
        name = path + suffix
        if os.path.exists(name):
            with open(name, "rb") as fh:
                digest.update(fh.read())
        digest.update(b"|")
    return digest.hexdigest()


def test_criterion_05_schema_gate(tmp_path):
    plane = _fresh_plane(tmp_path, "c5")
    store_file = str(tmp_path / "c5.db")
    try:
        disagreements = []
        for case in CASES:
            schema_id = ConfigId("corpus", case.name, "v1")
            plane.schemas.store_schema(schema_id, case.schema_yaml)
            if case.kind == "standalone":
                payload = parse_standalone_yaml(case.config_yaml)
                document = standalone_document(payload)
            else:
                payload = parse_group_yaml(case.config_yaml)
                document = group_document(payload)
            violations = plane.schemas.validate(document, schema_id)
            independent = refcheck.check(translate_schema_yaml(case.schema_yaml), document)
            verdicts = ((not violations), (not independent), case.valid)
            pairs_match = {(v.path, v.rule) for v in violations} == independent
            if len(set(verdicts)) != 1 or not pairs_match:
                disagreements.append(case.name)

        untouched = True
        accepted = 0
        for case in CASES:
            schema_id = ConfigId("corpus", case.name, "v1")
            cid = ConfigId("corpus", f"cfg-{case.name}", "1.0.0")
            if case.kind == "standalone":
                config = StandaloneConfig(cid, parse_standalone_yaml(case.config_yaml))
            else:
                config = ConfigGroup(cid, parse_group_yaml(case.config_yaml))
            if case.valid:
                plane.configs.put_config(config, schema_id)
                accepted += 1
            else:
                before = _store_digest(store_file)
                with pytest.raises(ValidationFailed):
                    plane.configs.put_config(config, schema_id)
                if _store_digest(store_file) != before:
                    untouched = False

        ok = not disagreements and untouched and accepted == sum(c.valid for c in CASES)
        detail = (f"disagreements: {disagreements}" if disagreements
                  else "" if untouched else "rejected put altered the store")
        _report(5, f"schema gate agreement on {len(CASES)} labeled pairs", ok,
                detail or f"{len(CASES)}/{len(CASES)} agree, rejects leave store bytes intact")
    finally:
        plane.close()


# ---------------------------------------------------------------------------
# 6. immutability under concurrency, plus the audit scenario

def test_criterion_06_immutability(server):
    url = server.url
    results = []

    def attempt(i: int):
        body = {"name": "app", "version": "1.0.0", "yaml": f"writer: w{i}\n"}
        response = httpx.post(f"{url}/v1/orgs/c6org/configs", json=body, timeout=30)
        return response.status_code, i

    with ThreadPoolExecutor(max_workers=32) as pool:
        results = list(pool.map(attempt, range(32)))

    winners = [i for status, i in results if status == 201]
    conflicts = [i for status, i in results if status == 409]
    stored = httpx.get(f"{url}/v1/orgs/c6org/configs/app/1.0.0", timeout=30).json()

    # audit scenario: disseminate, try to overwrite, fetch what the node sees
    httpx.post(
        f"{url}/v1/nodes",
        json={"nodeId": "c6-node", "organization": "c6org", "labels": {"role": "audit"}},
        timeout=30,
    )
    placed = httpx.post(f"{url}/v1/disseminations", json={
        "org": "c6org", "kind": "standalone", "name": "app", "version": "1.0.0",
        "namespace": "prod", "query": "role=audit",
    }, timeout=30)
    re_put = httpx.post(f"{url}/v1/orgs/c6org/configs", json={
        "name": "app", "version": "1.0.0", "yaml": "writer: intruder\n",
    }, timeout=30)
    fetched = httpx.get(f"{url}/v1/nodes/c6-node/namespaces/prod/configs", timeout=30).json()

    ok = (
        len(winners) == 1
        and len(conflicts) == 31
        and stored["params"] == {"writer": f"w{winners[0]}"}
        and placed.status_code == 201
        and re_put.status_code == 409
        and len(fetched["entries"]) == 1
        and fetched["entries"][0]["params"] == {"writer": f"w{winners[0]}"}
    )
    ACKNOWLEDGED.append("/v1/orgs/c6org/configs/app/1.0.0")
    _report(6, "immutability: 32 racing puts, audit flow", ok,
            f"winners={len(winners)} conflicts={len(conflicts)} re-put={re_put.status_code}")


# ---------------------------------------------------------------------------
# 7. timeline order is insertion order

def test_criterion_07_timeline_order(tmp_path):
    rng = random.Random(SEED + 7)
    plane = _fresh_plane(tmp_path, "c7")
    try:
        versions = []
        while len(versions) < 100:
            v = f"{rng.randint(0, 99)}.{rng.randint(0, 99)}.{rng.randint(0, 99)}"
            if rng.random() < 0.3:
                v += "-" + "".join(rng.choice("abcxyz") for _ in range(3))
            if v not in versions:
                versions.append(v)
        for v in versions:
            plane.configs.put_config(StandaloneConfig(ConfigId("c7org", "svc", v), {"v": v}))
        timeline = plane.configs.timeline("c7org", "svc", "standalone")
        got = [entry.id.version for entry in timeline.entries]
        seqs = [entry.created_seq for entry in timeline.entries]
        ok = got == versions and seqs == sorted(seqs) and sorted(versions) != versions
        _report(7, "timeline equals insertion order for 100 random versions", ok,
                "order drifted" if got != versions else "insertion order held, lexicographic order differs")
    finally:
        plane.close()


# ---------------------------------------------------------------------------
# 8. selection correctness and namespace isolation

_LABEL_KEYS = ("region", "zone", "cores", "mem", "gpu", "tier")
_STRINGS = ("eu", "us", "apac", "edge", "core")


def _random_labels(rng: random.Random) -> dict:
    labels = {}
    for key in _LABEL_KEYS:
        if rng.random() < 0.6:
            kind = rng.random()
            if kind < 0.4:
                labels[key] = rng.choice(_STRINGS)
            elif kind < 0.8:
                labels[key] = float(rng.randint(0, 32))
            else:
                labels[key] = rng.random() < 0.5
    return labels


def _random_condition(rng: random.Random) -> Condition:
    key = rng.choice(_LABEL_KEYS + ("absent",))
    op = rng.choice(("=", "!=", "<", ">", "<=", ">="))
    if op in ("<", ">", "<=", ">="):
        return Condition(key, op, float(rng.randint(0, 32)))
    kind = rng.random()
    if kind < 0.4:
        value = rng.choice(_STRINGS)
    elif kind < 0.8:
        value = float(rng.randint(0, 32))
    else:
        value = rng.random() < 0.5
    return Condition(key, op, value)


def _class_of(value) -> str:
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, (int, float)):
        return "number"
    return "string"


def _oracle_match(labels: dict, conditions) -> bool:
    # brute-force re-statement of the query semantics, sharing no code with
    # the implementation: absent key fails, type mismatch fails, then compare
    for cond in conditions:
        if cond.key not in labels:
            return False
        value = labels[cond.key]
        if _class_of(value) != _class_of(cond.value):
            return False
        if cond.op == "=" and not value == cond.value:
            return False
        if cond.op == "!=" and not value != cond.value:
            return False
        if cond.op == "<" and not value < cond.value:
            return False
        if cond.op == ">" and not value > cond.value:
            return False
        if cond.op == "<=" and not value <= cond.value:
            return False
        if cond.op == ">=" and not value >= cond.value:
            return False
    return True


def test_criterion_08_selection_and_isolation(tmp_path):
    rng = random.Random(SEED + 8)
    mismatches = 0
    for pool_index in range(100):
        plane = _fresh_plane(tmp_path, f"c8pool{pool_index}")
        try:
            expected_nodes = {}
            for n in range(rng.randint(1, 200)):
                labels = _random_labels(rng)
                node_id = f"node{n:03d}"
                plane.fleet.register_node(node_id, "pool", labels)
                expected_nodes[node_id] = labels
            for _ in range(100):
                conditions = tuple(_random_condition(rng) for _ in range(rng.randint(1, 3)))
                query = LabelQuery(conditions)
                got = [node.node_id for node in plane.fleet.select_nodes("pool", query)]
                want = sorted(
                    node_id for node_id, labels in expected_nodes.items()
                    if _oracle_match(labels, conditions)
                )
                if got != want:
                    mismatches += 1
        finally:
            plane.close()

    # namespace isolation: model-based fuzz over one shared store
    plane = _fresh_plane(tmp_path, "c8fuzz")
    leaks = 0
    try:
        orgs = ("orgA", "orgB")
        names = ("svc1", "svc2", "svc3")
        namespaces = ("prod", "staging", "dev")
        node_ids = {}
        for org in orgs:
            node_ids[org] = [f"{org}-n{i}" for i in range(4)]
            for i, node_id in enumerate(node_ids[org]):
                plane.fleet.register_node(node_id, org, {"slot": float(i)})
            for name in names:
                plane.configs.put_config(
                    StandaloneConfig(ConfigId(org, name, "1.0.0"), {"owner": org})
                )
        model: dict[tuple[str, str], list[str]] = {}
        for _ in range(500):
            if rng.random() < 0.6:
                org = rng.choice(orgs)
                name = rng.choice(names + ("missing",))
                namespace = rng.choice(namespaces)
                query = LabelQuery((Condition("slot", "<", float(rng.randint(0, 5))),))
                cid = ConfigId(org, name, "1.0.0")
                try:
                    placement = plane.fleet.disseminate(cid, "standalone", namespace, query)
                except (ConfigNotFound, NoMatchingNodes):
                    continue
                if not set(placement.node_ids) <= set(node_ids[org]):
                    leaks += 1
                for node_id in placement.node_ids:
                    model.setdefault((node_id, namespace), []).append(str(cid))
            else:
                org = rng.choice(orgs)
                node_id = rng.choice(node_ids[org])
                namespace = rng.choice(namespaces)
                got = [
                    str(record.config.id)
                    for record in plane.fleet.fetch_config(node_id, namespace)
                ]
                if got != model.get((node_id, namespace), []):
                    leaks += 1
    finally:
        plane.close()

    ok = mismatches == 0 and leaks == 0
    _report(8, "selection vs brute force, namespace isolation fuzz", ok,
            f"mismatches={mismatches} leaks={leaks}" if not ok
            else "10000 queries exact, 500 fuzz ops clean")


# ---------------------------------------------------------------------------
# 9. end-to-end flow through the command line

def test_criterion_09_cli_flow(server, tmp_path):
    url = server.url
    runner = CliRunner()

    def cli(*args):
        return runner.invoke(cli_main, ["--server", url, "-o", "pretty", *map(str, args)])

    schema_file = tmp_path / "schema.yaml"
    schema_file.write_text("type: object\nrequired: [host]\n")

    setup = cli("node", "register", "c9-node", "c9org", "--label", "region=eu")
    assert setup.exit_code == 0, setup.output

    steps = [
        cli("schema", "put", "c9org", "net", "v1", "-f", schema_file),
        cli("config", "put", "c9org", "app", "1.0.0",
            "--set", "host=db1", "--schema", "c9org/net/v1"),
        cli("config", "put", "c9org", "app", "1.0.1",
            "--set", "port=80", "--schema", "c9org/net/v1"),
        cli("disseminate", "c9org", "app", "1.0.0",
            "--namespace", "prod", "--query", "region=eu"),
        cli("fetch", "c9-node", "prod"),
    ]
    codes = [step.exit_code for step in steps]
    rejected = steps[2]
    fetched = steps[4]

    ok = (
        codes == [0, 0, 1, 0, 0]
        and "VALIDATION_FAILED" in rejected.stderr
        and "/host: required:" in rejected.stderr
        and "c9org/app/1.0.0" in fetched.stdout
    )
    ACKNOWLEDGED.append("/v1/schemas/c9org/net/v1")
    ACKNOWLEDGED.append("/v1/orgs/c9org/configs/app/1.0.0")
    _report(9, "cli flow put/validate/disseminate/fetch", ok,
            f"exit codes {codes}, want [0, 0, 1, 0, 0]")


# ---------------------------------------------------------------------------
# 10. durability across a hard kill

def test_criterion_10_durability(server):
    url = server.url

    # a few more acknowledged writes right before the crash
    for i in range(5):
        response = httpx.post(f"{url}/v1/orgs/c10org/configs", json={
            "name": "late", "version": f"1.0.{i}", "yaml": f"idx: {i}\npayload: p{i}\n",
        }, timeout=30)
        assert response.status_code == 201
        ACKNOWLEDGED.append(f"/v1/orgs/c10org/configs/late/1.0.{i}")

    snapshot = {}
    for path in ACKNOWLEDGED:
        response = httpx.get(f"{url}{path}", timeout=30)
        assert response.status_code == 200, path
        snapshot[path] = response.text

    server.kill()
    url = server.start()

    broken = []
    for path, before in snapshot.items():
        response = httpx.get(f"{url}{path}", timeout=30)
        if response.status_code != 200 or response.text != before:
            broken.append(path)
    ok = not broken and len(snapshot) >= 8
    _report(10, "durability across SIGKILL and restart", ok,
            f"lost or changed: {broken}" if broken
            else f"{len(snapshot)} records bit-identical after restart")
