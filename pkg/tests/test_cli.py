import json

import pytest

from casefs.casefile import CaseFile, open_case
from casefs.cli import EXIT_INTERNAL, EXIT_OK, EXIT_USER, main
from casefs.events import ShadowIndex, derive_events
from casefs.models import parse_model, serialize_model
from casefs.repo import Repository
from casefs.wire import ChangePoller
from support import every_uri_model
from test_models import forbidden_hits


@pytest.fixture
def journal(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path / "case.journal"


def run(capsys, journal, *argv):
    code = main(["--repo", str(journal), *argv])
    out, err = capsys.readouterr()
    return code, out, err


def build_figure_via_cli(capsys, journal, tmp_path):
    pdf = tmp_path / "c.pdf"
    pdf.write_bytes(b"%PDF fake")
    png = tmp_path / "b.png"
    png.write_bytes(b"\x89PNG fake")
    steps = [
        ("case", "create", "project XX"),
        ("item", "add-doc", "--case", "project XX", "Data A", "--prop", "cmis:description=structured record"),
        ("item", "add-folder", "--case", "project XX", "Incoming documents"),
        ("item", "add-doc", "--case", "project XX", "picture B", "--parent", "Incoming documents", "--file", str(png), "--mime", "image/png"),
        ("item", "add-doc", "--case", "project XX", "document C", "--parent", "Incoming documents", "--file", str(pdf), "--mime", "application/pdf"),
        ("item", "add-rel", "--case", "project XX", "C references B", "document C", "picture B"),
    ]
    for argv in steps:
        code, out, err = run(capsys, journal, *argv)
        assert code == EXIT_OK, err
    return steps


def lib_case(journal):
    repo = Repository(journal)
    return repo, CaseFile(repo, open_case(repo, "project XX"))


def ref_line(ref):
    return f"{ref.object_id}\t{ref.name}\tindex={ref.index}\t{ref.definition_type_uri}\n"


def test_figure_transcript_matches_library(capsys, journal, tmp_path):
    build_figure_via_cli(capsys, journal, tmp_path)
    repo, cf = lib_case(journal)
    incoming = cf.resolve_item("Incoming documents")
    b, c = cf.resolve_item("picture B"), cf.resolve_item("document C")
    golden = [
        (("case", "list"), f"{cf.handle.case_id}\tproject XX\n"),
        (("item", "get", "--case", "project XX", "Data A"), ref_line(cf.resolve_item("Data A"))),
        (("item", "child", "--case", "project XX", "Incoming documents", "picture B"), ref_line(cf.item_child(incoming, "picture B"))),
        (("item", "parent", "--case", "project XX", "picture B"), ref_line(cf.item_parent(b))),
        (("item", "source", "--case", "project XX", "picture B"), ref_line(cf.item_source(b))),
        (("item", "target", "--case", "project XX", "document C", "picture B"), ref_line(cf.item_target(c, "picture B"))),
        (
            ("item", "prop", "--case", "project XX", "Data A", "cmis:description"),
            "structured record\thttp://www.omg.org/spec/CMMN/PropertyType/string\n",
        ),
    ]
    for argv, expected in golden:
        code, out, err = run(capsys, journal, *argv)
        assert (code, out) == (EXIT_OK, expected), (argv, err)
    assert repo.get_content_stream(cf.resolve_item("Data A").object_id) is None
    assert cf.item_source(b).name == "document C"


def test_json_output_matches_library(capsys, journal, tmp_path):
    build_figure_via_cli(capsys, journal, tmp_path)
    _, cf = lib_case(journal)
    code, out, _ = run(capsys, journal, "--json", "item", "child", "--case", "project XX", "Incoming documents", "picture B")
    assert code == EXIT_OK
    assert json.loads(out) == cf.resolve_item("picture B").to_json()
    code, out, _ = run(capsys, journal, "--json", "changes")
    assert [json.loads(line) for line in out.splitlines()] == [c.to_json() for c in Repository(journal).get_content_changes(0, 100)[0]]


def test_case_create_prints_case_id(capsys, journal):
    code, out, _ = run(capsys, journal, "case", "create", "project XX")
    assert code == EXIT_OK
    assert out.strip() == open_case(Repository(journal), "project XX").case_id


@pytest.mark.parametrize(
    "argv,needle",
    [
        (("item", "get", "--case", "project XX", "ghost"), "empty CaseFileItem"),
        (("item", "child", "--case", "project XX", "Incoming documents", "ghost"), "empty CaseFileItem"),
        (("item", "source", "--case", "project XX", "Data A"), "empty CaseFileItem"),
        (("item", "prop", "--case", "project XX", "Data A", "nope"), "empty Element"),
        (("item", "get", "--case", "nowhere", "Data A"), "empty CaseFile"),
        (("item", "get", "--case", "project XX", "Data A", "--index", "3"), "empty CaseFileItem"),
        (("item", "add-doc", "--case", "project XX", "x", "--prop", "oops"), "KEY=VALUE"),
        (("item", "add-doc", "--case", "project XX", "x", "--prop", "ghost=1"), "unknown-property"),
        (("item", "child", "--case", "project XX", "Data A", "x"), "not-a-folder"),
        (("--mode", "integration", "case", "list"), "--url"),
        (("case", "frobnicate"), "No such command"),
    ],
)
def test_user_errors_exit_1_without_traceback(capsys, journal, tmp_path, argv, needle):
    build_figure_via_cli(capsys, journal, tmp_path)
    code, out, err = run(capsys, journal, *argv)
    assert code == EXIT_USER
    assert needle in err and "Traceback" not in err + out


def test_unreachable_server_exits_2(capsys, journal):
    code, _, err = run(capsys, journal, "--mode", "integration", "--url", "http://127.0.0.1:9", "case", "list")
    assert code == EXIT_INTERNAL and "Traceback" not in err


def test_same_named_items_and_index(capsys, journal):
    run(capsys, journal, "case", "create", "c")
    ids = []
    for _ in range(3):
        code, out, _ = run(capsys, journal, "item", "add-doc", "--case", "c", "memo")
        ids.append(out.split("\t")[0])
    for i, oid in enumerate(ids):
        code, out, _ = run(capsys, journal, "item", "get", "--case", "c", "memo", "--index", str(i))
        assert out.startswith(f"{oid}\tmemo\tindex={i}\t")


def test_recursive_delete(capsys, journal, tmp_path):
    build_figure_via_cli(capsys, journal, tmp_path)
    code, _, err = run(capsys, journal, "item", "delete", "--case", "project XX", "Incoming documents")
    assert code == EXIT_USER and "folder-not-empty" in err
    code, out, _ = run(capsys, journal, "item", "delete", "--case", "project XX", "--recursive", "Incoming documents")
    assert code == EXIT_OK and len(out.splitlines()) == 3
    _, cf = lib_case(journal)
    assert cf.resolve_item("picture B").empty and not cf.resolve_item("Data A").empty


def test_watch_once_matches_derived_events(capsys, journal, tmp_path):
    build_figure_via_cli(capsys, journal, tmp_path)
    cp = tmp_path / "cp.json"
    code, out, _ = run(capsys, journal, "watch", "--once", "--checkpoint", str(cp))
    assert code == EXIT_OK
    expected = derive_events(Repository(journal).get_content_changes(0, 100)[0], ShadowIndex(), flush=True)
    assert [line.split("\t")[:4] for line in out.splitlines()] == [
        [str(e.source_token), e.kind.value, e.item_object_id, e.item_name] for e in expected
    ]
    # nothing new: nothing printed
    assert run(capsys, journal, "watch", "--once", "--checkpoint", str(cp))[1] == ""
    run(capsys, journal, "item", "add-doc", "--case", "project XX", "late")
    code, out, _ = run(capsys, journal, "watch", "--once", "--checkpoint", str(cp))
    assert [line.split("\t")[1] for line in out.splitlines()] == ["create", "addChild"]
    code, out, _ = run(capsys, journal, "watch", "--once", "--fresh", "--checkpoint", str(cp))
    assert len(out.splitlines()) == len(expected) + 2


def test_changes_paging(capsys, journal, tmp_path):
    build_figure_via_cli(capsys, journal, tmp_path)
    code, out, err = run(capsys, journal, "--token", "2", "--max", "2", "changes")
    assert [line.split("\t")[0] for line in out.splitlines()] == ["3", "4"]
    assert "next token 4" in err


def test_model_commands(capsys, journal, tmp_path):
    src = tmp_path / "model.case"
    src.write_bytes(serialize_model(every_uri_model()))
    code, out, _ = run(capsys, journal, "model", "export", "--cmmn10", str(src))
    assert code == EXIT_OK and forbidden_hits(out.encode()) == [] and parse_model(out)
    dest = tmp_path / "compat.case"
    assert run(capsys, journal, "model", "export", "--cmmn10", str(src), "-o", str(dest))[0] == EXIT_OK
    assert dest.read_text() == out
    assert run(capsys, journal, "model", "export", str(src))[1].encode() == src.read_bytes()
    code, out, _ = run(capsys, journal, "model", "store", str(src))
    oid, label = out.split()
    assert label == "1.0"
    assert run(capsys, journal, "model", "store", str(src))[1].split()[1] == "2.0"
    assert run(capsys, journal, "model", "load", oid)[1].encode() == src.read_bytes()
    bad = tmp_path / "bad.case"
    bad.write_bytes(src.read_bytes()[:50])
    code, _, err = run(capsys, journal, "model", "export", str(bad))
    assert code == EXIT_USER and "malformed-model" in err


def test_deadletter_list_and_drain(capsys, journal, tmp_path):
    build_figure_via_cli(capsys, journal, tmp_path)
    cp = tmp_path / "cp.json"

    def reject(event):
        if event.item_name == "picture B" and event.kind.value == "create":
            raise RuntimeError("sink refused")

    ChangePoller(Repository(journal), reject, checkpoint_path=cp).drain()
    code, out, _ = run(capsys, journal, "deadletter", "list", "--checkpoint", str(cp))
    assert code == EXIT_OK and out.splitlines() == [f"4\tcreate\t{lib_case(journal)[1].resolve_item('picture B').object_id}\tRuntimeError('sink refused')"]
    assert run(capsys, journal, "deadletter", "drain", "--checkpoint", str(cp))[1] == out
    assert run(capsys, journal, "deadletter", "list", "--checkpoint", str(cp))[1] == ""


def test_integration_mode_against_live_server(capsys, journal, live_server):
    server_repo = Repository()
    live_server.app.state.repo = server_repo
    remote = ("--mode", "integration", "--url", live_server.url, "--principal", "erin")
    assert run(capsys, journal, *remote, "case", "create", "project XX")[0] == EXIT_OK
    assert run(capsys, journal, *remote, "item", "add-folder", "--case", "project XX", "Incoming documents")[0] == EXIT_OK
    code, out, _ = run(capsys, journal, *remote, "item", "add-doc", "--case", "project XX", "picture B", "--parent", "Incoming documents")
    cf = CaseFile(server_repo, open_case(server_repo, "project XX"))
    assert out == ref_line(cf.resolve_item("picture B"))
    assert server_repo.get_object(cf.resolve_item("picture B").object_id).created_by == "erin"
    code, out, _ = run(capsys, journal, *remote, "item", "parent", "--case", "project XX", "picture B")
    assert out == ref_line(cf.resolve_item("Incoming documents"))
    code, out, _ = run(capsys, journal, *remote, "watch", "--once", "--checkpoint", "remote.cp")
    assert [line.split("\t")[1] for line in out.splitlines()] == ["create", "create", "addChild", "create", "addChild"]
    assert not journal.exists()
