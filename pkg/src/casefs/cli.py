"""``casefs`` command-line tool. Every command is a thin wrapper over library calls."""

from __future__ import annotations

import json
import logging
import os
import sys
import threading
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path

import click

from casefs.casefile import CaseFile, CaseFileItemRef, Element, create_case_file, list_cases, open_case
from casefs.errors import RepositoryError, TransportError
from casefs.events import CaseFileItemEvent
from casefs.models import export_compat10, load_model, parse_model, serialize_model, store_model
from casefs.repo.store import Repository
from casefs.repo.types import ChangeEvent, ContentStream, PropertyValue, parse_text
from casefs.wire.poller import DEFAULT_POLL_INTERVAL, ChangePoller, load_checkpoint, save_checkpoint

EXIT_OK, EXIT_USER, EXIT_INTERNAL = 0, 1, 2
DEFAULT_REPO = "casefs.journal"
DEFAULT_CHECKPOINT = "casefs.checkpoint.json"


class CliUserError(click.ClickException):
    exit_code = EXIT_USER


@dataclass
class CliConfig:
    repo_path: str = DEFAULT_REPO
    mode: str = "embedded"
    server_url: str | None = None
    poll_interval_ms: int = int(DEFAULT_POLL_INTERVAL * 1000)
    principal: str = "system"
    json_output: bool = False
    token: int = 0
    max_items: int = 100
    _repo: object = field(default=None, repr=False)

    def __post_init__(self):
        if self.mode == "integration" and not self.server_url:
            raise CliUserError("--mode integration requires --url")

    def repo(self):
        if self._repo is None:
            if self.mode == "integration":
                from casefs.wire.client import RemoteRepository

                self._repo = RemoteRepository(self.server_url, principal=self.principal)
            else:
                self._repo = Repository(self.repo_path, principal=self.principal)
        return self._repo

    def close(self):
        if self._repo is not None:
            self._repo.close()
            self._repo = None

    def emit(self, text: str, payload) -> None:
        click.echo(json.dumps(payload, sort_keys=True) if self.json_output else text)


pass_config = click.make_pass_decorator(CliConfig)


@click.group()
@click.option("--repo", "repo_path", default=lambda: os.environ.get("CASEFS_REPO", DEFAULT_REPO), show_default=DEFAULT_REPO, help="Journal file of the embedded repository.")
@click.option("--mode", type=click.Choice(["embedded", "integration"]), default="embedded", show_default=True)
@click.option("--url", "server_url", default=None, help="Server URL for integration mode.")
@click.option("--principal", default="system", show_default=True)
@click.option("--json", "json_output", is_flag=True, help="One JSON document per result.")
@click.option("--poll-ms", "poll_ms", type=click.IntRange(min=1), default=int(DEFAULT_POLL_INTERVAL * 1000), show_default=True)
@click.option("--token", type=click.IntRange(min=0), default=0, show_default=True, help="Change token to start after.")
@click.option("--max", "max_items", type=click.IntRange(min=1), default=100, show_default=True, help="Page size.")
@click.pass_context
def cli(ctx, repo_path, mode, server_url, principal, json_output, poll_ms, token, max_items):
    """Case files on a content repository."""
    config = CliConfig(repo_path, mode, server_url, poll_ms, principal, json_output, token, max_items)
    ctx.obj = config
    ctx.call_on_close(config.close)


# -- serve -------------------------------------------------------------------


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8700, show_default=True)
@pass_config
def serve(config: CliConfig, host, port):
    """Expose the embedded repository over HTTP."""
    if config.mode != "embedded":
        raise CliUserError("serve hosts the embedded repository; drop --mode integration")
    from casefs.wire.server import serve as run_server

    run_server(config.repo(), host=host, port=port)


# -- cases -------------------------------------------------------------------


@cli.group()
def case():
    """Create and list case files."""


@case.command("create")
@click.argument("name")
@click.option("--type", "type_id", default="cmis:folder", show_default=True)
@click.option("--prop", "props", multiple=True, metavar="KEY=VALUE")
@pass_config
def case_create(config: CliConfig, name, type_id, props):
    repo = config.repo()
    handle = create_case_file(repo, name, _parse_props(repo, type_id, props), type_id, principal=config.principal)
    config.emit(handle.case_id, {"caseId": handle.case_id, "name": handle.case_name})


@case.command("list")
@pass_config
def case_list(config: CliConfig):
    for handle in list_cases(config.repo()):
        config.emit(f"{handle.case_id}\t{handle.case_name}", {"caseId": handle.case_id, "name": handle.case_name})


# -- items -------------------------------------------------------------------

case_option = click.option("--case", "case_ref", required=True, help="Case id or name.")


@cli.group()
def item():
    """Navigate and extend a case file."""


@item.command("add-doc")
@case_option
@click.argument("name")
@click.option("--parent", default=None, help="Folder item to file into (default: case root).")
@click.option("--type", "type_id", default="cmis:document", show_default=True)
@click.option("--file", "file_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--mime", default="application/octet-stream", show_default=True)
@click.option("--prop", "props", multiple=True, metavar="KEY=VALUE")
@pass_config
def item_add_doc(config: CliConfig, case_ref, name, parent, type_id, file_path, mime, props):
    """File a document; without --file it is content-less."""
    cf = _case(config, case_ref)
    content = ContentStream.of(Path(file_path).read_bytes(), mime) if file_path else None
    ref = cf.create_document_item(
        name,
        type_id,
        _parse_props(cf.repo, type_id, props),
        _named(cf, parent) if parent else None,
        content,
        principal=config.principal,
    )
    _emit_ref(config, ref)


@item.command("add-folder")
@case_option
@click.argument("name")
@click.option("--parent", default=None)
@click.option("--type", "type_id", default="cmis:folder", show_default=True)
@click.option("--prop", "props", multiple=True, metavar="KEY=VALUE")
@pass_config
def item_add_folder(config: CliConfig, case_ref, name, parent, type_id, props):
    cf = _case(config, case_ref)
    ref = cf.create_folder_item(
        name, type_id, _parse_props(cf.repo, type_id, props), _named(cf, parent) if parent else None, principal=config.principal
    )
    _emit_ref(config, ref)


@item.command("add-rel")
@case_option
@click.argument("name")
@click.argument("source")
@click.argument("target")
@click.option("--type", "type_id", default="cmis:relationship", show_default=True)
@click.option("--prop", "props", multiple=True, metavar="KEY=VALUE")
@pass_config
def item_add_rel(config: CliConfig, case_ref, name, source, target, type_id, props):
    cf = _case(config, case_ref)
    ref = cf.create_relationship_item(
        name, _named(cf, source), _named(cf, target), type_id, _parse_props(cf.repo, type_id, props), principal=config.principal
    )
    _emit_ref(config, ref)


@item.command("get")
@case_option
@click.argument("name")
@click.option("--index", type=click.IntRange(min=0), default=None, help="Pick one of several same-named items.")
@pass_config
def item_get(config: CliConfig, case_ref, name, index):
    cf = _case(config, case_ref)
    ref = cf.resolve_item(name) if index is None else cf.resolve_item_at(name, index)
    where = f"{name!r}" if index is None else f"{name!r} with index {index}"
    _emit_ref(config, ref, f"case {cf.handle.case_name!r} has no item {where}")


@item.command("child")
@case_option
@click.argument("parent")
@click.argument("child")
@pass_config
def item_child(config: CliConfig, case_ref, parent, child):
    cf = _case(config, case_ref)
    _emit_ref(config, cf.item_child(_named(cf, parent), child), f"{parent!r} has no child named {child!r}")


@item.command("parent")
@case_option
@click.argument("name")
@pass_config
def item_parent(config: CliConfig, case_ref, name):
    cf = _case(config, case_ref)
    _emit_ref(config, cf.item_parent(_named(cf, name)), f"{name!r} has no parent inside the case")


@item.command("source")
@case_option
@click.argument("name")
@pass_config
def item_source(config: CliConfig, case_ref, name):
    cf = _case(config, case_ref)
    _emit_ref(config, cf.item_source(_named(cf, name)), f"no relationship targets {name!r}")


@item.command("target")
@case_option
@click.argument("name")
@click.argument("target")
@pass_config
def item_target(config: CliConfig, case_ref, name, target):
    cf = _case(config, case_ref)
    _emit_ref(config, cf.item_target(_named(cf, name), target), f"{name!r} has no relationship to an item named {target!r}")


@item.command("prop")
@case_option
@click.argument("name")
@click.argument("property_name")
@pass_config
def item_prop(config: CliConfig, case_ref, name, property_name):
    cf = _case(config, case_ref)
    element = cf.item_property(_named(cf, name), property_name)
    _emit_element(config, element, f"{name!r} has no value for property {property_name!r}")


@item.command("delete")
@case_option
@click.argument("name")
@click.option("--recursive", is_flag=True, help="Delete a folder's contents bottom-up first.")
@pass_config
def item_delete(config: CliConfig, case_ref, name, recursive):
    cf = _case(config, case_ref)
    ref = _named(cf, name)
    repo = cf.repo
    deleted = []

    def remove(object_id):
        rec = repo.get_object(object_id)
        if recursive and rec.is_folder:
            for child in repo.get_children(object_id):
                # multi-filed documents only lose this filing
                if child.is_folder or len(child.parent_ids) == 1:
                    remove(child.object_id)
                else:
                    repo.unfile(child.object_id, object_id, principal=config.principal)
        repo.delete_object(object_id, principal=config.principal)
        deleted.append(object_id)

    remove(ref.object_id)
    for oid in deleted:
        config.emit(oid, {"deleted": oid})


# -- events ------------------------------------------------------------------


class JournalFeed:
    """Change-log view over a journal file that another process may be appending to."""

    def __init__(self, path: str | os.PathLike):
        self.path = Path(path)
        self._offset = 0
        self._changes: list[ChangeEvent] = []
        self._tokens: list[int] = []

    def _refresh(self):
        if not self.path.exists():
            return
        with open(self.path, encoding="utf-8") as fh:
            fh.seek(self._offset)
            while True:
                line = fh.readline()
                if not line.endswith("\n"):
                    break  # partial write; pick it up next round
                self._offset = fh.tell()
                entry = json.loads(line) if line.strip() else {}
                if "change" in entry:
                    change = ChangeEvent.from_json(entry["change"])
                    self._changes.append(change)
                    self._tokens.append(change.token)

    def get_content_changes(self, from_token: int = 0, max_items: int = 100):
        self._refresh()
        start = bisect_right(self._tokens, from_token)
        batch = self._changes[start : start + max_items]
        return batch, (batch[-1].token if batch else from_token)


def _feed(config: CliConfig):
    if config.mode == "integration":
        return config.repo()
    return JournalFeed(config.repo_path)


@cli.command()
@click.option("--once", is_flag=True, help="Drain the pending changes and exit.")
@click.option("--checkpoint", "checkpoint_path", default=DEFAULT_CHECKPOINT, show_default=True, type=click.Path(dir_okay=False))
@click.option("--case", "case_ref", default=None, help="Only show events of this case.")
@click.option("--fresh", is_flag=True, help="Ignore an existing checkpoint and start at --token.")
@pass_config
def watch(config: CliConfig, once, checkpoint_path, case_ref, fresh):
    """Follow the change log and print derived CaseFileItem events."""
    if fresh and Path(checkpoint_path).exists():
        Path(checkpoint_path).unlink()
    case_id = open_case(config.repo(), case_ref).case_id if case_ref else None

    def handler(event: CaseFileItemEvent):
        if case_id is None or event.case_id == case_id:
            text = f"{event.source_token}\t{event.kind.value}\t{event.item_object_id}\t{event.item_name}\t{event.case_id or '-'}"
            config.emit(text, event.to_json())

    poller = ChangePoller(
        _feed(config),
        handler,
        from_token=config.token,
        batch_size=config.max_items,
        poll_interval=config.poll_interval_ms / 1000,
        checkpoint_path=checkpoint_path,
    )
    if once:
        poller.drain()
        return
    stop = threading.Event()
    try:
        poller.run(stop)
    except KeyboardInterrupt:
        stop.set()


@cli.command()
@pass_config
def changes(config: CliConfig):
    """Print one page of the change log after --token."""
    batch, next_token = config.repo().get_content_changes(config.token, config.max_items)
    for change in batch:
        text = f"{change.token}\t{change.change_type.value}\t{change.object_id}\t{change.base_type.value}\t{change.name}"
        config.emit(text, change.to_json())
    if not config.json_output:
        click.echo(f"# next token {next_token}", err=True)


# -- models ------------------------------------------------------------------


@cli.group()
def model():
    """Store, load and downgrade case models."""


@model.command("store")
@click.argument("model_file", type=click.Path(exists=True, dir_okay=False))
@pass_config
def model_store(config: CliConfig, model_file):
    repo = config.repo()
    oid = store_model(repo, parse_model(Path(model_file).read_bytes()), principal=config.principal)
    rec = repo.get_object(oid)
    config.emit(f"{oid}\t{rec.version_label}", {"objectId": oid, "versionLabel": rec.version_label})


@model.command("load")
@click.argument("object_id")
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None)
@pass_config
def model_load(config: CliConfig, object_id, output):
    _write_or_echo(serialize_model(load_model(config.repo(), object_id)), output)


@model.command("export")
@click.argument("model_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--cmmn10", is_flag=True, help="Strip extensions for CMMN 1.0 tools.")
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None, help="Default: stdout.")
def model_export(model_file, cmmn10, output):
    parsed = parse_model(Path(model_file).read_bytes())
    _write_or_echo(serialize_model(export_compat10(parsed) if cmmn10 else parsed), output)


def _write_or_echo(data: bytes, output: str | None):
    if output:
        Path(output).write_bytes(data)
    else:
        click.echo(data.decode("utf-8"), nl=False)


# -- dead letters ------------------------------------------------------------


@cli.group()
def deadletter():
    """Inspect events a watch handler failed on."""


checkpoint_option = click.option(
    "--checkpoint", "checkpoint_path", default=DEFAULT_CHECKPOINT, show_default=True, type=click.Path(dir_okay=False)
)


@deadletter.command("list")
@checkpoint_option
@pass_config
def deadletter_list(config: CliConfig, checkpoint_path):
    _, letters = load_checkpoint(checkpoint_path)
    for letter in letters:
        config.emit(f"{letter.token}\t{letter.event.kind.value}\t{letter.event.item_object_id}\t{letter.error}", letter.to_json())


@deadletter.command("drain")
@checkpoint_option
@pass_config
def deadletter_drain(config: CliConfig, checkpoint_path):
    shadow, letters = load_checkpoint(checkpoint_path)
    for letter in letters:
        config.emit(f"{letter.token}\t{letter.event.kind.value}\t{letter.event.item_object_id}\t{letter.error}", letter.to_json())
    if Path(checkpoint_path).exists():
        save_checkpoint(checkpoint_path, shadow, [])


# -- helpers -----------------------------------------------------------------


def _case(config: CliConfig, case_ref: str) -> CaseFile:
    repo = config.repo()
    try:
        return CaseFile(repo, open_case(repo, case_ref))
    except RepositoryError as exc:
        if exc.code == "not-found":
            raise CliUserError(f"no case {case_ref!r}: lookup returned the empty CaseFile") from None
        raise


def _named(cf: CaseFile, name: str) -> CaseFileItemRef:
    """Resolve an item argument by name; a miss is a user error, not a stack trace."""
    ref = cf.resolve_item(name)
    if ref.empty:
        raise CliUserError(f"case {cf.handle.case_name!r} has no item {name!r}: lookup returned the empty CaseFileItem")
    return ref


def _emit_ref(config: CliConfig, ref: CaseFileItemRef, miss: str = "") -> None:
    if ref.empty:
        if config.json_output:
            click.echo(json.dumps({"empty": True, "reason": miss}))
        raise CliUserError(f"{miss}: result is the empty CaseFileItem")
    text = f"{ref.object_id}\t{ref.name}\tindex={ref.index}\t{ref.definition_type_uri}"
    config.emit(text, ref.to_json())


def _emit_element(config: CliConfig, element: Element, miss: str) -> None:
    if element.empty:
        if config.json_output:
            click.echo(json.dumps({**element.to_json(), "reason": miss}))
        raise CliUserError(f"{miss}: result is the empty Element")
    encoded = element.value.to_json()["value"]
    text = ",".join(map(str, encoded)) if isinstance(encoded, list) else str(encoded)
    config.emit(f"{text}\t{element.property_type_uri}", element.to_json())


def _parse_props(repo, type_id: str, pairs) -> dict:
    """KEY=VALUE pairs typed by the property definitions; repeated keys build lists."""
    if not pairs:
        return {}
    defs = repo.effective_property_defs(type_id)
    out: dict = {}
    for pair in pairs:
        key, sep, text = pair.partition("=")
        if not sep or not key:
            raise CliUserError(f"--prop expects KEY=VALUE, got {pair!r}")
        pdef = defs.get(key)
        if pdef is None:
            out[key] = text  # the repository reports the unknown property
            continue
        value = parse_text(pdef.kind, text)
        if pdef.multi:
            out.setdefault(key, []).append(value)
        else:
            out[key] = PropertyValue(pdef.kind, value)
    return out


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="casefs", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_USER
    except click.ClickException as exc:
        exc.show()
        return EXIT_USER
    except TransportError as exc:
        click.echo(f"error: {exc.message}", err=True)
        return EXIT_INTERNAL
    except RepositoryError as exc:
        click.echo(f"error [{exc.code}]: {exc.message}", err=True)
        return EXIT_USER if exc.status < 500 else EXIT_INTERNAL
    except (OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USER
    except Exception as exc:  # last resort: never dump a traceback on an operator
        logging.getLogger(__name__).debug("internal error", exc_info=True)
        click.echo(f"internal error: {exc!r}", err=True)
        return EXIT_INTERNAL
    return EXIT_OK


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
