"""Operator command line, a thin client over the HTTP API.

Every command maps to exactly one API call; parsing, validation and diffing all
happen server-side.  Output comes in two modes: ``pretty`` for humans (default
on a terminal) and ``json``, which emits the exact response body so scripts see
what the API said, byte for byte.

Exit codes: 0 success, 1 API or transport error, 2 usage error.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from typing import Any, Optional

import click
import httpx

from confplane.model import render_group_yaml, render_standalone_yaml

DEFAULT_SERVER = "http://127.0.0.1:4600"


@dataclass
class Client:
    server: str
    output: str

    def request(self, method: str, path: str, **kwargs) -> httpx.Response:
        try:
            return httpx.request(method, f"{self.server}{path}", timeout=30.0, **kwargs)
        except httpx.HTTPError as exc:
            click.echo(f"error: cannot reach {self.server}: {exc}", err=True)
            sys.exit(1)

    def finish(self, response: httpx.Response, pretty) -> None:
        """Print the response and exit non-zero on API errors."""
        if response.status_code >= 400:
            _print_api_error(response)
            sys.exit(1)
        if self.output == "json":
            sys.stdout.write(response.text)
            sys.stdout.flush()
        else:
            pretty(response.json())


def _print_api_error(response: httpx.Response) -> None:
    try:
        body = response.json()
    except ValueError:
        body = {}
    code = body.get("code", str(response.status_code))
    message = body.get("message", response.text)
    click.echo(f"error: {code}: {message}", err=True)
    for detail in body.get("details", ()):
        path = detail.get("path") or "/"
        click.echo(f"  {path}: {detail.get('rule')}: {detail.get('message')}", err=True)


def _parse_pair(text: str, flag: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise click.UsageError(f"{flag} needs key=value, got {text!r}")
    return key, value


def _typed_label(raw: str) -> Any:
    # same coercion the query syntax uses: bool words, then float, else string
    if raw in ("true", "false"):
        return raw == "true"
    try:
        return float(raw)
    except ValueError:
        return raw


def _labels_from_flags(pairs: tuple[str, ...]) -> dict[str, Any]:
    labels: dict[str, Any] = {}
    for pair in pairs:
        key, value = _parse_pair(pair, "--label")
        if key in labels:
            raise click.UsageError(f"duplicate label key {key!r}")
        labels[key] = _typed_label(value)
    return labels


def _payload_yaml(file: Optional[str], sets: tuple[str, ...]) -> str:
    if file is not None and sets:
        raise click.UsageError("use either -f or --set, not both")
    if file is not None:
        with open(file, "r", encoding="utf-8") as handle:
            return handle.read()
    if sets:
        params: dict[str, str] = {}
        for pair in sets:
            key, value = _parse_pair(pair, "--set")
            if key in params:
                raise click.UsageError(f"duplicate --set key {key!r}")
            params[key] = value
        return render_standalone_yaml(params)
    return ""


# ---------------------------------------------------------------------------
# pretty printers

def _echo_record(doc: dict[str, Any]) -> None:
    ref = doc.get("schemaRef")
    head = f"{doc['organization']}/{doc['name']}/{doc['version']} ({doc['kind']}, seq {doc['createdSeq']})"
    if ref:
        head += f" schema={ref}"
    click.echo(head)
    if doc["kind"] == "standalone":
        click.echo(render_standalone_yaml(doc["params"]), nl=False)
    else:
        sets = {entry["name"]: entry["params"] for entry in doc["namedParamSets"]}
        click.echo(render_group_yaml(sets), nl=False)


def _echo_timeline(doc: dict[str, Any]) -> None:
    for entry in doc["entries"]:
        ref = entry.get("schemaRef")
        suffix = f"  schema={ref}" if ref else ""
        click.echo(f"{entry['createdSeq']:>6}  {entry['version']}  {entry['createdAt']}{suffix}")


def _echo_diff(doc: Any) -> None:
    if isinstance(doc, list):
        _echo_changes(doc, "")
        return
    if not doc:
        click.echo("(no changes)")
        return
    for name, changes in doc.items():
        click.echo(name)
        _echo_changes(changes, "  ")


def _echo_changes(changes: list[dict[str, str]], indent: str) -> None:
    if not changes:
        click.echo(f"{indent}(no changes)")
        return
    width = max(len(c["key"]) for c in changes)
    for change in changes:
        key = change["key"].ljust(width)
        if change["type"] == "Addition":
            click.echo(f"{indent}+ {key}  {change['value']}")
        elif change["type"] == "Deletion":
            click.echo(f"{indent}- {key}  {change['value']}")
        else:
            click.echo(f"{indent}~ {key}  {change['oldValue']} -> {change['newValue']}")


def _echo_violations(violations: list[dict[str, str]]) -> None:
    for violation in violations:
        path = violation.get("path") or "/"
        click.echo(f"  {path}: {violation.get('rule')}: {violation.get('message')}")


# ---------------------------------------------------------------------------
# command tree

@click.group()
@click.option("--server", envvar="CONFPLANE_SERVER", default=DEFAULT_SERVER, show_default=True)
@click.option(
    "-o",
    "--output",
    type=click.Choice(["pretty", "json"]),
    default=None,
    help="defaults to pretty on a terminal, json otherwise",
)
@click.pass_context
def main(ctx: click.Context, server: str, output: Optional[str]) -> None:
    """Client for the configuration control plane."""
    mode = output or ("pretty" if sys.stdout.isatty() else "json")
    ctx.obj = Client(server=server.rstrip("/"), output=mode)


def _config_commands(kind_segment: str, kind_word: str) -> click.Group:
    @click.group(name=kind_word)
    def group() -> None:
        pass

    @group.command("put")
    @click.argument("org")
    @click.argument("name")
    @click.argument("version")
    @click.option("-f", "--file", type=click.Path(exists=True, dir_okay=False))
    @click.option("--set", "sets", multiple=True, help="inline key=value parameter")
    @click.option("--schema", help="bind to a stored schema: org/name/version")
    @click.pass_obj
    def put(client: Client, org: str, name: str, version: str, file, sets, schema) -> None:
        if kind_word == "group" and sets:
            raise click.UsageError("--set applies to standalone configs; use -f for groups")
        body: dict[str, Any] = {
            "name": name,
            "version": version,
            "yaml": _payload_yaml(file, sets),
        }
        if schema:
            body["schemaRef"] = schema
        response = client.request("POST", f"/v1/orgs/{org}/{kind_segment}", json=body)
        client.finish(
            response,
            lambda doc: click.echo(
                f"stored {doc['organization']}/{doc['name']}/{doc['version']} (seq {doc['createdSeq']})"
            ),
        )

    @group.command("get")
    @click.argument("org")
    @click.argument("name")
    @click.argument("version")
    @click.pass_obj
    def get(client: Client, org: str, name: str, version: str) -> None:
        response = client.request("GET", f"/v1/orgs/{org}/{kind_segment}/{name}/{version}")
        client.finish(response, _echo_record)

    @group.command("timeline")
    @click.argument("org")
    @click.argument("name")
    @click.pass_obj
    def timeline(client: Client, org: str, name: str) -> None:
        response = client.request("GET", f"/v1/orgs/{org}/{kind_segment}/{name}/timeline")
        client.finish(response, _echo_timeline)

    @group.command("diff")
    @click.argument("org")
    @click.argument("name")
    @click.option("--ref", required=True, help="reference version")
    @click.option("--target", required=True, help="target version")
    @click.option("--ref-org", help="reference organization, when different")
    @click.option("--ref-name", help="reference name, when different")
    @click.pass_obj
    def diff(client: Client, org, name, ref, target, ref_org, ref_name) -> None:
        params = {"ref": ref, "target": target}
        if ref_org:
            params["refOrg"] = ref_org
        if ref_name:
            params["refName"] = ref_name
        response = client.request(
            "GET", f"/v1/orgs/{org}/{kind_segment}/{name}/diff", params=params
        )
        client.finish(response, _echo_diff)

    return group


main.add_command(_config_commands("configs", "config"))
main.add_command(_config_commands("groups", "group"))


@main.group()
def schema() -> None:
    pass


@schema.command("put")
@click.argument("org")
@click.argument("name")
@click.argument("version")
@click.option("-f", "--file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.pass_obj
def schema_put(client: Client, org, name, version, file) -> None:
    with open(file, "r", encoding="utf-8") as handle:
        source = handle.read()
    body = {"organization": org, "name": name, "version": version, "yaml": source}
    response = client.request("POST", "/v1/schemas", json=body)
    client.finish(
        response,
        lambda doc: click.echo(
            f"stored schema {doc['organization']}/{doc['name']}/{doc['version']} (seq {doc['createdSeq']})"
        ),
    )


@schema.command("get")
@click.argument("org")
@click.argument("name")
@click.argument("version")
@click.pass_obj
def schema_get(client: Client, org, name, version) -> None:
    response = client.request("GET", f"/v1/schemas/{org}/{name}/{version}")
    client.finish(response, lambda doc: click.echo(doc["sourceYaml"], nl=False))


@schema.command("history")
@click.argument("org")
@click.argument("name")
@click.pass_obj
def schema_history(client: Client, org, name) -> None:
    response = client.request("GET", f"/v1/schemas/{org}/{name}/history")
    client.finish(
        response,
        lambda doc: [
            click.echo(f"{entry['createdSeq']:>6}  {entry['version']}")
            for entry in doc["entries"]
        ],
    )


@schema.command("delete")
@click.argument("org")
@click.argument("name")
@click.argument("version")
@click.pass_obj
def schema_delete(client: Client, org, name, version) -> None:
    response = client.request("DELETE", f"/v1/schemas/{org}/{name}/{version}")
    client.finish(response, lambda doc: click.echo(f"deleted {doc['deleted']}"))


@schema.command("validate")
@click.argument("org")
@click.argument("name")
@click.argument("version")
@click.option("-f", "--file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--kind",
    type=click.Choice(["standalone", "group"]),
    default="standalone",
    show_default=True,
)
@click.pass_obj
def schema_validate(client: Client, org, name, version, file, kind) -> None:
    with open(file, "r", encoding="utf-8") as handle:
        text = handle.read()
    response = client.request(
        "POST",
        f"/v1/schemas/{org}/{name}/{version}/validate",
        json={"yaml": text, "kind": kind},
    )

    def pretty(doc: dict[str, Any]) -> None:
        if doc["valid"]:
            click.echo("valid")
        else:
            click.echo("invalid")
            _echo_violations(doc["violations"])

    client.finish(response, pretty)


@main.group()
def node() -> None:
    pass


@node.command("register")
@click.argument("node_id")
@click.argument("org")
@click.option("--label", "labels", multiple=True, help="key=value, repeatable")
@click.pass_obj
def node_register(client: Client, node_id, org, labels) -> None:
    body = {"nodeId": node_id, "organization": org, "labels": _labels_from_flags(labels)}
    response = client.request("POST", "/v1/nodes", json=body)
    client.finish(
        response,
        lambda doc: click.echo(f"registered {doc['nodeId']} ({len(doc['labels'])} labels)"),
    )


@node.command("label")
@click.argument("node_id")
@click.option("--label", "labels", multiple=True, help="key=value, repeatable; replaces all labels")
@click.pass_obj
def node_label(client: Client, node_id, labels) -> None:
    body = {"labels": _labels_from_flags(labels)}
    response = client.request("PUT", f"/v1/nodes/{node_id}/labels", json=body)
    client.finish(
        response,
        lambda doc: click.echo(f"labeled {doc['nodeId']} ({len(doc['labels'])} labels)"),
    )


@node.command("list")
@click.argument("org")
@click.option("--query", help="label query, e.g. region=eu,cores>4")
@click.pass_obj
def node_list(client: Client, org, query) -> None:
    params = {"org": org}
    if query:
        params["query"] = query
    response = client.request("GET", "/v1/nodes", params=params)

    def pretty(doc: dict[str, Any]) -> None:
        for entry in doc["nodes"]:
            labels = ",".join(f"{k}={v}" for k, v in entry["labels"].items())
            click.echo(f"{entry['nodeId']}  {labels}")

    client.finish(response, pretty)


@main.command()
@click.argument("org")
@click.argument("name")
@click.argument("version")
@click.option(
    "--kind",
    type=click.Choice(["standalone", "group"]),
    default="standalone",
    show_default=True,
)
@click.option("--namespace", required=True)
@click.option("--query", required=True, help="label query selecting target nodes")
@click.pass_obj
def disseminate(client: Client, org, name, version, kind, namespace, query) -> None:
    """Place a stored config on every node matching the query."""
    body = {
        "org": org,
        "kind": kind,
        "name": name,
        "version": version,
        "namespace": namespace,
        "query": query,
    }
    response = client.request("POST", "/v1/disseminations", json=body)

    def pretty(doc: dict[str, Any]) -> None:
        cid = doc["configId"]
        nodes = ", ".join(doc["nodeIds"])
        click.echo(
            f"placed {cid['organization']}/{cid['name']}/{cid['version']} "
            f"in {doc['namespace']} (seq {doc['placedSeq']}): {nodes}"
        )

    client.finish(response, pretty)


@main.command()
@click.argument("node_id")
@click.argument("namespace")
@click.option("--name", help="only configs with this name")
@click.pass_obj
def fetch(client: Client, node_id, namespace, name) -> None:
    """List the configs placed for a node in a namespace."""
    params = {"name": name} if name else None
    response = client.request(
        "GET", f"/v1/nodes/{node_id}/namespaces/{namespace}/configs", params=params
    )

    def pretty(doc: dict[str, Any]) -> None:
        for entry in doc["entries"]:
            click.echo(
                f"{entry['organization']}/{entry['name']}/{entry['version']} "
                f"({entry['kind']}, seq {entry['createdSeq']})"
            )

    client.finish(response, pretty)


if __name__ == "__main__":
    main()
