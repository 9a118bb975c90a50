"""Command line client for the service, plus a local judge runner."""

from __future__ import annotations

import json
import os
import sys
import time

import click
import httpx

from .config import Settings


def _client(ctx) -> httpx.Client:
    return httpx.Client(base_url=ctx.obj["base_url"], timeout=120.0)


def _check(response: httpx.Response) -> dict:
    if response.status_code >= 400:
        try:
            payload = response.json()
            detail = f"{payload.get('error', 'error')}: {payload.get('detail', '')}"
        except Exception:
            detail = response.text[:500]
        raise click.ClickException(f"HTTP {response.status_code} {detail}")
    if "application/json" in response.headers.get("content-type", ""):
        return response.json()
    return {}


@click.group()
@click.option("--base-url", default=None, envvar="SURVEYGEN_URL",
              help="Service URL (default http://127.0.0.1:8000).")
@click.pass_context
def main(ctx, base_url):
    """Survey generation workbench."""
    ctx.ensure_object(dict)
    ctx.obj["base_url"] = base_url or "http://127.0.0.1:8000"


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=None, type=int,
              help="Port (defaults to SURVEYGEN_PORT or 8000).")
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    settings = Settings.from_env()
    uvicorn.run(create_app(settings), host=host,
                port=port if port is not None else settings.port)


@main.command()
@click.argument("title")
@click.option("--criterion", default=None,
              help="Categorization criterion (default: main research theme).")
@click.pass_context
def create(ctx, title, criterion):
    """Create a survey session for TITLE."""
    with _client(ctx) as client:
        payload = {"title": title}
        if criterion:
            payload["criterion"] = criterion
        view = _check(client.post("/sessions", json=payload))
    click.echo(f"{view['session_id']}  state={view['state']}")


@main.command()
@click.pass_context
def sessions(ctx):
    """List sessions."""
    with _client(ctx) as client:
        rows = _check(client.get("/sessions"))
    for row in rows:
        click.echo(f"{row['session_id']}  {row['state']:<17} {row['topic_title']}")
    if not rows:
        click.echo("(no sessions)")


@main.command()
@click.argument("session_id")
@click.pass_context
def status(ctx, session_id):
    """Show a session's state, references, and warnings."""
    with _client(ctx) as client:
        view = _check(client.get(f"/sessions/{session_id}"))
    click.echo(f"state: {view['state']}")
    click.echo(f"topic: {view['topic']['title']}")
    click.echo(f"criterion: {view['topic']['criterion']}")
    click.echo(f"references: {len(view['references'])}")
    if view.get("clusters"):
        names = ", ".join(view["clusters"]["names"])
        click.echo(f"clusters (v{view['clusters']['version']}): {names}")
    if view.get("outline"):
        click.echo(f"outline: v{view['outline']['version']}, "
                   f"{len(view['outline']['text'].splitlines())} entries")
    if view.get("sections"):
        edited = sum(1 for s in view["sections"] if s["status"] == "edited")
        click.echo(f"sections: {len(view['sections'])} ({edited} edited)")
    if view.get("active_job"):
        job = view["active_job"]
        click.echo(f"job: {job['stage']} {job['progress']:.0%} {job['message']}")
    if view.get("error"):
        click.echo(f"error: {view['error']}")
    for warning in view.get("warnings", []):
        click.echo(f"warning: {warning}")
    if view.get("timing"):
        total = sum(view["timing"].values())
        parts = ", ".join(f"{k} {v:.1f}s" for k, v in view["timing"].items())
        click.echo(f"timing: {parts} (total {total:.1f}s)")


@main.command()
@click.argument("session_id")
@click.argument("files", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def upload(ctx, session_id, files):
    """Upload reference documents (PDF or Markdown)."""
    with _client(ctx) as client:
        for path in files:
            with open(path, "rb") as fh:
                result = _check(client.post(
                    f"/sessions/{session_id}/references",
                    files={"file": (os.path.basename(path), fh)}))
            ref = result["reference"]
            click.echo(f"{ref['ref_id']}  {ref['title'] or os.path.basename(path)}")


@main.command()
@click.argument("session_id")
@click.argument("stage", type=click.Choice(
    ["search", "ingest", "categorize", "outline", "compose", "export"]))
@click.option("--confirm", is_flag=True,
              help="Re-run a completed stage, discarding downstream results.")
@click.option("--force", is_flag=True,
              help="Compose only: regenerate sections you edited by hand.")
@click.option("--wait/--no-wait", default=True, show_default=True,
              help="Poll the job until it finishes.")
@click.option("--poll", default=0.5, show_default=True,
              help="Polling interval in seconds.")
@click.pass_context
def run(ctx, session_id, stage, confirm, force, wait, poll):
    """Run a pipeline STAGE on a session."""
    with _client(ctx) as client:
        job = _check(client.post(f"/sessions/{session_id}/stages/{stage}",
                                 json={"confirm": confirm, "force": force}))
        click.echo(f"job {job['job_id']} started")
        if not wait:
            return
        while job["state"] == "running":
            time.sleep(poll)
            job = _check(client.get(f"/jobs/{job['job_id']}"))
        if job["state"] == "failed":
            raise click.ClickException(f"{stage} failed: {job['error']}")
        view = _check(client.get(f"/sessions/{session_id}"))
        click.echo(f"{stage} done, state={view['state']}")


@main.command()
@click.argument("session_id")
@click.option("--format", "fmt", default="markdown", show_default=True,
              type=click.Choice(["markdown", "latex", "pdf"]))
@click.option("-o", "--output", default=None, type=click.Path(dir_okay=False),
              help="Output zip path (default survey-<format>.zip).")
@click.pass_context
def export(ctx, session_id, fmt, output):
    """Download the exported survey bundle as a zip."""
    with _client(ctx) as client:
        response = client.get(f"/sessions/{session_id}/export",
                              params={"format": fmt})
        _check(response)
        path = output or f"survey-{fmt}.zip"
        with open(path, "wb") as fh:
            fh.write(response.content)
    click.echo(path)


@main.command()
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option("--topics", required=True, type=click.Path(exists=True, dir_okay=False),
              help="JSON file mapping survey filename (or stem) to its topic.")
@click.option("--aspect", "aspects", multiple=True,
              help="Rubric aspects to score (default: all bundled rubrics).")
@click.option("-o", "--output", default=None, type=click.Path(dir_okay=False),
              help="Write the delimited score table here instead of stdout.")
def judge(directory, topics, aspects, output):
    """Score exported Markdown surveys with the configured LLM judge."""
    from .judge import ASPECTS, evaluate_batch
    from .providers import build_providers

    with open(topics, encoding="utf-8") as fh:
        topic_map = json.load(fh)
    surveys = []
    skipped = []
    for name in sorted(os.listdir(directory)):
        if not name.endswith(".md"):
            continue
        stem = os.path.splitext(name)[0]
        topic = topic_map.get(name) or topic_map.get(stem)
        if not topic:
            skipped.append(name)
            continue
        with open(os.path.join(directory, name), encoding="utf-8") as fh:
            surveys.append((stem, topic, fh.read()))
    for name in skipped:
        click.echo(f"warning: no topic for {name}, skipped", err=True)
    if not surveys:
        raise click.ClickException("no surveys matched the topics file")
    settings = Settings.from_env()
    chat, _embedder = build_providers(settings)
    judge_name = settings.llm_model if settings.llm_provider != "offline" else "offline"
    result = evaluate_batch(surveys, {judge_name: chat},
                            aspects=tuple(aspects) or ASPECTS,
                            max_workers=settings.concurrency_cap)
    table = result.to_delimited()
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(table)
        click.echo(output)
    else:
        sys.stdout.write(table)


if __name__ == "__main__":
    main()
