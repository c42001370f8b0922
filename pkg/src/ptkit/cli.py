"""ptctl: command-line client for the page transparency toolkit."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import certs, client as client_mod, visual
from .client import DEMO_MODES, DemoServer, PlsClient, fetch_page, gate, owner_register
from .config import Config, load_config
from .detector import DetectionConfig, detect_login, explain
from .spt import LogIdentity, load_trusted_logs, save_trusted_logs


def _load_config(path: str | None) -> Config:
    return load_config(path) if path else load_config()


@click.group()
def main():
    """Page transparency tooling: registration, demo serving, verification."""


@main.command()
@click.option("--out", type=click.Path(path_type=Path), default=Path("."),
              help="Directory for the generated key/certificate pair.")
@click.option("--ca", "make_ca", is_flag=True, help="Generate a self-signed root.")
@click.option("--domain", "domains", multiple=True,
              help="Hostname(s) for a leaf certificate (repeatable).")
@click.option("--ca-cert", type=click.Path(exists=True), default=None)
@click.option("--ca-key", type=click.Path(exists=True), default=None)
def keygen(out: Path, make_ca: bool, domains, ca_cert, ca_key):
    """Generate an Ed25519 key pair with a root or leaf certificate."""
    out.mkdir(parents=True, exist_ok=True)
    if make_ca:
        key, cert = certs.generate_ca()
    else:
        if not domains or not ca_cert or not ca_key:
            raise click.UsageError("leaf certificates need --domain, --ca-cert and --ca-key")
        signer = certs.key_from_pem(Path(ca_key).read_bytes())
        issuer = certs.cert_from_pem(Path(ca_cert).read_bytes())
        key, cert = certs.issue_certificate(signer, issuer, list(domains))
    (out / "key.pem").write_text(certs.key_to_pem(key))
    (out / "cert.pem").write_text(certs.cert_to_pem(cert))
    click.echo(f"wrote {out / 'key.pem'} and {out / 'cert.pem'}")


@main.command()
@click.option("--pls", required=True, help="Log server endpoint URL.")
@click.option("--cert", "cert_path", required=True, type=click.Path(exists=True))
@click.option("--key", "key_path", required=True, type=click.Path(exists=True))
@click.option("--url", required=True, help="Canonical URL of the page being logged.")
@click.option("--html", "html_path", required=True, type=click.Path(exists=True))
@click.option("--screenshot", "screenshot_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=None,
              help="File to store the issued SPT in (used by serve-demo).")
def register(pls, cert_path, key_path, url, html_path, screenshot_path, out_path):
    """Register a page with the log server and store the issued SPT."""
    signing_key = certs.key_from_pem(Path(key_path).read_bytes())
    screenshot = Path(screenshot_path).read_bytes() if screenshot_path else None
    pls_client = PlsClient(pls)
    try:
        header = owner_register(
            pls_client, Path(cert_path).read_text(), signing_key,
            url, Path(html_path).read_text(), screenshot,
        )
    except client_mod.RegistrationRejected as exc:
        click.echo(json.dumps({"error": exc.error, "detail": exc.detail}))
        sys.exit(1)
    finally:
        pls_client.close()
    if out_path:
        store = json.loads(out_path.read_text()) if out_path.exists() else {}
        store[Path(html_path).name] = header
        out_path.write_text(json.dumps(store, indent=2) + "\n")
    click.echo(header)


@main.command("serve-demo")
@click.option("--root", "site_root", required=True, type=click.Path(exists=True))
@click.option("--spt-store", "spt_store_path", type=click.Path(exists=True), default=None,
              help="JSON file mapping page filenames to stored SPTs.")
@click.option("--mode", type=click.Choice(DEMO_MODES), default="normal",
              help="normal serves stored SPTs; strip omits them; spoof forges them.")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8080)
def serve_demo(site_root, spt_store_path, mode, host, port):
    """Serve a demo origin that attaches SPT headers to its pages."""
    store = json.loads(Path(spt_store_path).read_text()) if spt_store_path else {}
    server = DemoServer(site_root, store, mode=mode, host=host, port=port)
    click.echo(f"serving {site_root} on {server.base_url} (mode={mode})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.stop()


@main.command()
@click.option("--data-dir", default=None, help="Server state directory (default from config).")
@click.option("--root-cert", "root_certs", multiple=True, type=click.Path(exists=True),
              help="Trusted CA certificate (repeatable).")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8787)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def serve(data_dir, root_certs, host, port, config_path):
    """Run the public log server."""
    import uvicorn

    from .pls_server import PlsState, create_app

    config = _load_config(config_path)
    state = PlsState(config, data_dir or config.data_dir,
                     roots=certs.load_roots(list(root_certs)))
    click.echo(f"log server on http://{host}:{port} (data in {state.data_dir})")
    uvicorn.run(create_app(state), host=host, port=port, log_level="warning")


@main.command("serve-gate")
@click.option("--pls", default=None, help="Log server endpoint (default from config).")
@click.option("--logs", "logs_path", type=click.Path(exists=True), default=None,
              help="Trusted-log list file; fetched from the PLS when omitted.")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8788)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def serve_gate(pls, logs_path, host, port, config_path):
    """Run the render-gate service that browser clients query."""
    import uvicorn

    from .client import create_gate_app

    config = _load_config(config_path)
    pls_client = PlsClient(pls or config.pls_endpoint, timeout=config.request_timeout)
    trusted = (load_trusted_logs(logs_path) if logs_path else pls_client.get_logs())
    click.echo(f"gate service on http://{host}:{port} "
               f"(trusting {len(trusted)} log identities)")
    uvicorn.run(create_gate_app(trusted, pls_client, config),
                host=host, port=port, log_level="warning")


@main.command()
@click.argument("url")
@click.option("--pls", default=None, help="Log server endpoint (default from config).")
@click.option("--logs", "logs_path", type=click.Path(exists=True), default=None,
              help="Trusted-log list file; fetched from the PLS when omitted.")
@click.option("--screenshot", "screenshot_path", type=click.Path(exists=True), default=None,
              help="Pre-rendered screenshot for fallback verification.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def verify(url, pls, logs_path, screenshot_path, config_path):
    """Fetch a page and print the render decision; exit 0=render, 2=block."""
    config = _load_config(config_path)
    pls_client = PlsClient(pls or config.pls_endpoint, timeout=config.request_timeout)
    try:
        trusted = (load_trusted_logs(logs_path) if logs_path
                   else pls_client.get_logs())
        page = fetch_page(url)
        if screenshot_path:
            page.screenshot = Path(screenshot_path).read_bytes()
        decision = gate(page, trusted, pls_client, config)
    except client_mod.NetworkError as exc:
        click.echo(json.dumps({"action": "BLOCK", "reason": "FALLBACK_UNREACHABLE",
                               "detail": str(exc)}))
        sys.exit(2)
    finally:
        pls_client.close()
    click.echo(json.dumps(decision.to_dict()))
    sys.exit(0 if decision.action == "RENDER" else 2)


@main.command()
@click.argument("source")
@click.option("--url", default="", help="URL to score alongside the document.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Detection config JSON file.")
def detect(source, url, config_path):
    """Score a local HTML file (or URL) with the login detector."""
    detection = DetectionConfig.from_file(config_path) if config_path else DetectionConfig()
    if source.startswith(("http://", "https://")):
        page = fetch_page(source)
        html, url = page.html, url or page.url
    else:
        html = Path(source).read_text()
    report = detect_login(html, url, detection)
    click.echo(json.dumps(report.to_dict(), indent=2))
    click.echo(explain(report))


@main.command()
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True),
              help="Directory of <domain>/original.png plus variant PNGs.")
def calibrate(corpus_dir):
    """Calibrate the similarity threshold from an on-disk corpus."""
    samples = []
    for domain_dir in sorted(Path(corpus_dir).iterdir()):
        if not domain_dir.is_dir():
            continue
        original = domain_dir / "original.png"
        if not original.exists():
            raise click.UsageError(f"{domain_dir} has no original.png")
        variants = tuple(
            visual.load_png(p) for p in sorted(domain_dir.glob("*.png"))
            if p.name != "original.png"
        )
        samples.append(visual.DomainSample(
            domain=domain_dir.name,
            original=visual.load_png(original),
            variants=variants,
        ))
    try:
        result = visual.calibrate_threshold(samples)
    except visual.InsufficientCorpus as exc:
        raise click.UsageError(str(exc))
    click.echo(json.dumps({
        "threshold": result.threshold,
        "precision": result.precision,
        "recall": result.recall,
        "f1": result.f1,
        "positives": result.positives,
        "negatives": result.negatives,
    }, indent=2))


@main.command()
@click.option("--pls", default=None, help="Log server endpoint (default from config).")
@click.option("--save", "save_path", type=click.Path(path_type=Path), default=None,
              help="Write the trusted-log list to a file.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def logs(pls, save_path, config_path):
    """Fetch and print the log server's published identities."""
    config = _load_config(config_path)
    pls_client = PlsClient(pls or config.pls_endpoint, timeout=config.request_timeout)
    try:
        identities = pls_client.get_logs()
    finally:
        pls_client.close()
    records = [ident.to_record() for ident in identities]
    if save_path:
        save_trusted_logs(identities, save_path)
    click.echo(json.dumps(records, indent=2))


if __name__ == "__main__":
    main()
