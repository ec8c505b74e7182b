"""Command-line client.

Thin by design: every subcommand assembles an experiment request and either
posts it to a running service (--server) or executes it in-process through
the same code path the service uses.  Exit status is 0 exactly when all
checks of the requested run pass.
"""

from __future__ import annotations

import json
import sys

import click

from .config import ExperimentConfig, ConfigError, load_config
from .experiments import run_experiment, verify_all
from .reports import fingerprint, report_to_json


def _common(f):
    f = click.option("--seed", type=int, default=None, help="base RNG seed")(f)
    f = click.option("--threads", type=int, default=None, help="worker processes")(f)
    f = click.option("--out", "output_dir", type=click.Path(), default=None,
                     help="directory for reports and CSV tables")(f)
    f = click.option("--config", "config_path", type=click.Path(), default=None,
                     help="INI config file ([global] plus per-experiment sections)")(f)
    f = click.option("--server", default=None,
                     help="base URL of a cascadelab service; runs remotely when set")(f)
    return f


@click.group()
def main():
    """Cascade measure laboratory: simulation and verification."""


def _run(experiment: str, server: str | None, config_path: str | None,
         overrides: dict) -> None:
    try:
        cfg = load_config(experiment, config_path, overrides)
    except ConfigError as exc:
        raise click.ClickException(str(exc))
    if server:
        _run_remote(server, cfg)
        return
    try:
        report = run_experiment(cfg)
    except ConfigError as exc:
        raise click.ClickException(str(exc))
    click.echo(report_to_json(report))
    click.echo(f"# fingerprint {fingerprint(report)}", err=True)
    if not report.passed:
        sys.exit(1)


def _run_remote(server: str, cfg: ExperimentConfig) -> None:
    import httpx
    body = cfg.to_dict()
    body = {k: v for k, v in body.items() if v is not None}
    resp = httpx.post(f"{server.rstrip('/')}/experiments/run", json=body, timeout=None)
    if resp.status_code != 200:
        raise click.ClickException(f"service error {resp.status_code}: {resp.text}")
    data = resp.json()
    click.echo(json.dumps(data, indent=2))
    if not data.get("passed", False):
        sys.exit(1)


def _overrides(seed, threads, output_dir, **extra) -> dict:
    out = {"seed": seed, "threads": threads, "output_dir": output_dir}
    out.update(extra)
    return {k: v for k, v in out.items() if v is not None}


@main.command()
@_common
@click.option("--kind", type=click.Choice(["normalization", "maxmass", "modulus"]),
              default="normalization", help="which cascade statistic to run")
@click.option("--beta", type=float, default=None)
@click.option("--n", "n_list", type=int, multiple=True, help="tree depth(s)")
@click.option("--replicas", type=int, default=None)
def simulate(seed, threads, output_dir, config_path, server, kind, beta, n_list, replicas):
    """Cascade ensemble statistics: normalizations, max masses, moduli."""
    _run(kind, server, config_path,
         _overrides(seed, threads, output_dir, beta=beta,
                    n_list=list(n_list) or None, replicas=replicas))


@main.command()
@_common
@click.option("--alpha", "wave_alpha", default=None,
              help="initial tail decay rate: a float, 'critical' or 'inf'")
@click.option("--iterations", type=int, default=None)
@click.option("--dx", type=float, default=None)
def wavefront(seed, threads, output_dir, config_path, server, wave_alpha, iterations, dx):
    """Traveling-front iteration of the smoothing recursion."""
    _run("wavefront", server, config_path,
         _overrides(seed, threads, output_dir, wave_alpha=wave_alpha,
                    iterations=iterations, dx=dx))


@main.command()
@_common
@click.option("--alpha", type=float, default=None, help="stability index in (0,1)")
@click.option("--n", "n_list", type=int, multiple=True)
@click.option("--replicas", type=int, default=None)
@click.option("--depth-lo", type=int, default=None)
@click.option("--depth-hi", type=int, default=None)
def kpz(seed, threads, output_dir, config_path, server, alpha, n_list, replicas,
        depth_lo, depth_hi):
    """Dimension change of a reference set under the cascade metric."""
    _run("kpz", server, config_path,
         _overrides(seed, threads, output_dir, alpha=alpha,
                    n_list=list(n_list) or None, replicas=replicas,
                    depth_lo=depth_lo, depth_hi=depth_hi))


@main.command()
@_common
@click.option("--beta", type=float, default=None)
@click.option("--alpha", type=float, default=None)
@click.option("--n", "n_list", type=int, multiple=True)
@click.option("--replicas", type=int, default=None)
def spectrum(seed, threads, output_dir, config_path, server, beta, alpha, n_list, replicas):
    """Structure exponents and multifractal spectrum estimation."""
    _run("spectrum", server, config_path,
         _overrides(seed, threads, output_dir, beta=beta, alpha=alpha,
                    n_list=list(n_list) or None, replicas=replicas))


@main.command()
@_common
@click.option("--beta", type=float, default=None)
@click.option("--n", "n_list", type=int, multiple=True)
@click.option("--replicas", type=int, default=None)
def tail(seed, threads, output_dir, config_path, server, beta, n_list, replicas):
    """Heavy-tail index of the total-mass distribution."""
    _run("tail", server, config_path,
         _overrides(seed, threads, output_dir, beta=beta,
                    n_list=list(n_list) or None, replicas=replicas))


@main.command()
@_common
@click.option("--alpha", type=float, default=None)
@click.option("--n", "n_list", type=int, multiple=True)
@click.option("--replicas", type=int, default=None)
def levy(seed, threads, output_dir, config_path, server, alpha, n_list, replicas):
    """Stable subordinator checks and frozen-phase composition."""
    _run("levy-compose", server, config_path,
         _overrides(seed, threads, output_dir, alpha=alpha,
                    n_list=list(n_list) or None, replicas=replicas))


@main.command()
@click.option("--profile", type=click.Choice(["quick", "full"]), default="quick")
@click.option("--seed", type=int, default=20260810)
@click.option("--threads", type=int, default=None)
@click.option("--only", multiple=True, help="criterion ids, e.g. --only A1 --only A8")
@click.option("--server", default=None)
def verify(profile, seed, threads, only, server):
    """Run the acceptance-criteria matrix (quick or full budgets)."""
    if server:
        import httpx
        resp = httpx.post(f"{server.rstrip('/')}/verify",
                          json={"profile": profile, "seed": seed, "threads": threads,
                                "only": list(only) or None}, timeout=None)
        if resp.status_code != 200:
            raise click.ClickException(f"service error {resp.status_code}: {resp.text}")
        data = resp.json()
        click.echo(data["matrix"])
        sys.exit(0 if data["all_passed"] else 1)
    summary = verify_all(profile, seed, threads, list(only) or None)
    click.echo(summary.matrix())
    sys.exit(0 if summary.all_passed else 1)


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8660)
def serve(host, port):
    """Start the HTTP service."""
    import uvicorn
    uvicorn.run("cascadelab.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
