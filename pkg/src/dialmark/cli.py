"""Command line entry point: ``dialmark run | report | gen-domain``."""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .bench import GridConfig, aggregate, grand_means, read_results, run_grid, summary_to_records
from .ontology import DomainSpec, DomainSpecError, generate_synthetic_domain
from .usersim import ConfigurationError


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool) -> None:
    """Personalized dialogue management benchmark."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="JSON file with the same keys as the flags.")
@click.option("--env", "envs", type=int, multiple=True, help="Environment id 1-6 (repeatable).")
@click.option("--domain", "domains", multiple=True, help="Domain name or path to a domain JSON (repeatable).")
@click.option("--algo", "algos", multiple=True, help="RQ, EMDB, EMDM, HDC, DQN or GP (repeatable).")
@click.option("--mode", "modes", type=click.Choice(["v", "s", "bs"]), multiple=True, help="Personalization mode for learners (repeatable).")
@click.option("--seeds", type=int, help="Number of seeds; the range starts at $DIALMARK_SEED_OFFSET.")
@click.option("--train", type=int, help="Training dialogues per cell.")
@click.option("--test", type=int, help="Test dialogues per cell.")
@click.option("--out", type=click.Path(dir_okay=False), help="Results CSV.")
@click.option("--jobs", type=int, help="Worker processes.")
@click.option("--resume", is_flag=True, help="Keep cells already present in the output CSV.")
def run(config_path, envs, domains, algos, modes, seeds, train, test, out, jobs, resume):
    """Run a grid of benchmark cells and write one CSV row per cell."""
    try:
        cfg = GridConfig.from_file(config_path) if config_path else GridConfig()
        overrides = {
            "env": list(envs),
            "domain": list(domains),
            "algo": list(algos),
            "mode": list(modes),
            "seeds": seeds,
            "train": train,
            "test": test,
            "out": out,
            "jobs": jobs,
        }
        for k, v in overrides.items():
            if v not in (None, []):
                setattr(cfg, k, v)
        cells = cfg.cells()
    except (ConfigurationError, ValueError) as exc:
        raise click.UsageError(str(exc)) from None
    click.echo(f"running {len(cells)} cells with {cfg.jobs} job(s) -> {cfg.out}", err=True)

    def progress(r):
        k = r.key
        click.echo(
            f"env {k.env_id} {k.domain} {k.label} seed {k.seed}: reward {r.test_reward_mean:.2f} "
            f"success {r.test_success_rate:.2f} ({r.wall_clock_s:.0f}s)",
            err=True,
        )

    results = run_grid(cells, cfg.settings(), out=cfg.out, jobs=cfg.jobs, resume=resume, progress=progress)
    if len(results) < len(cells):
        click.echo(f"{len(cells) - len(results)} cell(s) failed", err=True)
        sys.exit(1)


@main.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False), help="Results CSV.")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False), help="Directory for plots and summaries.")
@click.option("--format", "fmt", default="png", type=click.Choice(["png", "svg", "pdf"]))
def report(in_path, out_dir, fmt):
    """Summarise a results CSV and draw the bar charts."""
    from .plots import emit_plots

    results = read_results(in_path)
    if not results:
        raise click.UsageError(f"{in_path} has no result rows")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = aggregate(results)
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump({"cells": summary_to_records(summary), "grand_mean": grand_means(results)}, fh, indent=2)
    for path in emit_plots(summary, out, fmt):
        click.echo(str(path))
    click.echo(str(out / "summary.json"))
    for label, value in grand_means(results).items():
        click.echo(f"{label:10s} {value:8.2f}")


@main.command("gen-domain")
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def gen_domain(spec_path, out):
    """Generate a synthetic item set from a JSON domain description."""
    try:
        with open(spec_path, encoding="utf-8") as fh:
            spec = DomainSpec.from_dict(json.load(fh))
        domain = generate_synthetic_domain(spec)
    except json.JSONDecodeError as exc:
        raise click.UsageError(f"{spec_path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    except (DomainSpecError, KeyError, TypeError, ValueError) as exc:
        raise click.UsageError(f"{spec_path}: {exc}") from None
    Path(out).write_text(domain.to_json(), encoding="utf-8")
    click.echo(f"{domain.name}: {len(domain)} items, {len(domain.slots)} slots -> {out}")


if __name__ == "__main__":
    main()
