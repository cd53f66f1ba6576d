"""Command-line entry points.

Subcommands: run (experiment curves), distribution (occurrence
histograms), fit (triplet CSV -> embedding CSV), eval (embedding +
triplets -> metrics), recommend (grid suggestion from a timing table),
and serve (collection service).  Report paths write figures alongside
the CSVs.
"""

from __future__ import annotations

import csv
import sys
from pathlib import Path

import click
import numpy as np

from . import econ, harness
from .collection import GridSpec, occurrence_stats
from .embedding import TsteConfig, loo_nn_error, triplet_generalization_error, tste_fit
from .formats import (
    read_embedding_csv,
    read_triplets_csv,
    write_embedding_csv,
    write_triplets_csv,
)
from .oracle import load_vectors


@click.group()
def main():
    """Grid-based triplet collection, embedding, and cost tooling."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="YAML experiment config; defaults are used when omitted.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="out",
              help="Output directory for curves.csv and curves.png.")
@click.option("--seeds", default=None, help="Comma-separated seed override, e.g. 1,2,3.")
@click.option("--budget-screens", type=int, default=None, help="Budget override.")
@click.option("--print-defaults", is_flag=True, help="Print the default config YAML and exit.")
@click.option("--no-figures", is_flag=True, help="Skip PNG rendering.")
def run(config_path, out_dir, seeds, budget_screens, print_defaults, no_figures):
    """Run collection strategies against the oracle and emit curves."""
    if print_defaults:
        click.echo(harness.dump_config(harness.default_config()), nl=False)
        return
    config = harness.load_config(config_path) if config_path else harness.default_config()
    overrides = {}
    if seeds is not None:
        overrides["seeds"] = tuple(int(s) for s in seeds.split(","))
    if budget_screens is not None:
        overrides["budget_screens"] = budget_screens
        overrides["checkpoints"] = tuple(
            c for c in config.checkpoints if c <= budget_screens
        )
    if overrides:
        import dataclasses

        config = dataclasses.replace(config, **overrides)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = harness.run_experiment(config)
    curves_path = out / "curves.csv"
    harness.emit_curves_csv(results, curves_path)
    click.echo(f"wrote {curves_path}")
    with open(out / "config.yaml", "w", encoding="utf-8") as fh:
        fh.write(harness.dump_config(config))
    if not no_figures:
        from .plots import plot_curves

        figure_path = out / "curves.png"
        plot_curves(results, figure_path)
        click.echo(f"wrote {figure_path}")


@main.command()
@click.option("--n-objects", type=int, default=100, show_default=True)
@click.option("--triplets", "n_triplets", type=int, default=59520, show_default=True,
              help="Triplet count collected by each method.")
@click.option("--grid-n", type=int, default=16, show_default=True)
@click.option("--grid-k", type=int, default=4, show_default=True)
@click.option("--clusters", type=int, default=10, show_default=True)
@click.option("--spread", type=float, default=1.0, show_default=True)
@click.option("--dataset-seed", type=int, default=7, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="out")
@click.option("--no-figures", is_flag=True)
def distribution(n_objects, n_triplets, grid_n, grid_k, clusters, spread, dataset_seed, seed, out_dir, no_figures):
    """Compare occurrence histograms of grid vs. random triplets."""
    from .oracle import generate_mixture_dataset

    gt = generate_mixture_dataset(n_objects, clusters, 2, spread, dataset_seed)
    report = harness.reproduce_distribution_figure(
        gt, n_triplets, GridSpec(grid_n, grid_k), seed=seed
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "occurrence.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["object", "grid_count", "random_count"])
        for i in range(n_objects):
            writer.writerow([i, int(report.grid.histogram[i]), int(report.random.histogram[i])])
    click.echo(f"wrote {csv_path}")
    click.echo(f"grid:   mean {report.grid.mean:.1f}  std {report.grid.std:.1f}")
    click.echo(f"random: mean {report.random.mean:.1f}  std {report.random.std:.1f}")
    if not no_figures:
        from .plots import plot_occurrence

        figure_path = out / "occurrence.png"
        plot_occurrence(report.grid, report.random, figure_path)
        click.echo(f"wrote {figure_path}")


@main.command()
@click.argument("triplet_csv", type=click.Path(exists=True, dir_okay=False))
@click.argument("embedding_csv", type=click.Path(dir_okay=False))
@click.option("--n-points", type=int, default=None,
              help="Defaults to 1 + the largest index in the triplet file.")
@click.option("--dim", type=int, default=2, show_default=True)
@click.option("--alpha", type=float, default=None, help="Defaults to max(dim-1, 1).")
@click.option("--max-iters", type=int, default=1000, show_default=True)
@click.option("--learning-rate", type=float, default=1.0, show_default=True)
@click.option("--tolerance", type=float, default=1e-7, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def fit(triplet_csv, embedding_csv, n_points, dim, alpha, max_iters, learning_rate, tolerance, seed):
    """Fit an embedding to a triplet CSV and write it as CSV."""
    triplets = read_triplets_csv(triplet_csv)
    if n_points is None:
        if not triplets:
            raise click.ClickException("empty triplet file needs an explicit --n-points")
        n_points = 1 + max(max(t) for t in triplets)
    config = TsteConfig(
        dim=dim, alpha=alpha, max_iters=max_iters,
        learning_rate=learning_rate, tolerance=tolerance, seed=seed,
    )
    emb = tste_fit(triplets, n_points, config)
    write_embedding_csv(emb, embedding_csv)
    click.echo(f"wrote {embedding_csv} ({emb.n_points} points, d={emb.dim})")


@main.command("eval")
@click.argument("embedding_csv", type=click.Path(exists=True, dir_okay=False))
@click.argument("triplet_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--labels", "labels_csv", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Vector CSV supplying category labels for the LOO-NN error.")
def eval_cmd(embedding_csv, triplet_csv, labels_csv):
    """Evaluate an embedding against held-out triplets (and labels)."""
    emb = read_embedding_csv(embedding_csv)
    triplets = read_triplets_csv(triplet_csv)
    tge = triplet_generalization_error(emb, triplets)
    click.echo(f"triplet_generalization_error {tge!r}")
    if labels_csv:
        gt = load_vectors(labels_csv)
        loo = loo_nn_error(emb, gt.labels)
        click.echo(f"loo_nn_error {loo!r}")


@main.command()
@click.option("--timing", "timing_csv", type=click.Path(exists=True, dir_okay=False), default=None,
              help="CSV with header n,k,seconds; defaults to the built-in table.")
@click.option("--wage-floor", type=float, default=6.00, show_default=True)
def recommend(timing_csv, wage_floor):
    """Suggest the largest half-selection grid that pays the wage floor."""
    if timing_csv:
        entries = {}
        with open(timing_csv, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["n", "k", "seconds"]:
                raise click.ClickException(f"expected header n,k,seconds, got {header!r}")
            for row in reader:
                entries[(int(row[0]), int(row[1]))] = float(row[2])
        timing = econ.TimingTable(entries)
    else:
        timing = econ.TimingTable()
    choice = econ.recommend_grid(timing, wage_floor=wage_floor)
    if choice is None:
        click.echo(f"no measured half-selection grid pays ${wage_floor:.2f}/hr")
    else:
        n, k = choice
        wage = econ.hourly_wage(timing.entries[(n, k)])
        click.echo(f"use a {n}-choose-{k} grid (wage ${wage:.2f}/hr, {econ.triplets_per_answer(n, k)} triplets per answer)")


@main.command()
@click.option("--data-dir", type=click.Path(file_okay=False), default="collection-data", show_default=True)
@click.option("--assets-dir", type=click.Path(exists=True, file_okay=False), default=None,
              help="Directory of catalog images served under /assets.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(data_dir, assets_dir, host, port):
    """Run the live collection service."""
    import uvicorn

    from .service.api import create_app

    app = create_app(data_dir, assets_dir)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
