"""Command-line entry points.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import dataset, report, spatial
from .engines import GAMES
from .generators import KINDS, GeneratorSpec
from .metrics import evaluate, format_table


@click.group()
def cli():
    """Seeded game engines, consistency metrics, and a session service."""


@cli.command()
@click.option("--game", type=click.Choice(sorted(GAMES)), required=True)
@click.option("--episodes", type=click.IntRange(min=1), default=100,
              show_default=True, help="Number of episodes to record.")
@click.option("--len", "episode_len", type=click.IntRange(min=2), default=48,
              show_default=True, help="Frames per episode (fixed-length games).")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Master seed; per-episode seeds derive from it.")
@click.option("--seeds", default=None,
              help="Comma-separated explicit episode seeds (overrides --seed).")
@click.option("--parallelism", type=click.IntRange(min=1), default=1,
              show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=Path("collection"),
              show_default=True)
def collect(game, episodes, episode_len, seed, seeds, parallelism, out):
    """Record reference episodes to disk."""
    seed_list = None
    if seeds is not None:
        seed_list = [int(s) for s in seeds.split(",") if s.strip()]
    summary = dataset.collect(game, episodes, episode_len=episode_len,
                              seed=seed, parallelism=parallelism,
                              out_dir=out, seeds=seed_list)
    click.echo(json.dumps({
        "game": summary["game"],
        "n_episodes": summary["n_episodes"],
        "out": str(out),
    }))


@cli.command()
@click.option("--collection", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--fraction", type=click.FloatRange(0.0, 1.0, min_open=True,
              max_open=True), default=0.05, show_default=True)
def split(collection, fraction):
    """Print the deterministic train/eval id partition as JSON."""
    train, ev = dataset.split(collection, fraction)
    click.echo(json.dumps({"train": train, "eval": ev}))


@cli.command()
@click.option("--episode", "episodes", type=click.Path(exists=True, path_type=Path),
              multiple=True, help="Episode directory; repeatable.")
@click.option("--collection", type=click.Path(exists=True, path_type=Path),
              default=None, help="Stitch every episode in a collection.")
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Write stitch report files (figures, CSV, JSON, maps) here.")
def stitch(episodes, collection, out):
    """Rebuild maps from stored frames and report fidelity."""
    targets = [(p.name, p) for p in episodes]
    if collection is not None:
        summary = dataset.load_collection(collection)
        targets += [(row["id"], Path(collection) / row["id"])
                    for row in summary["episodes"]]
    if not targets:
        raise click.UsageError("pass --episode and/or --collection")
    results = []
    for name, path in targets:
        res = dataset.stitch_episode(path)
        results.append((name, res))
        errs = sum(1 for e in res.position_errors if e != 0)
        click.echo(f"{name}: PSNR vs GT {res.psnr_vs_gt:.2f} dB, "
                   f"{errs}/{len(res.position_errors)} position errors, "
                   f"{len(res.ambiguous_steps)} ambiguous")
    mean = sum(r.psnr_vs_gt for _, r in results) / len(results)
    click.echo(f"mean PSNR vs GT: {mean:.2f} dB over {len(results)} episode(s)")
    if out is not None:
        paths = report.write_stitch_report(results, out, save_maps=True)
        click.echo(f"report written to {paths['json'].parent}")


@cli.command("eval")
@click.option("--game", type=click.Choice(sorted(GAMES)), default=None)
@click.option("--generator", "kind", type=click.Choice(sorted(KINDS)),
              default="reference", show_default=True)
@click.option("--p", type=click.FloatRange(0.0, 1.0), default=0.0,
              show_default=True, help="Numeric jitter rate.")
@click.option("--q", type=click.FloatRange(0.0, 1.0), default=0.0,
              show_default=True, help="Spatial reshuffle rate.")
@click.option("--episodes", type=click.IntRange(min=1), default=100,
              show_default=True)
@click.option("--len", "episode_len", type=click.IntRange(min=2), default=48,
              show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--config", type=click.Path(exists=True, path_type=Path),
              default=None, help="JSON generator spec; overrides the flags above.")
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Write report files (figures, CSV, JSON) here.")
@click.option("--table", is_flag=True, help="Print a table instead of JSON.")
def eval_cmd(game, kind, p, q, episodes, episode_len, seed, config, out, table):
    """Run the evaluation protocol and print the metric report."""
    if config is not None:
        with open(config, encoding="utf-8") as fh:
            spec = GeneratorSpec.from_json(json.load(fh))
    else:
        if game is None:
            raise click.UsageError("pass --game or --config")
        spec = GeneratorSpec(game, seed, kind=kind, p=p, q=q)
    rep = evaluate(spec, n_episodes=episodes, episode_len=episode_len)
    if table:
        click.echo(format_table(rep))
    else:
        click.echo(json.dumps(rep.to_json(), indent=2, sort_keys=True))
    if out is not None:
        paths = report.write_eval_report(rep, out)
        click.echo(f"report written to {paths['json'].parent}", err=True)


@cli.command()
@click.option("--episode", type=click.Path(exists=True, path_type=Path),
              required=True)
def replay(episode):
    """Verify a stored episode reproduces bit-exactly."""
    n = dataset.replay_episode(episode)
    click.echo(f"{episode}: {n} frames replayed bit-exact")


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Run the session service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return 2
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 130
    except (ValueError, OSError, dataset.ReplayError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
