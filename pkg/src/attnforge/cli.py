"""Command-line front end.

Exit codes: 0 clean, 2 completed with per-sample failures, 1 fatal error.
A config file (TOML or JSON, flat keys named after the long flags) can
preload any option; flags given on the command line win.
"""

import json
import sys

import click

from . import pipeline as pl
from . import prompts as pr
from .crf import DcrfParams
from .errors import AttnforgeError
from .masks import ClassTable

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    if path.endswith(".toml"):
        with open(path, "rb") as f:
            return tomllib.load(f)
    with open(path, encoding="utf-8") as f:
        return json.load(f)


# config keys use the long flag names; these flags bind to renamed params
_KEY_ALIASES = {"input": "input_dir", "output": "output_dir",
                "classes": "classes_file"}


def _merge(ctx: click.Context, conf: dict) -> None:
    """Config values act as defaults; explicit flags keep priority."""
    for key, value in conf.items():
        param = key.replace("-", "_")
        param = _KEY_ALIASES.get(param, param)
        if param in ctx.params and ctx.get_parameter_source(param) is \
                click.core.ParameterSource.DEFAULT:
            ctx.params[param] = value


@click.group()
def main():
    """Diffusion cross-attention to segmentation pseudo-masks."""


@main.command()
@click.option("--config", type=click.Path(exists=True), default=None,
              help="TOML or JSON file with flat keys mirroring these flags.")
@click.option("--input", "input_dir", type=click.Path(), default=None)
@click.option("--output", "output_dir", type=click.Path(), default=None)
@click.option("--classes", "classes_file", type=click.Path(), default=None)
@click.option("--beta", type=float, default=0.1, show_default=True)
@click.option("--alpha", type=float, default=1.0, show_default=True)
@click.option("--norm", type=click.Choice(["per-class-max", "global-max"]),
              default="per-class-max", show_default=True)
@click.option("--reliability", type=click.Choice(["adaptive", "constant"]),
              default="adaptive", show_default=True)
@click.option("--constant-r", type=float, default=0.5, show_default=True)
@click.option("--dcrf-iters", type=int, default=10, show_default=True)
@click.option("--backend", type=click.Choice(["lattice", "exact"]),
              default="lattice", show_default=True)
@click.option("--timestep", type=int, default=None,
              help="Capture timestep to fuse; default is the schedule midpoint.")
@click.option("--jobs", type=int, default=1, show_default=True)
@click.pass_context
def synth(ctx, config, **_):
    """Turn attention containers into masks and reliability maps."""
    _merge(ctx, _load_config(config))
    p = ctx.params
    for name in ("input_dir", "output_dir", "classes_file"):
        if p[name] is None:
            raise click.UsageError(f"--{name.split('_')[0]} is required")
    try:
        cfg = pl.PipelineConfig(
            input_dir=p["input_dir"],
            output_dir=p["output_dir"],
            classes_file=p["classes_file"],
            beta=p["beta"],
            alpha=p["alpha"],
            normalization=p["norm"].replace("-", "_"),
            dcrf=DcrfParams(iterations=p["dcrf_iters"]),
            timestep_policy=p["timestep"],
            reliability_mode=p["reliability"],
            constant_r=p["constant_r"],
            backend=p["backend"],
            jobs=p["jobs"])
        manifest = pl.run_pipeline(cfg)
    except AttnforgeError as e:
        raise click.ClickException(str(e))
    n_fail = len(manifest["failures"])
    click.echo(f"{len(manifest['samples'])} samples written, "
               f"{n_fail} failures")
    if n_fail:
        sys.exit(2)


@main.group()
def prompts():
    """Caption curation, augmentation, and score filtering."""


@prompts.command()
@click.option("--corpus", type=click.Path(exists=True), required=True,
              help="One caption per line, UTF-8.")
@click.option("--classes", type=click.Path(exists=True), required=True)
@click.option("--output", type=click.Path(), required=True,
              help="JSONL of curated prompt records.")
def curate(corpus, classes, output):
    """Keep captions that mention a target class."""
    try:
        table = ClassTable.from_json(classes)
        records = pr.curate(pr.load_corpus(corpus), table)
        pr.write_records(records, output)
    except AttnforgeError as e:
        raise click.ClickException(str(e))
    click.echo(f"{len(records)} records curated")


@prompts.command()
@click.option("--records", type=click.Path(exists=True), required=True)
@click.option("--synonyms", type=click.Path(exists=True), required=True,
              help="JSON {class_name: [words]}.")
@click.option("--classes", type=click.Path(exists=True), required=True)
@click.option("--policy", type=click.Choice(["one-per-synonym", "sample"]),
              default="one-per-synonym", show_default=True)
@click.option("--k", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--output", type=click.Path(), required=True)
def augment(records, synonyms, classes, policy, k, seed, output):
    """Expand records by synonym replacement."""
    try:
        table = ClassTable.from_json(classes)
        syn = pr.SynonymTable.from_json(synonyms, table)
        recs = pr.read_records(records)
        out = pr.augment(recs, syn, policy=policy.replace("-", "_"),
                         k=k, seed=seed)
        pr.write_records(out, output)
    except AttnforgeError as e:
        raise click.ClickException(str(e))
    click.echo(f"{len(out)} records written ({len(recs)} originals)")


@prompts.command("filter")
@click.option("--records", type=click.Path(exists=True), required=True)
@click.option("--scores", type=click.Path(exists=True), required=True,
              help="TSV of 'index<TAB>score' rows.")
@click.option("--top-k", type=int, default=None)
@click.option("--threshold", type=float, default=None)
@click.option("--output", type=click.Path(), required=True)
def filter_cmd(records, scores, top_k, threshold, output):
    """Keep the best-scoring records."""
    try:
        recs = pr.attach_scores(pr.read_records(records),
                                pr.load_scores(scores))
        kept = pr.filter_by_score(recs, k=top_k, threshold=threshold)
        pr.write_records(kept, output)
    except AttnforgeError as e:
        raise click.ClickException(str(e))
    click.echo(f"{len(kept)} of {len(recs)} records kept")


@main.command()
@click.argument("manifest", type=click.Path(exists=True))
def stats(manifest):
    """Summarize a dataset manifest."""
    with open(manifest, encoding="utf-8") as f:
        data = json.load(f)
    click.echo(pl.dataset_stats(data))


if __name__ == "__main__":
    main()
