"""
Router for Models module
"""
import click

from uqtab.modules.pipeline import services
from uqtab.modules.pipeline.options import build_context, run_options

router = click.Group("models")


@router.command("baseline")
@run_options
@click.option(
    "--feature-set",
    type=click.Choice(["auto", "both", "full", "reduced"]),
    default="auto",
    show_default=True,
    help="'auto' adds the reduced set once 'uqtab select' has run",
)
def baseline_command(options, feature_set):
    """Grid-search CV and test metrics for every classifier family"""
    ctx = build_context(options)
    for fs in ctx.feature_sets(feature_set):
        payload = services.stage_baseline(ctx, fs)
        for family, outcome in payload["families"].items():
            if "selected" in outcome:
                selected = outcome["selected"]
                click.echo(f"{fs:8s} {family:18s} {selected['describe']:40s} accuracy {selected['metrics']['accuracy']:.4f}")
            else:
                click.echo(f"{fs:8s} {family:18s} failed: {outcome['error']}")
