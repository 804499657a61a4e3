"""
Router for Bayes module
"""
import click

from uqtab.modules.pipeline import services
from uqtab.modules.pipeline.options import build_context, run_options

router = click.Group("bayes")


@router.command("bnn")
@run_options
@click.option(
    "--feature-set",
    type=click.Choice(["auto", "both", "full", "reduced"]),
    default="auto",
    show_default=True,
)
def bnn_command(options, feature_set):
    """Samples the Bayesian network under each prior with NUTS"""
    ctx = build_context(options)
    for fs in ctx.feature_sets(feature_set):
        payload = services.stage_bnn(ctx, fs)
        for entry in payload["priors"]:
            if "metrics" in entry:
                diagnostics = entry["diagnostics"]
                click.echo(
                    f"{entry['model_id']:32s} accuracy {entry['metrics']['accuracy']:.4f} "
                    f"divergences {diagnostics['total_divergences']} R-hat {diagnostics['max_split_rhat']}"
                )
            else:
                click.echo(f"{entry['model_id']:32s} failed: {entry['error']}")
