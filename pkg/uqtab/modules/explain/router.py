"""
Router for Explain module
"""
import click

from uqtab.modules.pipeline import services
from uqtab.modules.pipeline.options import build_context, parse_instances, run_options

router = click.Group("explain")


@router.command("shap")
@run_options
@click.option("--target", help="Model id, e.g. 'bnn:normal:0:10:reduced' or 'LOGISTIC:reduced' (default: best model)")
@click.option("--background-size", type=click.IntRange(min=1), help="Background rows drawn from the training set")
@click.option("--instances", help="'test' or comma-separated test-row indices")
def shap_command(options, target, background_size, instances):
    """Exact SHAP values and charts for one model"""
    shap = {"background_size": background_size, "instances": parse_instances(instances)}
    shap = {k: v for k, v in shap.items() if v is not None}
    ctx = build_context(options, shap=shap or None)
    payload = services.stage_shap(ctx, target)
    click.echo(f"Explained {payload['target']} on {len(payload['explanations'])} rows")
    for row in payload["ranking"]:
        click.echo(f"  {row['feature']:20s} {row['mean_abs_phi']:.4f}")
