"""
Router for Boruta module
"""
import click

from uqtab.modules.pipeline import services
from uqtab.modules.pipeline.options import build_context, run_options

router = click.Group("boruta")


@router.command("select")
@run_options
def select_command(options):
    """Boruta feature selection on the resampled training set"""
    ctx = build_context(options)
    payload = services.stage_select(ctx)
    click.echo(f"Confirmed: {', '.join(payload['confirmed']) or '-'}")
    click.echo(f"Tentative: {', '.join(payload['tentative']) or '-'}")
    click.echo(f"Rejected:  {', '.join(payload['rejected']) or '-'}")
