"""
Router for Data module
"""
import click

from uqtab.modules.pipeline import services
from uqtab.modules.pipeline.options import build_context, run_options

router = click.Group("data")


@router.command("stats")
@run_options
def stats_command(options):
    """Descriptive statistics and the age histogram"""
    ctx = build_context(options)
    payload = services.stage_stats(ctx)
    click.echo(f"{payload['n']} rows, target counts {payload['target_counts']} -> {ctx.store.path('stats.json')}")
