"""
Router for Pipeline module
"""
import json

import click

from uqtab.config import RunConfig
from uqtab.modules.pipeline import services
from uqtab.modules.pipeline.options import build_context, run_options

router = click.Group("pipeline")


@router.command("pipeline")
@run_options
def pipeline_command(options):
    """stats -> baseline -> select -> baseline -> bnn -> shap -> report"""
    ctx = build_context(options)
    report = services.run_pipeline(ctx)
    best = report.best_model or {}
    click.echo(f"Best model: {best.get('model_id')} (accuracy {best.get('accuracy')})")
    if report.best_matches_reference is False:
        click.echo(f"Note: differs from the reference best model {report.reference_best_model}")
    click.echo(f"Report: {ctx.store.path('report.json')}")


@router.command("config-schema")
def config_schema_command():
    """Prints the JSON schema of the run configuration"""
    click.echo(json.dumps(RunConfig.model_json_schema(), indent=2, sort_keys=True))
