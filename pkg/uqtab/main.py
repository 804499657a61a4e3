"""
Application entry point - click
"""

import logging
import sys
from typing import Optional, Sequence

import click

from uqtab.config import settings
from uqtab.core.errors import EXIT_CONFIG_ERROR, EXIT_OK, UqtabError

# Import routers from all modules
from uqtab.modules.bayes.router import router as bayes_router
from uqtab.modules.boruta.router import router as boruta_router
from uqtab.modules.data.router import router as data_router
from uqtab.modules.explain.router import router as explain_router
from uqtab.modules.models.router import router as models_router
from uqtab.modules.pipeline.router import router as pipeline_router

logger = logging.getLogger("uqtab")


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)-7s %(name)s: %(message)s",
        stream=sys.stderr,
    )


@click.group()
@click.version_option(settings.APP_VERSION, prog_name=settings.APP_NAME)
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    default=settings.LOG_LEVEL,
    show_default=True,
)
def cli(log_level: str):
    """Uncertainty-aware tabular classification toolkit"""
    configure_logging(log_level)


def include_router(group: click.Group, router: click.Group) -> None:
    """Registers every command of a module router at the top level"""
    for command in router.commands.values():
        group.add_command(command)


# Include routers from all modules
include_router(cli, data_router)
include_router(cli, models_router)
include_router(cli, boruta_router)
include_router(cli, bayes_router)
include_router(cli, explain_router)
include_router(cli, pipeline_router)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Runs the CLI and maps failures to exit codes
    Returns:
        0 on success, 2 on configuration or usage errors, 3 on stage failures
    """
    try:
        cli.main(args=list(argv) if argv is not None else None, standalone_mode=False)
    except UqtabError as e:
        logger.error(str(e))
        return e.exit_code
    except click.ClickException as e:
        e.show()
        return EXIT_CONFIG_ERROR
    except click.Abort:
        click.echo("Aborted", err=True)
        return 1
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
