"""
Command-line interface to the cough classification pipeline.
"""

import click

from coughnet import config
from coughnet import corpus
from coughnet import exceptions
from coughnet import logger
from coughnet import model
from coughnet import utils

CONF = config.CONF


@click.group()
@click.option(
    '--debug',
    default=False,
    is_flag=True,
    help="Output more information about what's going on.",
)
@click.option(
    '--config',
    'config_path',
    metavar='PATH',
    type=click.Path(exists=True, dir_okay=False),
    envvar='COUGHNET_CONFIG',
    help="Flat 'key = value' configuration file.",
)
@click.option(
    '--seed',
    metavar='N',
    type=click.IntRange(0, 2**64 - 1),
    help="Run seed. Defaults to the value of 'training.seed' else 0.",
)
@click.option(
    '--jobs',
    metavar='N',
    type=click.IntRange(min=1),
    default=1,
    show_default=True,
    help='Worker threads for per-file and per-fold work.',
)
@click.option(
    '--out',
    metavar='DIR',
    type=click.Path(file_okay=False),
    default='.',
    show_default=True,
    help='Directory that outputs are written to.',
)
@click.version_option()
def cli(debug, config_path, seed, jobs, out):
    """coughnet classifies cough recordings with a small CNN over MFCCs.

    The pipeline is driven by manifest CSV files listing a WAV file and a
    0/1 label per row. A typical run generates or collects a corpus, caches
    its features and trains with cross-validation::

      coughnet --out corpus synth --n-per-class 100
      coughnet --out run features corpus/manifest.csv
      coughnet --out run train corpus/manifest.csv --features run/features

    Every setting can come from the command line, from an environment
    variable such as ``COUGHNET_TRAINING_EPOCHS``, or from the file given
    with ``--config``, in that order of preference.

    All randomness derives from ``--seed``, so a command rerun with the same
    inputs and seed writes the same artifacts.
    """
    logger.configure_verbosity(debug)

    CONF.reset()
    CONF.debug = debug
    CONF.seed = seed
    CONF.jobs = jobs
    CONF.out = out

    try:
        CONF.load(config_path)
    except (exceptions.ConfigError, OSError) as exc:
        utils.handle_error('read configuration', exc)


cli.add_command(corpus.synth_cmd)
cli.add_command(corpus.augment_cmd)
cli.add_command(corpus.features_cmd)
cli.add_command(corpus.stats_cmd)

cli.add_command(model.train_cmd)
cli.add_command(model.predict_cmd)
cli.add_command(model.evaluate_cmd)
cli.add_command(model.sweep_cmd)
