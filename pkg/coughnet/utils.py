"""
Utility functions.
"""

import concurrent.futures
import csv
import hashlib
import io
import logging
import os
import sys
import typing as ty

import click
from tabulate import tabulate
import yaml

from coughnet import config

LOG = logging.getLogger(__name__)

T = ty.TypeVar('T')
R = ty.TypeVar('R')


def ensure_str(s: ty.Any) -> str:
    if s is None:
        s = ''
    elif isinstance(s, bytes):
        s = s.decode('utf-8', 'strict')
    elif not isinstance(s, str):
        s = str(s)

    return s


def file_digest(path: str) -> str:
    """SHA-256 of a file's content, hex encoded."""
    digest = hashlib.sha256()
    with open(path, 'rb') as fh:
        for block in iter(lambda: fh.read(1 << 16), b''):
            digest.update(block)

    return digest.hexdigest()


def parallel_map(
    func: ty.Callable[[T], R],
    items: ty.Iterable[T],
    jobs: int = 1,
) -> ty.List[R]:
    """Map ``func`` over ``items``, preserving input order.

    With ``jobs > 1`` the calls run on a thread pool; results are always
    returned in the order of ``items``.
    """
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [func(item) for item in items]

    LOG.debug('Running %d tasks on %d workers', len(items), jobs)

    with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))


def handle_error(operation: str, exc: Exception) -> ty.NoReturn:
    """Log a failed operation and exit, or re-raise under ``--debug``."""
    LOG.error('Failed to %s: %s', operation, exc)

    if config.CONF.debug:
        raise exc

    LOG.error("Use the '--debug' flag for more information")
    sys.exit(1)


def report_failures(failures: ty.Sequence[ty.Tuple[str, Exception]]) -> None:
    """Log each per-file failure; exit 1 if there were any."""
    for name, exc in failures:
        LOG.error('%s: %s', name, exc)

    if failures:
        LOG.error('%d file(s) failed', len(failures))
        sys.exit(1)


def _tabulate(
    output: ty.List[ty.Tuple[ty.Any, ...]],
    headers: ty.Sequence[str],
    fmt: ty.Optional[str],
) -> str:
    fmt = fmt or os.environ.get('COUGHNET_FORMAT') or 'table'

    if fmt == 'table':
        return tabulate(output, headers, tablefmt='psql')
    elif fmt == 'simple':
        return tabulate(output, headers, tablefmt='simple')
    elif fmt == 'csv':
        result = io.StringIO()
        writer = csv.writer(
            result, quoting=csv.QUOTE_ALL, lineterminator=os.linesep
        )
        writer.writerow([ensure_str(h) for h in headers])
        for item in output:
            writer.writerow([ensure_str(i) for i in item])
        return result.getvalue()
    elif fmt == 'yaml':
        data = [
            {headers[i].lower(): entry[i] for i in range(len(headers))}
            for entry in output
        ]
        return yaml.dump(data, default_flow_style=False)

    LOG.error('format must be one of: table, simple, csv, yaml')
    sys.exit(1)


def echo(
    output: ty.List[ty.Tuple[ty.Any, ...]],
    headers: ty.Sequence[str],
    fmt: ty.Optional[str],
) -> None:
    click.echo(_tabulate(output, headers, fmt))


def format_options(
    original_function: ty.Optional[ty.Callable] = None,
) -> ty.Callable:
    """Shared output format options."""

    def _format_options(f):
        f = click.option(
            '--format',
            '-f',
            'fmt',
            default=None,
            type=click.Choice(['simple', 'table', 'csv', 'yaml']),
            help=(
                "Output format. Defaults to the value of "
                "'COUGHNET_FORMAT' else 'table'."
            ),
        )(f)
        return f

    if original_function:
        return _format_options(original_function)

    return _format_options
