# -*- coding: utf-8 -*-

"""Unit tests for ``coughnet/utils.py``."""

import hashlib
import os
import textwrap

import pytest
import yaml
from unittest import mock

from coughnet import config
from coughnet import utils


def test_ensure_str():
    assert utils.ensure_str(None) == ''
    assert utils.ensure_str(b'caf\xc3\xa9') == 'café'
    assert utils.ensure_str(0.5) == '0.5'


def test_file_digest(tmp_path):
    path = tmp_path / 'blob'
    path.write_bytes(b'cough' * 100000)

    expected = hashlib.sha256(b'cough' * 100000).hexdigest()

    assert utils.file_digest(str(path)) == expected


def test_parallel_map_preserves_order():
    result = utils.parallel_map(lambda v: v * v, range(50), jobs=4)

    assert result == [v * v for v in range(50)]


def test_parallel_map_serial():
    assert utils.parallel_map(str, [1, 2], jobs=1) == ['1', '2']
    assert utils.parallel_map(str, [], jobs=4) == []


@mock.patch.object(utils.LOG, 'error')
def test_handle_error_exits(mock_log):
    config.CONF.debug = False

    with pytest.raises(SystemExit) as exc:
        utils.handle_error('train model', ValueError('boom'))

    assert exc.value.code == 1
    mock_log.assert_any_call('Failed to %s: %s', 'train model', mock.ANY)


def test_handle_error_debug_reraises():
    config.CONF.debug = True
    try:
        with pytest.raises(ValueError):
            utils.handle_error('train model', ValueError('boom'))
    finally:
        config.CONF.debug = False


@mock.patch.object(utils.LOG, 'error')
def test_report_failures(mock_log):
    with pytest.raises(SystemExit):
        utils.report_failures([('a.wav', OSError('gone'))])

    mock_log.assert_any_call('%s: %s', 'a.wav', mock.ANY)


def test_report_failures_none():
    utils.report_failures([])


def _test_tabulate(fmt):
    output = [(b'foo', 'bar', u'baz', '😀', None, 1)]
    headers = ('col1', 'colb', 'colIII', 'colX', 'colY', 'colZ')

    result = utils._tabulate(output, headers, fmt)

    return output, headers, result


@mock.patch.object(utils, 'tabulate')
def test_tabulate_table(mock_tabulate):
    output, headers, result = _test_tabulate('table')

    mock_tabulate.assert_called_once_with(output, headers, tablefmt='psql')
    assert result == mock_tabulate.return_value


@mock.patch.object(utils, 'tabulate')
def test_tabulate_simple(mock_tabulate):
    output, headers, result = _test_tabulate('simple')

    mock_tabulate.assert_called_once_with(output, headers, tablefmt='simple')
    assert result == mock_tabulate.return_value


@mock.patch.object(utils, 'tabulate')
def test_tabulate_csv(mock_tabulate):
    output, headers, result = _test_tabulate('csv')

    mock_tabulate.assert_not_called()
    assert result == textwrap.dedent(
        """\
        "col1","colb","colIII","colX","colY","colZ"
        "foo","bar","baz","😀","","1"
    """
    )


@mock.patch.object(yaml, 'dump')
def test_tabulate_yaml(mock_dump):
    output, headers, result = _test_tabulate('yaml')

    mock_dump.assert_called_once_with(
        [
            {
                'col1': b'foo',
                'colb': 'bar',
                'coliii': u'baz',
                'colx': '😀',
                'coly': None,
                'colz': 1,
            }
        ],
        default_flow_style=False,
    )


@mock.patch.object(utils, 'tabulate')
@mock.patch.dict(os.environ, {'COUGHNET_FORMAT': 'simple'})
def test_tabulate_env(mock_tabulate):
    output, headers, result = _test_tabulate(None)

    mock_tabulate.assert_called_once_with(output, headers, tablefmt='simple')


@mock.patch.object(utils, 'tabulate')
@mock.patch.dict(os.environ, {'COUGHNET_FORMAT': ''})
def test_tabulate_default(mock_tabulate):
    output, headers, result = _test_tabulate(None)

    mock_tabulate.assert_called_once_with(output, headers, tablefmt='psql')
    assert result == mock_tabulate.return_value
