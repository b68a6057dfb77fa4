import logging

import pytest

from dephase_lab.errors import ConfigError, InputFormatError
from dephase_lab.utils import var_helpers
from dephase_lab.utils.io_formats import complex_from_pair, complex_to_pair, load_document, require, write_csv
from dephase_lab.utils.logging_config import setup_logging
from dephase_lab.utils.var_helpers import get_var, parse_extra_vars, thread_cap


def test_parse_extra_vars():
    extras = parse_extra_vars(['-e', 'seed=3', '--extra', ' max_restarts = 8 ', '-e', 'junk',
                               '--unrelated'])
    assert extras == {'seed': '3', 'max_restarts': '8'}
    assert parse_extra_vars() == {}
    assert parse_extra_vars(['-eexpr=a=b']) == {'expr': 'a=b'}


def test_get_var_precedence(monkeypatch):
    doc = {'seed': 1, 'empty': ''}
    assert get_var('seed', doc, 0) == 1
    assert get_var('seed', doc, 0, {'seed': '2'}) == '2'
    monkeypatch.setenv('DEPHASE_LAB_SEED', '3')
    assert get_var('seed', doc, 0, {'seed': '2'}) == '3'
    monkeypatch.setenv('DEPHASE_LAB_SEED', '')
    assert get_var('seed', doc, 0) == 1
    assert get_var('empty', doc, 'fallback', {'empty': ''}) == 'fallback'


def test_thread_cap(monkeypatch):
    monkeypatch.setenv('DEPHASE_LAB_THREADS', '3')
    assert thread_cap() == 3
    monkeypatch.delenv('DEPHASE_LAB_THREADS')
    monkeypatch.setattr(var_helpers.psutil, 'cpu_count', lambda logical=True: None)
    assert thread_cap() == 1
    monkeypatch.setattr(var_helpers.psutil, 'cpu_count', lambda logical=True: 12)
    assert thread_cap() == 12


@pytest.mark.parametrize('raw', ['0', '-2', 'four'])
def test_thread_cap_rejects_bad_values(monkeypatch, raw):
    monkeypatch.setenv('DEPHASE_LAB_THREADS', raw)
    with pytest.raises(ConfigError):
        thread_cap()


def test_setup_logging(tmp_path):
    log_file = tmp_path / 'lab.log'
    setup_logging(verbose=True, log_file=str(log_file))
    root = logging.getLogger()
    assert root.level == logging.DEBUG
    assert len(root.handlers) == 2
    logging.getLogger('dephase_lab.test').debug('hello from the test')
    assert 'hello from the test' in log_file.read_text()

    setup_logging()
    assert root.level == logging.INFO
    assert len(root.handlers) == 1
    assert logging.getLogger('matplotlib').level == logging.WARNING


def test_load_document_yaml_and_json(tmp_path):
    yml = tmp_path / 'doc.yaml'
    yml.write_text('n_modes: 2\nterms: []\n')
    assert load_document(yml) == {'n_modes': 2, 'terms': []}
    js = tmp_path / 'doc.json'
    js.write_text('{"dim": 1, "rows": [[[1, 0]]]}')
    assert load_document(js)['dim'] == 1


def test_load_document_errors(tmp_path):
    with pytest.raises(InputFormatError, match='no such file'):
        load_document(tmp_path / 'missing.yaml')
    listing = tmp_path / 'list.yaml'
    listing.write_text('- 1\n- 2\n')
    with pytest.raises(InputFormatError, match='mapping'):
        load_document(listing)
    broken = tmp_path / 'broken.yaml'
    broken.write_text('a: [1, 2\n')
    with pytest.raises(InputFormatError, match='cannot parse'):
        load_document(broken)


def test_complex_pairs():
    assert complex_from_pair([0.5, -1]) == complex(0.5, -1)
    assert complex_from_pair(2) == 2 + 0j
    assert complex_to_pair(1 - 2j) == [1.0, -2.0]
    for bad in ([1, 2, 3], 'x', True, ['a', 1]):
        with pytest.raises(InputFormatError):
            complex_from_pair(bad)


def test_require():
    assert require({'dim': 2}, 'dim', 'circuit') == 2
    with pytest.raises(InputFormatError, match="circuit: missing field 'rows'"):
        require({'dim': 2}, 'rows', 'circuit')


def test_write_csv_creates_parents(tmp_path):
    path = write_csv(tmp_path / 'nested' / 'rows.csv', ['a', 'b'], [[1, 'x'], [2, 'y']])
    assert path.read_text().splitlines() == ['a,b', '1,x', '2,y']
