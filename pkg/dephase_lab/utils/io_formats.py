"""
Structured-text documents and CSV exports
"""

import csv
import json
import logging
from pathlib import Path

import yaml

from dephase_lab.errors import InputFormatError

logger = logging.getLogger(__name__)


def load_document(path):
    """Read a JSON or YAML mapping. JSON is valid YAML, so one loader serves both."""
    path = Path(path)
    try:
        with open(path) as f:
            doc = yaml.safe_load(f)
    except FileNotFoundError:
        raise InputFormatError(f"{path}: no such file")
    except yaml.YAMLError as e:
        raise InputFormatError(f"{path}: cannot parse document: {e}")
    if not isinstance(doc, dict):
        raise InputFormatError(f"{path}: expected a mapping at the top level")
    logger.debug(f"Loaded document {path} with keys {sorted(doc)}")
    return doc


def write_document(path, doc):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(doc, f, indent=2)
        f.write('\n')
    logger.info(f"Wrote {path}")
    return path


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)
    logger.info(f"Wrote {path}")
    return path


def complex_from_pair(pair, where='value'):
    if isinstance(pair, (int, float)) and not isinstance(pair, bool):
        return complex(pair, 0.0)
    if not isinstance(pair, (list, tuple)) or len(pair) != 2:
        raise InputFormatError(f"{where}: expected [re, im], got {pair!r}")
    try:
        return complex(float(pair[0]), float(pair[1]))
    except (TypeError, ValueError):
        raise InputFormatError(f"{where}: expected numbers in [re, im], got {pair!r}")


def complex_to_pair(value):
    value = complex(value)
    return [value.real, value.imag]


def require(doc, key, where):
    if key not in doc:
        raise InputFormatError(f"{where}: missing field '{key}'")
    return doc[key]
