"""
Logging configuration module for the dephase_lab command line
"""

import logging
import sys

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'

# Libraries that log at INFO when imported alongside numpy/scipy
NOISY_LOGGERS = ('matplotlib', 'numba')


def setup_logging(verbose=False, log_file=None):
    """Set up the logging system for the application.

    Console output goes to stderr so that stdout stays free for the
    numbers the commands print. A log file, when requested, receives the
    same records.
    """
    # Remove all existing handlers first
    for handler in logging.root.handlers[:]:
        logging.root.removeHandler(handler)

    formatter = logging.Formatter(LOG_FORMAT)

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    logging.root.addHandler(console_handler)

    if log_file:
        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(formatter)
        logging.root.addHandler(file_handler)

    logging.root.setLevel(logging.DEBUG if verbose else logging.INFO)

    # Suppress overly verbose loggers
    for name in NOISY_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)

    logger = logging.getLogger(__name__)
    logger.info("Logging system initialized")
