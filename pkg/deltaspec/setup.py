import logging
logger = logging.getLogger('deltaspec')


# Runs are single-process unless the configuration asks for a pool.
DEFAULT_THREADS = 1
