import logging
import os

# PyPI:
import sentry_sdk

from fairsched import __version__

logger = logging.getLogger(__name__)


def init() -> bool:
    """
    Centralized error reporting to Sentry, when SENTRY_DSN is set.
    """
    sentry_dsn = os.environ.get("SENTRY_DSN")
    if not sentry_dsn:
        logger.debug("SENTRY_DSN not set; not reporting errors to Sentry")
        return False

    sentry_sdk.init(
        dsn=sentry_dsn,
        release=f"fairsched@{__version__}",
        environment=os.environ.get("STATSD_REALM", "development"),
    )
    return True
