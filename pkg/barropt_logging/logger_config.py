import logging

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    # level=logging.DEBUG,
    format="%(asctime)s %(levelname)-5s [%(name)-22s]  %(message)s",
    handlers=[
        logging.StreamHandler(),  # Logs to console (stderr)
        # logging.FileHandler("barropt.log", mode='w')  # Logs to file
    ]
)

logger = logging.getLogger(__name__)


def set_verbosity(quiet=False, verbose=False):
    """Adjust the root level for the CLI --quiet / --verbose flags."""
    root = logging.getLogger()
    if quiet:
        root.setLevel(logging.WARNING)
    elif verbose:
        root.setLevel(logging.DEBUG)
    else:
        root.setLevel(logging.INFO)
