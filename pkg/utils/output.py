import os
import json
import logging
from datetime import datetime

import numpy as np
import pandas as pd

from barropt_logging.logger_config import logger
from utils import __version__


logger = logging.getLogger('utils.output')

FLOAT_FORMAT = '%.17g'


def _default(obj):
    """json.dump fallback for numpy scalars and arrays."""
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, pd.DataFrame):
        return obj.to_dict(orient='records')
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def make_header(command, config):
    """Header block carried by every output: command, config echo, version, timestamp."""
    return {
        'command': command,
        'version': __version__,
        'created': datetime.now().isoformat(timespec='seconds'),
        'config': config,
    }


def write_json(path, header, result):
    _ensure_dir(path)
    with open(path, 'w') as f:
        json.dump({'header': header, 'result': result}, f, indent=2, default=_default)
    logger.info(f"   wrote {path}")


def write_csv(path, frame: pd.DataFrame, header=None):
    """CSV with the header block as leading '# ' comment lines (read back with comment='#')."""
    _ensure_dir(path)
    with open(path, 'w', newline='') as f:
        if header is not None:
            for line in json.dumps(header, default=_default).splitlines():
                f.write(f"# {line}\n")
        frame.to_csv(f, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"   wrote {path} ({len(frame)} rows)")


def read_csv(path):
    return pd.read_csv(path, comment='#')


def _ensure_dir(path):
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
