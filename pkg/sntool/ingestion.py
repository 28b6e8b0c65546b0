# sntool/ingestion.py
"""
Dataset cache. `fetch_dataset` downloads a LibSVM binary dataset with
libsvmdata and writes it as LibSVM text into the data directory, where the
`libsvm` problem source picks it up by name.
"""
import logging
import os
from dataclasses import dataclass
from typing import Dict, Optional

from sklearn.datasets import dump_svmlight_file

from .config import DATA_DIR
from .errors import ConfigError, DataError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DatasetInfo:
    """Remote name plus the reference size and L_max (lam = 1/n, intercept included)."""
    remote: str
    n: int
    d: int
    lmax: float
    large: bool = False


DATASETS: Dict[str, DatasetInfo] = {
    "phishing": DatasetInfo("phishing", 11055, 69, 0.5001),
    "mushrooms": DatasetInfo("mushrooms", 8124, 113, 5.5001),
    "ijcnn1": DatasetInfo("ijcnn1", 49990, 23, 1.2342),
    "covtype": DatasetInfo("covtype.binary", 581012, 55, 2.154),
    "webspam": DatasetInfo("webspam", 350000, 255, 0.5, large=True),
    "epsilon": DatasetInfo("epsilon", 400000, 2001, 0.5, large=True),
    "rcv1": DatasetInfo("rcv1.binary", 20242, 47237, 0.5, large=True),
    "real-sim": DatasetInfo("real-sim", 72309, 20959, 0.5, large=True),
}


def dataset_path(name: str, data_dir: Optional[str] = None) -> str:
    return os.path.join(data_dir or DATA_DIR, name)


def is_cached(name: str, data_dir: Optional[str] = None) -> bool:
    return os.path.exists(dataset_path(name, data_dir))


def fetch_dataset(name: str, data_dir: Optional[str] = None, replace: bool = False) -> str:
    """Download `name` into the data dir unless it is already there; returns the path."""
    if name not in DATASETS:
        raise ConfigError(f"unknown dataset {name!r}; known: {sorted(DATASETS)}")
    path = dataset_path(name, data_dir)
    if is_cached(name, data_dir) and not replace:
        logger.info("Dataset %s already cached at %s", name, path)
        return path

    from libsvmdata import fetch_libsvm

    info = DATASETS[name]
    logger.info("Fetching %s (%s)%s", name, info.remote, " - large download" if info.large else "")
    try:
        X, y = fetch_libsvm(info.remote)
    except Exception as exc:
        raise DataError(f"could not fetch dataset {name}: {exc}") from exc

    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    tmp = path + ".part"
    dump_svmlight_file(X, y, tmp, zero_based=False)
    os.replace(tmp, path)
    logger.info("Wrote %s rows to %s", X.shape[0], path)
    return path
