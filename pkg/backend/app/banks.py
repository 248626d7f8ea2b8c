"""
Bank Store - lazily built, shared sample banks for the limit laws.

Banks are immutable once built. The store keeps them in memory and, when a
directory is configured, also on disk as CSV so later runs can reuse them.
"""

import logging
from pathlib import Path
from threading import Lock
from typing import Dict, Optional, Tuple, Union

from app import settings
from app.services.limits import hitting_time_bank
from app.services.stats import EcdfBank

logger = logging.getLogger(__name__)

BankKey = Tuple[str, float, int, int]


class BankStore:
    """Cache of W banks keyed by (law, alpha, size, seed)."""

    def __init__(self, directory: Optional[Union[str, Path]] = None):
        self.directory = Path(directory) if directory else None
        self._banks: Dict[BankKey, EcdfBank] = {}
        self._lock = Lock()

    def __len__(self) -> int:
        return len(self._banks)

    def _path(self, key: BankKey) -> Optional[Path]:
        if self.directory is None:
            return None
        law, alpha, size, seed = key
        return self.directory / f"{law}_alpha{alpha:g}_n{size}_seed{seed}.csv"

    def w_bank(self, alpha: float, size: Optional[int] = None, seed: int = 0) -> EcdfBank:
        """The W_alpha(1) bank, built on first use."""
        key: BankKey = ("W", float(alpha), settings.W_BANK_SIZE if size is None else size, seed)
        with self._lock:
            if key in self._banks:
                return self._banks[key]
            path = self._path(key)
            if path is not None and path.exists():
                bank = EcdfBank.load(path)
                logger.info(f"Loaded bank {path.name}")
            else:
                bank = hitting_time_bank(key[1], key[2], key[3])
                if path is not None:
                    bank.save(path)
            self._banks[key] = bank
            return bank

    def clear(self) -> None:
        with self._lock:
            self._banks.clear()
