"""
Configuration par variables d'environnement (voir .env.example)
"""

import os
from dataclasses import dataclass

import psutil


def _env_int(name, default):
    raw = os.getenv(name)
    if raw is None or raw.strip() == '':
        return default
    try:
        return int(raw)
    except ValueError:
        return default


def default_threads():
    """Nombre de cœurs physiques, 1 si psutil ne sait pas répondre"""
    try:
        count = psutil.cpu_count(logical=False)
    except Exception:
        count = None
    return int(count or 1)


@dataclass(frozen=True)
class Settings:
    threads: int = 1
    output_dir: str = 'runs'
    seed: int = 0
    kron_cutoff: int = 60
    dense_eig_cutoff: int = 60
    max_iter: int = 10000
    chunk_size: int = 250
    verbosity: int = 1

    @classmethod
    def from_env(cls):
        return cls(
            threads=max(1, _env_int('GRAMOR_THREADS', default_threads())),
            output_dir=os.getenv('GRAMOR_OUTPUT_DIR', 'runs'),
            seed=_env_int('GRAMOR_SEED', 0),
            kron_cutoff=_env_int('GRAMOR_KRON_CUTOFF', 60),
            dense_eig_cutoff=_env_int('GRAMOR_DENSE_EIG_CUTOFF', 60),
            max_iter=_env_int('GRAMOR_MAX_ITER', 10000),
            chunk_size=max(1, _env_int('GRAMOR_CHUNK_SIZE', 250)),
            verbosity=_env_int('GRAMOR_VERBOSITY', 1),
        )


def get_settings():
    return Settings.from_env()
