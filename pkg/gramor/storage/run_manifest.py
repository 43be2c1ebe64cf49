import json
import os
import platform
import time
from contextlib import contextmanager
from datetime import datetime

import psutil

from gramor import __version__
from gramor.console import print_info
from gramor.exceptions import ValidationError
from gramor.storage.system_store import file_hash


def host_info():
    memory = psutil.virtual_memory()
    return {
        'platform': platform.platform(),
        'python': platform.python_version(),
        'cpu_physical': psutil.cpu_count(logical=False),
        'cpu_logical': psutil.cpu_count(logical=True),
        'memory_total': memory.total,
    }


class RunManifest:
    """Trace d'une exécution : commande, paramètres effectifs, hash des entrées, durées"""

    def __init__(self, command, config, argv=None):
        self.command = command
        self.config = dict(config)
        self.argv = list(argv or [])
        self.inputs = {}
        self.outputs = {}
        self.stages = {}
        self.started_at = datetime.now().isoformat()
        self.finished_at = None

    def record_input(self, path):
        self.inputs[os.path.abspath(path)] = file_hash(path)

    def record_output(self, path):
        self.outputs[os.path.abspath(path)] = file_hash(path)

    @contextmanager
    def stage(self, name):
        started = time.time()
        try:
            yield
        finally:
            elapsed = time.time() - started
            self.stages[name] = elapsed
            print_info(f"étape {name}: {elapsed:.2f}s")

    def to_dict(self):
        return {
            'command': self.command,
            'argv': self.argv,
            'config': self.config,
            'version': __version__,
            'inputs': self.inputs,
            'outputs': self.outputs,
            'stages': self.stages,
            'started_at': self.started_at,
            'finished_at': self.finished_at,
            'host': host_info(),
        }

    def write(self, directory, name='manifest.json'):
        self.finished_at = datetime.now().isoformat()
        os.makedirs(directory, exist_ok=True)
        path = os.path.join(directory, name)
        with open(path, 'w', encoding='utf-8') as fh:
            json.dump(self.to_dict(), fh, indent=2, default=str)
        return path

    @staticmethod
    def load(path):
        try:
            with open(path, encoding='utf-8') as fh:
                return json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ValidationError(f"manifeste illisible {path}: {e}") from e
