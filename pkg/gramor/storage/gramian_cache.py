import os

import joblib

from gramor.console import print_success, print_warning


class GramianCache:
    """Gramiens (P, Q, spectre) persistés par hash du système"""

    def __init__(self, root):
        self.root = root

    def path(self, key):
        return os.path.join(self.root, 'gramians', f'{key}.pkl')

    def load(self, key):
        """Entrées connues pour ce système ({} si absent ou illisible)"""
        path = self.path(key)
        if not os.path.exists(path):
            return {}
        try:
            entries = joblib.load(path)
            print_success(f"Gramiens rechargés: {', '.join(sorted(entries))}")
            return entries
        except Exception as e:
            print_warning(f"cache de gramiens illisible ({path}): {e}")
            return {}

    def save(self, key, **entries):
        """Fusionner les entrées fournies avec celles déjà en cache"""
        merged = self.load(key)
        merged.update({name: value for name, value in entries.items() if value is not None})
        path = self.path(key)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        joblib.dump(merged, path)
        return path
