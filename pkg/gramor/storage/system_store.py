import csv
import hashlib
import json
import os

import numpy as np

from gramor.console import print_success
from gramor.core.system_model import (
    BilinearControlSystem,
    GalerkinRom,
    StochasticLinearSystem,
    ensure_valid,
)
from gramor.exceptions import ValidationError

FORMAT_VERSION = 1


def _matrix(value):
    return np.asarray(value, dtype=float).tolist()


def format_number(x):
    """17 chiffres significatifs"""
    return format(float(x), '.17g')


def file_hash(path):
    digest = hashlib.sha256()
    with open(path, 'rb') as fh:
        for block in iter(lambda: fh.read(1 << 20), b''):
            digest.update(block)
    return digest.hexdigest()


def system_payload(sys):
    payload = {
        'format': FORMAT_VERSION,
        'kind': sys.kind,
        'n': sys.n,
        'm': sys.m,
        'q': sys.q,
        'A': _matrix(sys.A),
        'N': [_matrix(Ni) for Ni in sys.N],
        'B': _matrix(sys.B),
    }
    if isinstance(sys, BilinearControlSystem):
        payload['gamma'] = sys.gamma
    return payload


def system_hash(sys):
    """SHA-256 du JSON canonique du système (indépendant du fichier d'origine)"""
    text = json.dumps(system_payload(sys), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def _system_from_payload(data, source):
    try:
        kind = data['kind']
        A = np.array(data['A'], dtype=float)
        N = [np.array(Ni, dtype=float) for Ni in data.get('N', [])]
        B = np.array(data['B'], dtype=float)
    except (KeyError, TypeError, ValueError) as e:
        raise ValidationError(f"{source}: fichier système illisible ({e})") from e
    if kind == 'stochastic':
        sys = StochasticLinearSystem(A, tuple(N), B)
    elif kind == 'bilinear':
        sys = BilinearControlSystem(A, tuple(N), B, float(data.get('gamma', 1.0)))
    else:
        raise ValidationError(f"{source}: type de système inconnu {kind!r}")

    declared = {key: data.get(key) for key in ('n', 'm', 'q')}
    actual = {'n': sys.n, 'm': sys.m, 'q': sys.q}
    mismatch = [f"{k} déclaré {declared[k]} ≠ {actual[k]}"
                for k in declared if declared[k] is not None and declared[k] != actual[k]]
    if mismatch:
        raise ValidationError(f"{source}: dimensions incohérentes", mismatch)
    return ensure_valid(sys)


class SystemStore:
    """Lecture et écriture des fichiers d'échange (systèmes et ROM)"""

    def __init__(self, root='.'):
        self.root = root

    def _path(self, name):
        return name if os.path.isabs(name) else os.path.join(self.root, name)

    def _dump(self, payload, name):
        path = self._path(name)
        os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
        with open(path, 'w', encoding='utf-8') as fh:
            json.dump(payload, fh, indent=1)
        return path

    def save_system(self, sys, name):
        """Écrire le système ; retourne (chemin, hash du contenu)"""
        ensure_valid(sys)
        path = self._dump(system_payload(sys), name)
        print_success(f"Système {sys.kind} n={sys.n} écrit: {path}")
        return path, file_hash(path)

    def load_system(self, name):
        path = self._path(name)
        try:
            with open(path, encoding='utf-8') as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ValidationError(f"{path}: lecture impossible ({e})") from e
        return _system_from_payload(data, path)

    def save_rom(self, rom: GalerkinRom, name):
        payload = system_payload(rom.as_bilinear() if rom.kind == 'bilinear' else rom.as_stochastic())
        payload['projection'] = {
            'method': rom.method,
            'r': rom.r,
            'sourceDim': rom.sourceDim,
            'V': _matrix(rom.V),
            'W': _matrix(rom.W),
            'parent_hash': rom.parent_hash,
        }
        path = self._dump(payload, name)
        print_success(f"ROM {rom.method} r={rom.r} écrit: {path}")
        return path, file_hash(path)

    def load_rom(self, name, parent=None) -> GalerkinRom:
        """Relire un ROM ; avec le système parent, les matrices réduites sont recontrôlées"""
        path = self._path(name)
        try:
            with open(path, encoding='utf-8') as fh:
                data = json.load(fh)
            projection = data['projection']
        except (OSError, json.JSONDecodeError, KeyError) as e:
            raise ValidationError(f"{path}: fichier ROM illisible ({e})") from e

        reduced = _system_from_payload(data, path)
        V = np.array(projection['V'], dtype=float)
        W = np.array(projection['W'], dtype=float)
        rom = GalerkinRom(
            V=V, W=W,
            reducedA=reduced.A, reducedN=reduced.N, reducedB=reduced.B,
            method=projection['method'],
            sourceDim=int(projection['sourceDim']),
            kind=reduced.kind,
            gamma=getattr(reduced, 'gamma', 1.0),
            parent=parent,
            parent_hash=projection.get('parent_hash'),
        )
        if parent is not None:
            residuals = rom.projection_residuals(parent)
            worst = max([residuals['A'], residuals['B'], *residuals['N']])
            if worst > 1e-10 * (1.0 + np.linalg.norm(parent.A)):
                raise ValidationError(f"{path}: ROM incohérent avec le système parent (écart {worst:.3e})")
        return rom


def write_csv(path, rows, columns):
    """En-tête puis une ligne par dictionnaire ; réels à 17 chiffres significatifs"""
    os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([
                format_number(row[c]) if isinstance(row[c], (float, np.floating)) else row[c]
                for c in columns
            ])
    return path


def read_csv(path):
    with open(path, newline='', encoding='utf-8') as fh:
        return list(csv.DictReader(fh))
