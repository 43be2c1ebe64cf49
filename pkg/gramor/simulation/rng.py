"""
Flux de nombres aléatoires à compteur : un flux indépendant par trajectoire
"""

import numpy as np
from scipy.special import ndtri

_MASK64 = (1 << 64) - 1
_INV_2_53 = 2.0 ** -53


def _key(seed):
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"la graine doit être ≥ 0, reçu {seed}")
    return np.array([seed & _MASK64, (seed >> 64) & _MASK64], dtype=np.uint64)


def sample_stream(seed, sample_index):
    """Philox clé = graine, dernier mot du compteur = indice de la trajectoire"""
    counter = np.array([0, 0, 0, int(sample_index)], dtype=np.uint64)
    return np.random.Philox(key=_key(seed), counter=counter)


def uniforms(stream, size):
    """Uniformes dans ]0, 1[ au centre de la grille 2⁻⁵³ (jamais 0 ni 1)"""
    raw = stream.random_raw(int(size))
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _INV_2_53


def wiener_increments(seed, sample_index, steps, channels, h):
    """
    ΔW de forme (steps, channels), N(0, h), par inversion de la fonction de répartition ;
    le tirage (pas k, canal i) ne dépend que de (graine, trajectoire, k, i)
    """
    if channels == 0:
        return np.zeros((steps, 0))
    stream = sample_stream(seed, sample_index)
    z = ndtri(uniforms(stream, steps * channels))
    return np.sqrt(h) * z.reshape(steps, channels)


def wiener_block(seed, first_sample, count, steps, channels, h):
    """Incréments d'un lot de trajectoires consécutives : (steps, channels, count)"""
    out = np.empty((steps, channels, count))
    for j in range(count):
        out[:, :, j] = wiener_increments(seed, first_sample + j, steps, channels, h)
    return out
