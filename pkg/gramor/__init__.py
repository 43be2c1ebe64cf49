"""
gramor - réduction de modèles stochastiques et bilinéaires par gramiens d'atteignabilité
"""

__version__ = '0.1.0'
