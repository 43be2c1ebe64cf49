"""
Affichage console coloré partagé par la bibliothèque et la CLI
"""

import os
import sys


class Colors:
    BLUE = '\033[94m'
    GREEN = '\033[92m'
    YELLOW = '\033[93m'
    RED = '\033[91m'
    END = '\033[0m'
    BOLD = '\033[1m'


def _verbosity():
    try:
        return int(os.getenv('GRAMOR_VERBOSITY', '1'))
    except ValueError:
        return 1


def _emit(message, stream=None):
    # stderr: stdout reste réservé aux artefacts redirigés par l'utilisateur
    print(message, file=stream or sys.stderr, flush=True)


def print_step(message):
    if _verbosity() >= 1:
        _emit(f"{Colors.BLUE}{Colors.BOLD}[ÉTAPE]{Colors.END} {message}")


def print_success(message):
    if _verbosity() >= 1:
        _emit(f"{Colors.GREEN}✓{Colors.END} {message}")


def print_info(message):
    """Ligne de détail (solveurs, itérations), visible en verbosité 2"""
    if _verbosity() >= 2:
        _emit(f"  → {message}")


def print_warning(message):
    if _verbosity() >= 1:
        _emit(f"{Colors.YELLOW}⚠{Colors.END} {message}")


def print_error(message):
    _emit(f"{Colors.RED}✗{Colors.END} {message}")


def print_banner(title):
    if _verbosity() >= 1:
        _emit("=" * 60)
        _emit(f"{Colors.BOLD}{title}{Colors.END}")
        _emit("=" * 60)
