#!/usr/bin/env python3
"""
Installation de gramor : réduction de modèles stochastiques et bilinéaires par gramiens
"""

from setuptools import find_packages, setup


def read_requirements():
    with open('requirements.txt', encoding='utf-8') as f:
        lines = (line.strip() for line in f)
        return [line for line in lines if line and not line.startswith('#') and not line.startswith('pytest')]


setup(
    name='gramor',
    version='0.1.0',
    description="Réduction de modèles stochastiques et bilinéaires par gramiens, bornes d'erreur et simulation",
    packages=find_packages(exclude=('tests', 'tests.*')),
    python_requires='>=3.9',
    install_requires=read_requirements(),
    extras_require={'test': ['pytest>=7.4.0']},
    entry_points={
        'console_scripts': [
            'gramor=gramor.cli:main',
        ],
    },
)
