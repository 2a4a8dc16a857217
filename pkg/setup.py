# -*- coding: utf-8 -*-

from setuptools import setup, find_packages

with open('./requirements.txt') as f:
    required = f.read().splitlines()

setup(
    name='nulitenet',
    version='0.1.0',
    description='NU-LiteNet and SqueezeNet compact CNNs in numpy: graphs, training, checkpoints',
    author='tianyuzhiyou',
    packages=find_packages(exclude=('tests',)),
    install_requires=required,
    extras_require={
        'test': ['pytest>=7.0'],
        'plot': ['matplotlib>=3.5'],
    },
    entry_points={
        'console_scripts': ['nulitenet=nulitenet.cli:main'],
    },
    python_requires='>=3.8',
)
