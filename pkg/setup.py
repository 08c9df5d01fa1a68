#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""The setup script."""

from setuptools import setup, find_packages

with open('README.rst') as readme_file:
    readme = readme_file.read()

requirements = [
    'matplotlib',
    'numpy',
    'pandas',
    'ruamel.yaml',
    'scipy',
    'shapely',
]

setup_requirements = [ ]

test_requirements = ['pytest', ]

setup(
    author="eertrack developers",
    classifiers=[
        'Development Status :: 2 - Pre-Alpha',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: GNU General Public License v3 or later (GPLv3+)',
        'Natural Language :: English',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
    ],
    description="Particle filter target tracking with expected entropy reduction guidance.",
    install_requires=requirements,
    license="GNU General Public License v3",
    long_description=readme,
    include_package_data=True,
    keywords='particle filter tracking entropy guidance transformer',
    name='eertrack',
    packages=find_packages(include=['eertrack', 'eertrack.*']),
    entry_points={
        'console_scripts': [
            'eertrack = eertrack.harness:main',
        ]
    },
    setup_requires=setup_requirements,
    test_suite='tests',
    tests_require=test_requirements,
    version='0.1.0',
    zip_safe=False,
)
