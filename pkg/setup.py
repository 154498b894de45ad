import sys
from os import path

import setuptools  # type: ignore

this_directory = path.abspath(path.dirname(__file__))
with open(path.join(this_directory, 'README.md'), encoding='utf-8') as f:
    long_description = f.read()

REQUIREMENTS = [i.strip() for i in open("requirements.txt").readlines() if i.strip()]

sys.path.insert(0, this_directory)
from deltaspec import __version__

setuptools.setup(
    name='deltaspec',
    version=__version__,
    python_requires='>=3.9',
    packages=['deltaspec'],
    package_data={
        "deltaspec": ["py.typed"]
    },
    description='Spectra, resolvents and bound checks for renormalized point interactions on manifolds.',
    install_requires=REQUIREMENTS,
    entry_points={
        'console_scripts': ['deltaspec=deltaspec.cli:main'],
    },
    license='MIT',
    long_description=long_description,
    long_description_content_type='text/markdown',
    classifiers=[
        'Development Status :: 3 - Alpha',

        'Topic :: Scientific/Engineering :: Physics',
        'Topic :: Scientific/Engineering :: Mathematics',

        'License :: OSI Approved :: MIT License',

        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Programming Language :: Python :: 3.12',
    ])
