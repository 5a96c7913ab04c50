import combelm
import setuptools
from os import path

this_directory = path.abspath(path.dirname(__file__))

with open(path.join(this_directory, 'README.md'), encoding='utf-8') as f:
  long_description = f.read()

setuptools.setup(
    name='combelm',
    version=combelm.__version__,
    description='Simulator of an extreme learning machine built on an optical frequency comb.',
    long_description=long_description,
    long_description_content_type='text/markdown',
    license='GPL 3.0',
    packages=setuptools.find_packages(exclude=('tests',)),
    package_data={
        'combelm': ['data/README.md', 'data/checksums.json', 'data/*.data', 'data/*.txt']
    },
    python_requires='>=3.8',
    install_requires=['dataclasses_json', 'numpy>=1.20', 'scipy', 'scikit-learn'],
    extras_require={'test': ['pytest']},
    entry_points={'console_scripts': ['combelm=combelm.__main__:main']},
    classifiers=[
        'Programming Language :: Python :: 3',
        'License :: OSI Approved :: GNU General Public License v3 or later (GPLv3+)',
        'Operating System :: OS Independent',
        'Topic :: Scientific/Engineering :: Physics',
    ],
)
