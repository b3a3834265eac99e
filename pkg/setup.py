#!/usr/bin/env python

from setuptools import setup
import os
import sys

if sys.version_info < (3, 8):
    sys.exit('Sorry, Python < 3.8 is not supported.')


# Utility function to read the README file for the long_description.
def read(fname):
    return open(os.path.join(os.path.dirname(__file__), fname)).read()


with open('selfadjust_toolbox/__init__.py', 'rb') as fid:
    for line in fid:
        line = line.decode('utf-8')
        if line.startswith('__version__'):
            version = line.strip().split()[-1][1:-1]
            break


setup(name='selfadjust_toolbox',
      version=version,
      description=('Parallel self-adjusting computation: record a run once, '
                   'then propagate batches of input changes.'),
      author=u'Self-Adjusting Toolbox developers',
      packages=['selfadjust_toolbox'],
      package_data={'': ['readme.rst']},
      long_description=read('readme.rst'),
      keywords=['self-adjusting computation', 'incremental computation',
                'change propagation', 'fork-join', 'dynamic algorithms'],
      install_requires=['numpy', 'click'],
      extras_require={'docs': ['sphinx', 'numpydoc']},
      setup_requires=['pytest-runner'],
      tests_require=['pytest', 'hypothesis'],
      entry_points={
          'console_scripts': ['selfadjust-bench=selfadjust_toolbox.cli:main'],
      },
      include_package_data=True
      )
