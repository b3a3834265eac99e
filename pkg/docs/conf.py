#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# Self-Adjusting Toolbox documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.

import os
import sys

# Find modules and their help for inclusion in documentation
sys.path.insert(0, os.path.abspath('.'))
sys.path.append('..')

from selfadjust_toolbox import __version__, __title__, __author__, \
    __license__, __copyright__

# -- General configuration ------------------------------------------------

extensions = ['sphinx.ext.autodoc',
              'numpydoc',
              'sphinx.ext.doctest',
              'sphinx.ext.todo',
              'sphinx.ext.coverage',
              'sphinx.ext.viewcode',
              'sphinx.ext.githubpages',
              'sphinx.ext.autosummary']

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

numpydoc_show_class_members = False

project = 'Self-Adjusting Toolbox'
copyright = __copyright__
author = __author__

# The short X.Y version and the full version, including alpha/beta/rc tags.
version = __version__
release = version

language = None
exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']
pygments_style = 'sphinx'
todo_include_todos = True

# -- Options for HTML output ----------------------------------------------

html_theme = 'alabaster'
html_sidebars = {
    '**': [
        'about.html', 'navigation.html', 'searchbox.html', 'sourcelink.html',
    ]
}
html_static_path = []
htmlhelp_basename = 'SelfAdjustingToolboxdoc'
html_theme_options = {
    'logo_name': 'SAT',
    'description': 'Parallel change propagation over recorded runs',
}

# -- Options for LaTeX output ---------------------------------------------

latex_documents = [
    (master_doc, 'SelfAdjustingToolbox.tex',
     'Self-Adjusting Toolbox Documentation', author, 'manual'),
]

man_pages = [
    (master_doc, 'selfadjust_toolbox', 'Self-Adjusting Toolbox Documentation',
     [author], 1)
]
