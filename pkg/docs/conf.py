# -*- coding: utf-8 -*-
#
# Greensec documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.

import sys
import os

# The package lives one directory up.
sys.path.insert(0, os.path.abspath('..'))

import greensec

# -- General configuration ------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.intersphinx',
]

templates_path = ['_templates']

source_suffix = '.rst'

master_doc = 'index'

project = greensec.PRJ
copyright = u'2020-2021, {0}'.format(greensec.AUTHOR)

version = '.'.join(greensec.VERSION[:2])
release = greensec.STR_VERSION

exclude_patterns = ['_build']

pygments_style = 'sphinx'

# -- Options for HTML output ----------------------------------------------

html_theme = 'default'

html_static_path = ['_static']

htmlhelp_basename = 'Greensecdoc'

# -- Options for LaTeX output ---------------------------------------------

latex_elements = {
}

latex_documents = [
  ('index', 'Greensec.tex', u'Greensec Documentation',
   greensec.AUTHOR, 'manual'),
]

# -- Options for manual page output ---------------------------------------

man_pages = [
    ('index', 'greensec', u'Greensec Documentation',
     [greensec.AUTHOR], 1)
]

intersphinx_mapping = {
    'python': ('https://docs.python.org/3', None),
    'numpy': ('https://numpy.org/doc/stable', None),
}
