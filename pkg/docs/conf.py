# Configuration file for the Sphinx documentation builder.
#
# https://www.sphinx-doc.org/en/master/usage/configuration.html

# -- Path setup --------------------------------------------------------------

import sys
import pathlib

# Document the source tree without installing it
sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / 'src'))

from chemotax import __version__

# -- Project information -----------------------------------------------------

project = 'chemotax'
copyright = '2026, chemotax developers'
author = 'chemotax developers'
release = __version__

# -- General configuration ---------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
]
autodoc_member_order = 'bysource'

templates_path = ['_templates']
exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']

# -- Options for HTML output -------------------------------------------------

html_theme = 'alabaster'
html_static_path = ['_static']
