# -*- coding: utf-8 -*-

#  Copyright (c) 2024. multisource-tta developers. See the LICENSE

# Sphinx configuration of the simulator API reference.

import os
import sys

sys.path.insert(0, os.path.abspath(".."))

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.autosummary",
    "sphinx.ext.intersphinx",
    "sphinx.ext.mathjax",
    "sphinx.ext.napoleon",
    "sphinx.ext.viewcode",
    "sphinx_autodoc_typehints",
]
source_suffix = ".rst"
master_doc = "index"
project = "multisource_tta"
year = "2024"
author = "multisource-tta developers"
copyright = f"{year}, {author}"
# Bumped by tbump together with pyproject.toml and the package
version = "0.1.0"
release = version
pygments_style = "trac"

intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable/", None),
    "pandas": ("https://pandas.pydata.org/docs/", None),
}
autodoc_member_order = "bysource"
autodoc_default_options = {"members": True, "show-inheritance": True}
# Ledgers and records are dataclasses; their fields are documented in the class docstrings
napoleon_use_ivar = True
napoleon_use_rtype = False
napoleon_use_param = False

if os.environ.get("READTHEDOCS", None) != "True":
    html_theme = "sphinx_rtd_theme"
html_last_updated_fmt = "%b %d, %Y"
html_short_title = f"{project}-{version}"
