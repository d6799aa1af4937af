#!/usr/bin/env python3
""" Simulate, study or control the chemotaxis-consumption model from a config file

Run the packaged simulation example:

.. code-block:: bash

    python chemotax.py simulate --out path/to/output

Run a convergence study from your own config on 4 processes:

.. code-block:: bash

    python chemotax.py convergence --config path/to/study.toml --jobs 4 --out path/to/output

Every run writes ``manifest.json`` to the output directory, listing the echoed
config, library versions and every file written. Failed runs also write
``error.json`` and exit with 2 (bad input), 3 (solver failure) or 4 (failed checks).

See ``chemotax.py --help`` for details on additional arguments and usage

"""

# Imports
import sys

# Our own imports
from chemotax.pipeline import run_chemotax_cmd

# Command line interface

if __name__ == '__main__':
    sys.exit(run_chemotax_cmd())
