""" Configuration objects and defaults

Example: Load a run configuration from disk, change some attributes, write it back to disk

.. code-block:: python

    config = RunConfig.load_config_file('path/to/run.toml')
    config.scheme['k'] = 1/128
    config.save_config_file('path/to/run.toml')

Attributes are assumed to be basic python types that can be serialized to/from `TOML <https://toml.io/en/>`_
or JSON. The format is chosen by the file suffix, ``.json`` for JSON and anything else for TOML.

.. note:: This framework assumes the arguments to ``__init__`` are the same as the public attributes of the class.

    Private attributes are not saved

Classes:

* :py:class:`Configurable`: Enable a pipeline class to be saved/loaded from disk

Functions:

* :py:func:`load_mapping`: Load a TOML or JSON file into plain python containers
* :py:func:`merge_config`: Recursively overlay one config mapping on another
* :py:func:`load_default_mapping`: Load a packaged default config as plain python containers

"""

# Imports
import copy
import json
import pathlib
from importlib import resources
from typing import Any, Dict, Mapping, Union

# 3rd party
import tomlkit

# Functions


def _parse_text(text: str, fmt: str) -> Dict[str, Any]:
    """ Parse a config string into plain dictionaries """
    if fmt == 'json':
        return json.loads(text)
    if fmt == 'toml':
        return tomlkit.loads(text).unwrap()
    raise ValueError(f'Unknown config format "{fmt}", expected "toml" or "json"')


def _format_for(config_file: pathlib.Path) -> str:
    return 'json' if config_file.suffix.lower() == '.json' else 'toml'


def load_mapping(config_file: Union[str, pathlib.Path]) -> Dict[str, Any]:
    """ Load a config file into plain python dictionaries

    :param Path config_file:
        Path to a ``.toml`` or ``.json`` file
    :returns:
        The parsed contents as nested dictionaries and lists
    """
    config_file = pathlib.Path(config_file)
    with config_file.open('rt') as fp:
        text = fp.read()
    return _parse_text(text, _format_for(config_file))


def merge_config(base: Mapping[str, Any], override: Mapping[str, Any]) -> Dict[str, Any]:
    """ Overlay ``override`` on ``base``, merging nested tables key by key

    :param dict base:
        The default values
    :param dict override:
        Values that replace the defaults
    :returns:
        A new dictionary, neither input is modified
    """
    merged = copy.deepcopy(dict(base))
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = merge_config(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged

# Classes


class Configurable(object):
    """ Base class for pipeline objects that can be saved/loaded from disk

    Alternative constructors:

    * :py:meth:`load_default`: Load the default config under this folder
    * :py:meth:`load_config_file`: Load a config file from disk
    * :py:meth:`load_config`: Load a config from a string

    Methods:

    * :py:meth:`save_config_file`: Save the current config file to disk
    * :py:meth:`save_config`: Save the current config to a string
    * :py:meth:`to_dict`: The public attributes as a dictionary

    """

    def to_dict(self) -> Dict[str, Any]:
        """ Public attributes of this object

        :returns:
            A deep copy of every attribute not starting with '_'
        """
        return copy.deepcopy({k: v for k, v in vars(self).items() if not k.startswith('_')})

    def save_config_file(self, config_file: Union[str, pathlib.Path]):
        """ Write the class attributes to a file

        :param Path config_file:
            Path to the config file to write, ``.json`` files are written as JSON
        """
        config_file = pathlib.Path(config_file)
        config_file.parent.mkdir(parents=True, exist_ok=True)

        with config_file.open('wt') as fp:
            fp.write(self.save_config(fmt=_format_for(config_file)))

    def save_config(self, fmt: str = 'toml') -> str:
        """ Write the class attributes to a string

        :param str fmt:
            Either 'toml' or 'json'
        :returns:
            A formatted string that represents this class
        """
        self_dict = self.to_dict()
        if fmt == 'json':
            return json.dumps(self_dict, indent=2, sort_keys=True)
        if fmt == 'toml':
            return tomlkit.dumps(self_dict)
        raise ValueError(f'Unknown config format "{fmt}", expected "toml" or "json"')

    @classmethod
    def load_config_file(cls, config_file: Union[str, pathlib.Path]) -> 'Configurable':
        """ Load the class from a config file

        :param Path config_file:
            Path to the config file to read
        :returns:
            An instance of the class initialized with the parameters in the config
        """
        return cls(**load_mapping(config_file))

    @classmethod
    def load_config(cls, config: str, fmt: str = 'toml') -> 'Configurable':
        """ Load the class from a config string

        :param str config:
            The TOML (or JSON) formatted config string for this class
        :param str fmt:
            Either 'toml' or 'json'
        :returns:
            An instance of the class initialized with the parameters in the config
        """
        return cls(**_parse_text(config, fmt))

    @classmethod
    def load_default(cls, config_name: str) -> 'Configurable':
        """ Load the class from a default config defined in this module

        :param str config_name:
            The name of the default config to load
        :returns:
            An instance of the class initialized with the parameters in the config
        """
        return cls(**load_default_mapping(config_name))


def load_default_mapping(config_name: str) -> Dict[str, Any]:
    """ Load one of the packaged TOML files as plain dictionaries

    :param str config_name:
        Name of the file under this package, with or without the '.toml' suffix
    :returns:
        The parsed contents
    """
    # Remove any path information
    config_name = pathlib.Path(config_name).name
    if not config_name.endswith('.toml'):
        config_name = config_name + '.toml'

    config_file = resources.files(__package__) / config_name
    with config_file.open('rt') as fp:
        return _parse_text(fp.read(), 'toml')
