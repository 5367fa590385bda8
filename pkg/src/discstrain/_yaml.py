"""YAML reading shared by the document loaders."""
from __future__ import annotations

import re

import yaml


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads exponent floats without a dot, e.g. ``1e-3``."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?[0-9]+[eE][-+]?[0-9]+$"),
    list("-+0123456789"),
)


def load_yaml(text: str):
    return yaml.load(text, Loader=_Loader)
