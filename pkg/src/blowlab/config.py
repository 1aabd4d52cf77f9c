"""Flat `key = value` parameter files and their JSON twins.

Grammar: one `identifier = value` pair per line, `#` starts a comment,
blank lines ignored.  Keys are exactly R, K, M, p, C, D, E, A, tau, u,
kind; unknown keys are rejected.  Floats are written with 17 significant
digits so parse(format(params)) is the identity.
"""

from __future__ import annotations

import json
import re

from .errors import ParameterDomainError
from .model import ModelParams, params_from_dict, params_to_dict

_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(\S+)\s*$")


def parse_config_text(text: str) -> ModelParams:
    data = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.match(line)
        if not m:
            raise ParameterDomainError(f"bad config line {lineno}: {raw!r}")
        key, value = m.group(1), m.group(2)
        if key in data:
            raise ParameterDomainError(f"duplicate key {key!r} on line {lineno}")
        data[key] = value
    return params_from_dict(data)


def format_config(params: ModelParams) -> str:
    d = params_to_dict(params)
    lines = []
    for key, value in d.items():
        if key == "kind":
            lines.append(f"{key} = {value}")
        else:
            lines.append(f"{key} = {value:.17g}")
    return "\n".join(lines) + "\n"


def load_params(path) -> ModelParams:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if str(path).endswith(".json"):
        return params_from_dict(json.loads(text))
    return parse_config_text(text)


def save_params(params: ModelParams, path):
    with open(path, "w", encoding="utf-8") as fh:
        if str(path).endswith(".json"):
            json.dump(params_to_dict(params), fh, indent=2)
            fh.write("\n")
        else:
            fh.write(format_config(params))
