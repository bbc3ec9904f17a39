import copy
import json

from supmech.config import default_config_path, parse_config


def default_dict() -> dict:
    return json.loads(default_config_path().read_text())


def config_from(mutate=None):
    data = copy.deepcopy(default_dict())
    if mutate is not None:
        mutate(data)
    return parse_config(data)
