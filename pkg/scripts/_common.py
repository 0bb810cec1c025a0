from importlib.resources import files

from nschs.config import parse_config


def shipped(name: str, **changes):
    cfg = parse_config(str(files("nschs") / "configs" / f"{name}.ini"))
    return cfg.with_changes(**changes) if changes else cfg
