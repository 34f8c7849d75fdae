"""Run configuration: defaults, JSON round-trip with unknown-key rejection,
and the per-run reproducibility block."""

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field

from .solver import TrainConfig

ENV_CONFIG = "INVDYN_CONFIG"


class ConfigError(ValueError):
    pass


@dataclass
class ContactConfig:
    stiffness: float = 3.0e4
    damping: float = 300.0
    friction: float = 0.9
    tangential_damping: float = 300.0


@dataclass
class LibraryConfig:
    categories: list = field(default_factory=lambda: [
        "stand", "gait", "squat", "wave", "jump", "kneel",
        "pendulum1", "pendulum2"])
    # category -> [count, seconds]; None entries fall back to built-in plan
    plan: dict = field(default_factory=dict)
    beta_spread: float = 0.04
    debug_channel: bool = True


@dataclass
class RunConfig:
    model: str = "humanoid-lite"
    dataset: str = ""
    out: str = "out"
    seed: int = 0
    threads: int = 1
    split: float = 0.9
    filter_hz: float = 14.0
    contact: ContactConfig = field(default_factory=ContactConfig)
    library: LibraryConfig = field(default_factory=LibraryConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        base = cls()
        allowed = set(asdict(base))
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key, val in d.items():
            if key == "contact":
                kwargs[key] = _sub(ContactConfig, val)
            elif key == "library":
                kwargs[key] = _sub(LibraryConfig, val)
            elif key == "train":
                try:
                    kwargs[key] = TrainConfig.from_dict(val)
                except ValueError as e:
                    raise ConfigError(str(e))
            else:
                kwargs[key] = val
        return cls(**kwargs)

    @classmethod
    def load(cls, path):
        try:
            with open(path) as f:
                data = json.load(f)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path!r}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}")
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        return cls.from_dict(data)


def _sub(cls, val):
    if not isinstance(val, dict):
        raise ConfigError(f"{cls.__name__} section must be an object")
    allowed = set(asdict(cls()))
    unknown = set(val) - allowed
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**val)


def default_config_path():
    return os.environ.get(ENV_CONFIG, "")


def config_json(cfg):
    return json.dumps(cfg.to_dict(), indent=1, sort_keys=True)


def write_run_info(out_dir, cfg, inputs=None, extra=None):
    """Reproducibility block: config echo, seed, content hashes of inputs."""
    os.makedirs(out_dir, exist_ok=True)
    hashes = {}
    for name, path in (inputs or {}).items():
        if path and os.path.isfile(path):
            h = hashlib.sha256()
            with open(path, "rb") as f:
                for chunk in iter(lambda: f.read(1 << 20), b""):
                    h.update(chunk)
            hashes[name] = h.hexdigest()
        elif path:
            hashes[name] = "missing"
    info = {"config": cfg.to_dict(), "seed": cfg.seed,
            "input_hashes": hashes}
    if extra:
        info.update(extra)
    path = os.path.join(out_dir, "run_info.json")
    with open(path, "w") as f:
        json.dump(info, f, indent=1, sort_keys=True)
        f.write("\n")
    return path
