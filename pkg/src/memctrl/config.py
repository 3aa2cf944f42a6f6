"""Run configuration: flat key = value text files, validation, fingerprint.

Unknown keys in a config file are hard errors so typos fail fast. The
fingerprint is a SHA-256 over the canonical serialization and is embedded
in checkpoints to reject mismatched config/checkpoint pairs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields

POLICY_KINDS = ("ltc", "oldest", "random")


@dataclass
class Config:
    mem_size: int = 1000
    key_dim: int = 32
    k_sparse: int = 10
    hidden_dim: int = 32
    input_dim: int = 32
    vocab_size: int = 200
    n_way: int = 5
    k_shot: int = 1
    episodes_per_batch: int = 16
    learning_rate: float = 0.01
    baseline_enabled: bool = True
    supervised_aux_enabled: bool = False
    seed: int = 0
    policy: str = "ltc"
    max_training_batches: int = 2000

    def validate(self):
        positive = ("mem_size", "key_dim", "k_sparse", "hidden_dim", "input_dim",
                    "vocab_size", "n_way", "k_shot", "episodes_per_batch",
                    "max_training_batches")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        # learning_rate 0 is allowed: it freezes the encoder while the
        # memory still evolves through its operations.
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.key_dim != self.hidden_dim:
            raise ValueError("key_dim must equal hidden_dim so states dot keys directly")
        if self.policy not in POLICY_KINDS:
            raise ValueError(f"policy must be one of {POLICY_KINDS}")
        if self.k_sparse > self.mem_size:
            raise ValueError("k_sparse cannot exceed mem_size")
        return self


def _parse_value(field_type, raw: str):
    if field_type is bool:
        low = raw.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if field_type is int:
        return int(raw)
    if field_type is float:
        return float(raw)
    return raw


def load_config(path) -> Config:
    """Read a key = value config file; '#' starts a comment."""
    types = {f.name: f.type for f in fields(Config)}
    # dataclass field types arrive as strings under future annotations
    resolved = {"int": int, "float": float, "bool": bool, "str": str}
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}: line {line_no}: expected 'key = value'")
            key, _, val = line.partition("=")
            key = key.strip()
            val = val.strip()
            if key not in types:
                raise ValueError(f"{path}: line {line_no}: unknown config key {key!r}")
            ftype = types[key]
            if isinstance(ftype, str):
                ftype = resolved[ftype]
            values[key] = _parse_value(ftype, val)
    return Config(**values).validate()


def serialize_config(config: Config) -> str:
    """Canonical text form: declaration order, one key = value per line."""
    lines = [f"{f.name} = {getattr(config, f.name)}" for f in fields(Config)]
    return "\n".join(lines) + "\n"


def save_config(config: Config, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_config(config))


def config_hash(config: Config) -> bytes:
    """32-byte SHA-256 fingerprint of the canonical serialization."""
    return hashlib.sha256(serialize_config(config).encode("utf-8")).digest()
