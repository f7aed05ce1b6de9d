"""Public session configuration shared byte-for-byte by all three parties."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

BACKENDS = ("mpc", "dealer")
PREFIX_LAYOUTS = ("brent-kung", "ladner-fischer")


@dataclass
class SessionConfig:
    # "host:port" per party; None entries mean an in-process session.
    endpoints: list = field(default_factory=lambda: [None, None, None])
    # Deterministic pairwise seeds when set. None makes every party draw a
    # fresh seed and hand it to its successor during setup.
    prg_seed: int | None = 0
    hash_seed: int = 0
    backend: str = "mpc"
    # Fewer combines (brent-kung) or fewer rounds (ladner-fischer) in prefix scans.
    prefix_layout: str = "brent-kung"
    kappa: int = 128
    # Recorded only; no statistical protocol here consumes it.
    sigma: int = 40
    hash_rounds: int = 8
    timeout: float = 120.0
    # Relation table name -> owning party (1..3).
    owners: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}; expected one of {BACKENDS}")
        if self.prefix_layout not in PREFIX_LAYOUTS:
            raise ValueError(f"unknown prefix layout {self.prefix_layout!r}; expected one of {PREFIX_LAYOUTS}")
        if len(self.endpoints) != 3:
            raise ValueError("exactly three endpoints are required")
        if self.hash_rounds < 1:
            raise ValueError("keyed hash needs at least one round")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SessionConfig":
        return cls(**json.loads(text))

    @classmethod
    def load(cls, path) -> "SessionConfig":
        with open(path) as fh:
            return cls.from_json(fh.read())

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()
