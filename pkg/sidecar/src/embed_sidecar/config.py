"""Service configuration: which encoder, where to listen, batch ceiling."""

from __future__ import annotations

from dataclasses import dataclass

DEFAULT_MODEL = "sentence-transformers/all-mpnet-base-v2"
DEFAULT_BIND = "127.0.0.1:8901"
DEFAULT_MAX_BATCH = 128


def split_bind(bind: str) -> tuple[str, int]:
    """Split "host:port" into its parts, validating both."""
    host, sep, port_text = bind.rpartition(":")
    if not sep or not host:
        raise ValueError(f"bind must look like host:port, got {bind!r}")
    try:
        port = int(port_text)
    except ValueError:
        raise ValueError(f"bind port must be an integer, got {port_text!r}") from None
    if not 0 <= port <= 65535:
        raise ValueError(f"bind port must be in [0, 65535], got {port}")
    return host, port


@dataclass(frozen=True)
class SidecarConfig:
    """Everything the service needs to run.

    ``model`` is the exact identifier of the pretrained sentence encoder,
    pinned so two deployments embed identically. ``max_batch`` caps the
    number of texts one /embed request may carry.
    """

    model: str = DEFAULT_MODEL
    bind: str = DEFAULT_BIND
    max_batch: int = DEFAULT_MAX_BATCH

    def __post_init__(self):
        if not self.model:
            raise ValueError("model identifier must be non-empty")
        if self.max_batch < 1:
            raise ValueError(f"max_batch must be >= 1, got {self.max_batch}")
        split_bind(self.bind)

    @property
    def host(self) -> str:
        return split_bind(self.bind)[0]

    @property
    def port(self) -> int:
        return split_bind(self.bind)[1]
