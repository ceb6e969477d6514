"""HTTP sidecar that turns sentences into contextual embedding vectors.

The service exposes three JSON endpoints (POST /embed, GET /health,
GET /info) and speaks the wire protocol the query-response engine's
service embedder consumes.
"""

from .app import create_app
from .config import DEFAULT_MODEL, SidecarConfig
from .encoder import SbertEncoder

__all__ = ["DEFAULT_MODEL", "SbertEncoder", "SidecarConfig", "create_app"]
__version__ = "0.1.0"
