"""The pretrained sentence encoder behind the service."""

from __future__ import annotations

import numpy as np


class SbertEncoder:
    """Wraps a pretrained sentence-transformers checkpoint.

    The heavy import happens inside ``__init__``, not at module import
    time, so the rest of the package (config parsing, the app with an
    injected encoder) works without the model stack loaded.
    """

    def __init__(self, model_name: str):
        from sentence_transformers import SentenceTransformer

        self.model_name = model_name
        self._model = SentenceTransformer(model_name)
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def encode(self, texts: list[str]) -> np.ndarray:
        """One vector per text, unnormalized, float32, shape (n, dim)."""
        arr = self._model.encode(
            list(texts),
            convert_to_numpy=True,
            normalize_embeddings=False,
            show_progress_bar=False,
        )
        return np.asarray(arr, dtype=np.float32)
