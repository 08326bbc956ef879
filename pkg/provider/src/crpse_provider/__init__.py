"""NLP sidecar exposing entity extraction and sentence embeddings over a
small versioned JSON protocol."""

__version__ = "0.1.0"

from crpse_provider.models import HashedEncoder, ModelLoadError, RuleExtractor
from crpse_provider.service import ProviderConfig, create_app, serve_main

__all__ = [
    "__version__",
    "HashedEncoder",
    "ModelLoadError",
    "ProviderConfig",
    "RuleExtractor",
    "create_app",
    "serve_main",
]
