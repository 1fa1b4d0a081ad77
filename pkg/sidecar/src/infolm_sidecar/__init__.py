"""HTTP sidecar wrapping a pretrained masked language model.

Serves, for every content-token position of a text, the temperature-scaled
top-k token distribution predicted with that position masked, over the
wire protocol consumed by the scoring library's remote backend.
"""

from .model import MaskedLanguageModel, SidecarConfig, TextTooLong
from .service import create_app

__version__ = "0.1.0"
