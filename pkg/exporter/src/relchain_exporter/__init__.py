"""relchain-exporter: produce the binary artifacts the solver consumes."""
from .encoders import EncoderError, HashEncoder, RelbertEncoder, make_encoder
from .export import (ExportError, ExportManifest, ExportStats, export_relations,
                     export_word_vectors, load_pairs_tsv)
from .formats import normalize

__version__ = "0.1.0"
