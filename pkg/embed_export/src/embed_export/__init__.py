"""Embedding export adapter for the teaser pipeline's vector file format."""

from .export import (
    ExportError,
    ExportJob,
    export_frame_embeddings,
    export_text_embeddings,
    mock_vector,
    read_manifest,
    select_frames,
)

__version__ = "0.1.0"
