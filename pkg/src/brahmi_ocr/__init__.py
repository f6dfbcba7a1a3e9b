"""OCR engine for Ashokan Brahmi inscription images.

The pipeline runs denoise -> binarize -> line/character segmentation ->
glyph classification. Classification models are small CNNs trained with
the in-repo ``tensornet`` engine; no external ML framework is involved.
"""

__version__ = "0.1.0"
