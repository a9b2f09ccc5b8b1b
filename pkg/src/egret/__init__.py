"""egret: evidence-gated research state runtime on plain files."""

__version__ = "0.1.0"
