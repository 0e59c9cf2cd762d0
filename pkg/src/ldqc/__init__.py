"""Exact workbench for locally decodable quantum codes and their classical reductions."""

__version__ = "0.1.0"
