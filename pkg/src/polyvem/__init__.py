"""Virtual element methods for a Sobolev equation on polygonal meshes."""

__version__ = "0.1.0"
