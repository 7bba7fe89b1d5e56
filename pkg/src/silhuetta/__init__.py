"""silhuetta: shape-from-silhouette 3D reconstruction with silhouette
optimization, photo-consistency carving and mesh volume estimation."""

from importlib import resources

__version__ = "0.1.0"


def data_path(relative: str):
    """Path to a bundled data file, e.g. data_path('rigs/paper4.json')."""
    return resources.files("silhuetta").joinpath("data", relative)
