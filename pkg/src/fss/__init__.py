"""Fine structure-aware sampling toolkit for implicit surface training."""

__version__ = "0.1.0"

from .bvh import Bvh
from .mesh import TriangleMesh, load_mesh, normalize_to_camera_space, sample_surface, save_obj
from .schemes import SampleSet, SchemeConfig, dos_scheme, fss_scheme, spatial_scheme

__all__ = [
    "Bvh",
    "TriangleMesh",
    "SampleSet",
    "SchemeConfig",
    "load_mesh",
    "normalize_to_camera_space",
    "sample_surface",
    "save_obj",
    "spatial_scheme",
    "dos_scheme",
    "fss_scheme",
    "__version__",
]
