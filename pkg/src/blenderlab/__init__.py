"""Blender-horseshoe lab: certify the axioms of a piecewise-affine model and
locate robust tangencies of folding manifolds with its stable set."""

from .axioms import BlenderCertificate, certify_blender
from .blender_property import IntersectionWitness, intersect_disk
from .central import CentralIFS, covering_check
from .disks import AffineDisk, classify_position, graph_transform
from .folding import FoldingManifold, image_fold, locate_tangency, make_quadratic_fold
from .model import BlenderModel, default_instance
from .perturbation import perturbed_map, robustness_suite

__version__ = "0.1.0"

__all__ = [
    "AffineDisk", "BlenderCertificate", "BlenderModel", "CentralIFS", "FoldingManifold",
    "IntersectionWitness", "certify_blender", "classify_position", "covering_check",
    "default_instance", "graph_transform", "image_fold", "intersect_disk", "locate_tangency",
    "make_quadratic_fold", "perturbed_map", "robustness_suite",
]
