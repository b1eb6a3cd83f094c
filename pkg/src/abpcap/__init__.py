"""Cell partitions, lambda-ABP checks, capillary energies and mixed Neumann solves."""

from .abp import abp_measure_exact, abp_measure_mc, cell_diagnostics, fuzz_abp, phi_K, phi_scan
from .capillary import CapillaryScene, capillary_energy, reference_energy
from .convexbody import ContactConfig, ConvexSection, CylinderContactConfig, validate_contact_config
from .geom2d import ArcSet, ConvexCell, HalfPlane, cap_volume
from .partition import CellPartition, build_cells, delete_cell, locate, slice_cylinder

__version__ = "0.1.0"

__all__ = [
    "ArcSet",
    "CapillaryScene",
    "CellPartition",
    "ContactConfig",
    "ConvexCell",
    "ConvexSection",
    "CylinderContactConfig",
    "HalfPlane",
    "abp_measure_exact",
    "abp_measure_mc",
    "build_cells",
    "cap_volume",
    "capillary_energy",
    "cell_diagnostics",
    "delete_cell",
    "fuzz_abp",
    "locate",
    "phi_K",
    "phi_scan",
    "reference_energy",
    "slice_cylinder",
    "validate_contact_config",
]
