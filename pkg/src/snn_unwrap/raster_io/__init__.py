"""Rasters, synthetic scenes, the classical oracle, metrics and file formats."""

from .fileio import decode_raster, encode_raster, export_csv, export_pgm, read_raster, to_pgm, write_raster
from .metrics import MetricsReport, evaluate
from .oracle import detect_residues, gradient_energy, gradient_energy_values, itoh_unwrap, residue_charges
from .rasters import (
    TWO_PI,
    CoherenceRaster,
    PhaseRaster,
    RasterKind,
    WrapCountRaster,
    reconstruct,
    wrap,
    wrap_count,
    wrap_values,
    wrapped_diff,
)
from .scene import Scene, SceneSpec, noise_std, single_fringe_ramp_specs, synthesize_scene, vortex_phase

__all__ = [
    "TWO_PI",
    "CoherenceRaster",
    "MetricsReport",
    "PhaseRaster",
    "RasterKind",
    "Scene",
    "SceneSpec",
    "WrapCountRaster",
    "decode_raster",
    "detect_residues",
    "encode_raster",
    "evaluate",
    "export_csv",
    "export_pgm",
    "gradient_energy",
    "gradient_energy_values",
    "itoh_unwrap",
    "noise_std",
    "read_raster",
    "reconstruct",
    "residue_charges",
    "single_fringe_ramp_specs",
    "synthesize_scene",
    "to_pgm",
    "vortex_phase",
    "wrap",
    "wrap_count",
    "wrap_values",
    "wrapped_diff",
    "write_raster",
]
