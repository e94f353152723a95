"""Spiking neural network for InSAR phase unwrapping.

Wrapped phase, its gradients and coherence are spike-encoded, integrated by
a layer of leaky integrate-and-fire neurons with coherence-gated lateral
coupling, and read out by a competitive decision layer that picks the wrap
count of every pixel.
"""

from . import cli, config, encoding, energy, errors, lif, network, plasticity, raster_io

__version__ = "0.1.0"

__all__ = ["cli", "config", "encoding", "energy", "errors", "lif", "network", "plasticity", "raster_io"]
