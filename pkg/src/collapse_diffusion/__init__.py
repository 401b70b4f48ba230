"""Energy diffusion of a single particle under continuous spontaneous localization."""

__version__ = "0.1.0"
