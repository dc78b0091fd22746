"""Relativistic scalar point charge coupled to a massless field in 1+1 dimensions."""
from .dynamics import ParticleParams, Trajectory, integrate
from .profiles import ProfileComponent, RadiationProfile

__all__ = ["ParticleParams", "ProfileComponent", "RadiationProfile", "Trajectory", "integrate"]
__version__ = "0.1.0"
