"""
Spherical robot simulator - passive LiDAR excitation through locomotion dynamics
"""

__version__ = "0.1.0"
