"""
USSeg - self-supervised volumetric defect segmentation for phased-array ultrasonic scans
"""

__version__ = "1.0.0"
