"""
DualStyle Source Package
Desk-scale dual-path portrait style transfer: a small style-based generator,
an extrinsic style path, destylization, progressive fine-tuning and a style
codebook, trained end to end on procedurally rendered sprite faces.
"""

__version__ = "1.0.0"
