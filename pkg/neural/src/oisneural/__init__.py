"""Learned flow-to-flow refinement of gyro-predicted alignment flows.

This package is deliberately decoupled from the alignment toolkit that
produces its training data: the only shared surface is the training
manifest JSON and Middlebury .flo files on disk.
"""

__version__ = "0.1.0"
