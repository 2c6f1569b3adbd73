"""voxplore: neural volume-exploration workbench.

Trains a feature-learning implicit neural representation over a scalar
volume, classifies regions of interest from sparse slice scribbles with
a random forest, renders the resulting probability volumes with two
probabilistic compositing modes, and recommends complementary viewpoints
from unsupervised feature clustering.
"""

from .volume import (DerivedFields, LabelVolume, ScalarVolume, VolumeError,
                     VoxelPatch, compute_derived_fields, extract_patch,
                     load_labels, load_volume, sample_trilinear, save_labels,
                     save_volume)

__version__ = "0.1.0"
