"""Cross-centroid ripple pattern (CRIP) texture codes for expression recognition.

``BACKEND`` reports which kernel implementation is active: ``"cython"`` when
the compiled extension imported, ``"numpy"`` otherwise (or when the
environment variable ``CRIP_FORCE_PYTHON=1`` is set).
"""
from .descriptor import (BACKEND, DEFAULT_GEOMETRY, Neighborhood, RingGeometry, centroid_x, centroid_y,
                         code_map, crip_code, crip_map, crip_map_reference, hamming_drift, lbp_map,
                         lbp_map_reference, parity_k, parity_l, sample_neighborhood, sign)
from .evaluation import (ClassifierConfig, ConfusionMatrix, EvalReport, SplitPlan, accuracy, confusion,
                         make_plan, run_protocol, split_loso, split_person_dependent, split_subject_kfold)
from .features import BlockGrid, FeatureConfig, block_histogram, block_origin, feature_vector
from .imaging import (DatasetManifest, Sample, load_image, load_manifest, perturb_affine, perturb_noise,
                      perturb_resolution, preprocess)
from .svm import BinarySvm, SvmModel, train_binary, train_multiclass

__version__ = "0.1.0"
