"""Paired color/label down-sampling with sparse soft labels."""

from .augment import AppliedParams, AugmentSpec, augment, apply_params
from .errors import (ConfigError, DimensionError, FormatError, KernelError, SoftLabelError,
                     ValidationError)
from .labels import (IGNORE, ClassIdMap, LabelImage, OneHotMap, SoftLabelMap, encode_one_hot, harden,
                     is_single_class, remap_ids)
from .losses import LossMap, PredictionMap, ce_loss, export_loss_map, kl_loss, soft_entropy
from .metrics import (ClassHistogram, ConfusionMatrix, RetentionReport, class_histogram, confusion,
                      entropy, iou, retention_report)
from .resample import (ColorImage, KernelSpec, TapSet, downsample_color, downsample_labels,
                       downsample_labels_nn, taps_for, upsample)
from .slt import export_dense, read_slt, write_slt

__version__ = "0.1.0"
