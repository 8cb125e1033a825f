"""Zero-shot learning by embedding semantic descriptions into a visual feature space."""

from .data import (Dataset, DatasetError, PrototypeSet, SynthSpec, load_dataset,
                   make_validation_split, synth_generate, write_dataset)
from .hubness import direction_report, nk_distribution, skewness
from .model import (DemModel, TrainConfig, build_model, classify, embed, evaluate, hit_at_k,
                    load_checkpoint, save_checkpoint, train)
from .ridge import fit_ridge, shrinkage_ratio

__version__ = "0.1.0"
