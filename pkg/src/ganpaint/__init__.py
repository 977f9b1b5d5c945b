"""Toy-scale lab for GAN latent-space semantic inpainting of faces and
face sequences: iterative latent optimization with learned single-image
and recurrent window initialization, a temporal smoothness constraint,
and an evaluation harness.
"""

from .data import (DatasetItem, DatasetManifest, PseudoSequence,
                   build_pseudo_sequence, load_dataset, split_manifest,
                   synthesize_toy_faces)
from .evaluation import (EmbedderHandle, MetricsReport, identity_loss, psnr,
                         significance_test, temporal_consistency)
from .initializer import (InitTrainConfig, InitializerCheckpoint,
                          predict_latent, train_initializer)
from .inpaint import (InpaintResult, OptimConfig, blend, contextual_loss,
                      optimize_latent, perceptual_loss)
from .masking import CorruptionSpec, Mask, apply_mask, make_mask
from .models import (GanTrainConfig, ModelCheckpoint, discriminate, generate,
                     random_checkpoint, sample_prior, train_gan)
from .seq_initializer import (SeqInitTrainConfig, SequenceInitCheckpoint,
                              predict_latent_sequence,
                              train_sequence_initializer)
from .seq_inpaint import (SequenceOptimConfig, SequenceWindow,
                          optimize_window, smoothness_loss)

__version__ = "0.1.0"
