//! The learnable reconstruction core: encoders, fusion, WNF decoder, and
//! training with from-scratch reverse-mode gradients verified against
//! central finite differences.

mod batch;
mod conv;
mod encoder;
mod model;
mod nn;
mod reconstruct;
mod train;

pub use batch::{
    build_scene_pool, sample_query_batch, subsample_batch, PoolEntry, QueryBatch, SamplingConfig,
    ScenePool,
};
pub use conv::{Conv2, Conv3, SparseFeatures};
pub use encoder::{
    decode_wnf, encode_scene, encode_visual, encode_visual_multiplane, fuse, query_feature,
    EncodedScene, EncoderActivations, EncoderGrad, FeatureVolume, PlaneFeatureMaps, PreparedCloud,
    QuerySupport,
};
pub use model::{
    load_checkpoint, save_checkpoint, EncoderKind, FusionMode, ModelConfig, ModelGrads,
    ReconModel, VisualEncoder, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use nn::{Adam, Linear, LinearGrad, Mlp, MlpTrace};
pub use reconstruct::{assign_tactile_to_voxels, reconstruct, Reconstruction};
pub use train::{
    forward_backward, forward_loss, gradient_check, train, wnf_loss, GradCheckReport, TrainConfig,
    TrainScene,
};
