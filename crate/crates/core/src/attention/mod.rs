//! Attention operators: softmax reference, kernel linear attention, and the
//! Laplacian-kernel block `Z V + DWC(V)`.

mod block;
mod dwc;
mod entropy;
mod linear;
mod reference;
mod softmax;

pub use block::{
    attention_embedding, landmark_factors, laplacianformer_attention, laplacianformer_attention_with, AttentionConfig,
    AttentionPath, LandmarkFactors,
};
pub use dwc::{dwc, dwc_accumulate, DwcLayout, DwcWeights, DEFAULT_DWC_WIDTH};
pub use entropy::{attention_entropy, entropy_csv, mean_entropy, near_zero_fraction};
pub use linear::{linear_attention, map_rows, EluPlusOne, Exp, FeatureMap, Identity};
pub use reference::{dense_reference_attention, materialized_landmark_attention};
pub use softmax::{softmax_attention, softmax_weights};
