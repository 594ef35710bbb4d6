//! State representation.
//!
//! A scheduling state is embedded twice: a graph view processed by two
//! rounds of message passing, and a text prompt mapped to a fixed-length
//! vector by a pluggable encoder. A scalar learned gate blends the projected
//! text embedding with the pooled graph embedding.

mod fusion;
mod gnn;
mod graph;
mod impact;
mod prompt;
mod text;

pub use fusion::{fuse, fuse_backward, FusionParams, Fused};
pub use gnn::{gnn_backward, gnn_embed, gnn_forward, GnnParams, GnnTrace, MessageLayer, GNN_DIM};
pub use graph::{build_graph, GraphSnapshot, OpStatus, EDGE_FEATURES, MACHINE_FEATURES, NODE_FEATURES, OP_FEATURES};
pub use impact::{HintFlags, ImpactEntry, ImpactStore, Threshold};
pub use prompt::{
    build_state_prompt, parse_document, parse_fragment, FragmentFields, PromptOptions, PromptRecord, EMISSION_HINT,
    MAKESPAN_HINT,
};
pub use text::{encode_text, tokenize, EncoderSpec, FallbackEncoder, HashEncoder, RemoteEncoder, TextEncoder, TEXT_DIM};
