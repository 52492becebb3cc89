//! File formats: corpora, tree files, model weights and DOT rendering.

pub mod corpus;
pub mod dot;
pub mod weights;

pub use corpus::{
    load_corpus, load_corpus_any, load_tree_records, save_corpus, save_tree_records, CorpusError,
    NodeJson, Piece, TreeRecord,
};
pub use dot::{render_constituent, render_dependency};
pub use weights::{load_model, load_weights, save_model, save_weights, WeightError, WeightFile};
