//! Compare two texts as a 2D word map.
//!
//! Words from each source are tokenized and counted, very frequent English
//! words are dropped, and the remaining vocabularies are split into A-only,
//! B-only and shared sets. Each word is looked up in a pretrained word2vec
//! model, the vectors are projected to 2D with exact t-SNE, and the result is
//! exported as a JSON [`WordMap`](map::WordMap) for the browser viewer.

pub mod diff;
pub mod embedding;
pub mod map;
pub mod pipeline;
pub mod tokenizer;
pub mod tsne;

pub use diff::{diff, restrict_to_model, DiffResult, DroppedWord, SetLabel};
pub use embedding::{cosine, EmbeddingError, EmbeddingModel, ModelFormat, SimilarityHit};
pub use map::{build_map, parse_map, serialize_map, MapError, MapMeta, MapPoint, WordMap};
pub use pipeline::{PipelineConfig, PipelineError, Summary};
pub use tokenizer::{count_and_filter, tokenize, Stoplist, TokenCounts};
pub use tsne::{run_tsne, AffinityMatrix, TsneConfig, TsneError, TsneResult};
