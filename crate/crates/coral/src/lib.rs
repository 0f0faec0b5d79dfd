//! Preference-aware conversational item retrieval.
//!
//! The pipeline turns a recommendation dialogue into three text views
//! (conversation, likes, dislikes), embeds each with a trainable hashed
//! bag-of-tokens encoder, and ranks catalog items by a three-term score
//! that rewards similarity to the conversation and the likes while
//! penalizing similarity to the dislikes. Preference texts come from a
//! two-step LLM expansion (superficial extraction, then augmentation);
//! items are enriched with review summaries and keyphrases the same way.
//!
//! Modules follow the data path: [`corpus`] loads dialogues and items,
//! [`expansion`] produces preference sets, [`textrep`] renders canonical
//! texts, [`encoder`] embeds them, [`scoring`] ranks, [`sampler`] draws
//! hard negatives, [`trainer`] fits the encoder, and [`eval`] measures
//! Recall@k / NDCG@k and runs ablations. [`cli`] wires everything into
//! the `coral` binary.

pub mod cli;
pub mod corpus;
pub mod encoder;
pub mod eval;
pub mod expansion;
pub mod sampler;
pub mod scoring;
pub mod textrep;
pub mod trainer;
