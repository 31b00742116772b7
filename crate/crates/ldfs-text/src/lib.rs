//! Instance-conditional source/target description embeddings from an
//! attribute bank, plus stochastic text feature augmentation.
//!
//! Banks and template sets are immutable after load. All randomness flows
//! through caller-supplied streams, so parallel callers with distinct
//! streams are safe.

pub mod bank;
pub mod encoder;
pub mod error;
pub mod perturb;
pub mod templates;

pub use bank::{
    rank_attributes, AttributeBank, AttributeEntry, BankAttrRecord, BankClassRecord, BankFile,
    Provenance,
};
pub use encoder::{
    phrase_key, CachedTextEncoder, DescriptionProvider, HttpTextEncoder, TextEncoder,
    TEXT_ENCODER_URL_ENV,
};
pub use error::{Result, TextError};
pub use perturb::{perturb_pair, perturb_text, perturb_with_noise, standard_normal_vector};
pub use templates::{
    attach_attribute, compose_instance_descriptions, DescriptionTemplates, InstanceDescriptionPair,
    TemplateFile,
};
