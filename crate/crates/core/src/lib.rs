//! Prepositional-phrase attachment decisions backed by commonsense
//! knowledge.
//!
//! A parser that reaches an ambiguous PP sends its partial parse as an
//! s-expression ([`protocol`]). The [`resolver`] pairs the PP noun with each
//! candidate attachment site across singular/plural variants ([`morph`]),
//! asks the assertion store ([`kb`]) for the strongest direct assertion per
//! pair, and attaches the PP to the best-supported site. When the store has
//! nothing to say about any candidate, an embedding-based [`scorer`]
//! supplies neighborhood-aggregated w* scores instead. The [`eval`] module
//! runs the whole pipeline over the parallel-file PP-attachment dataset.
//!
//! ```
//! use ppattach::kb::{Assertion, ConceptKey, KbStore};
//! use ppattach::protocol::{parse_request, serialize_decision};
//! use ppattach::resolver::{BackendMode, Backends, Resolver};
//!
//! let key = |s: &str| ConceptKey::new(s).unwrap();
//! let kb = KbStore::from_assertions([
//!     Assertion::new("HasA", key("guitar"), key("strings"), 2.8284).unwrap(),
//! ]);
//! let request = parse_request(r#"(:ambig-PP (PP :prep "with" :det "one" :noun "string")
//!     :possible-attachments ((V :verb "play") (NP :det "the" :noun "guitar")))"#).unwrap();
//!
//! let backends = Backends { kb: Some(&kb), fallback: None };
//! let decision = Resolver::default().decide(&request, backends, BackendMode::KbOnly).unwrap();
//! assert_eq!(
//!     serialize_decision(&decision),
//!     r#"(:attach-to 1 :kind NP :head "guitar" :relation "HasA" :weight 2.8284 :source kb)"#
//! );
//! ```

pub mod cli;
pub mod config;
pub mod demo;
pub mod eval;
pub mod kb;
pub mod morph;
pub mod protocol;
pub mod resolver;
pub mod scorer;

pub use kb::{Assertion, ConceptKey, KbStore};
pub use resolver::{AmbiguityRequest, AttachmentDecision, BackendMode, Backends, Resolver};

// The guide's code blocks run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/knowledge-base.md")]
    mod knowledge_base {}
    #[doc = include_str!("../../../book/src/variants.md")]
    mod variants {}
    #[doc = include_str!("../../../book/src/resolution.md")]
    mod resolution {}
    #[doc = include_str!("../../../book/src/fallback.md")]
    mod fallback {}
    #[doc = include_str!("../../../book/src/protocol.md")]
    mod protocol {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
