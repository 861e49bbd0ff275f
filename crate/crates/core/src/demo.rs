//! The three guitar sentences, end to end.
//!
//! Each sentence carries the consultation messages a parser would send, in
//! emission order, plus the unambiguous skeleton of its final output.

use crate::kb::{ingest_dump, KbStore, LanguageFilter};
use crate::protocol::{
    parse_request, print_request, render_triples, serialize_decision, Attachment, PpSlot, Triple,
};
use crate::resolver::{
    AmbiguityRequest, AttachmentDecision, BackendMode, Backends, ResolveError, Resolver,
};
use crate::scorer::TabulatedFallback;

/// Assertions for the worked examples: `AtLocation(string, guitar, 2.0)`,
/// `HasA(guitar, strings, 2.8284)`, `RelatedTo(finger, play, 1.0)`.
pub const DEMO_KB: &str = include_str!("../fixtures/guitar_kb.jsonl");

/// Fallback w* values for the two single-PP sentences.
pub const DEMO_WSTAR: &str = include_str!("../fixtures/guitar_wstar.tsv");

pub fn demo_kb() -> KbStore {
    ingest_dump(DEMO_KB.as_bytes(), &LanguageFilter::default())
        .expect("bundled fixture is valid")
        .0
}

pub fn demo_fallback() -> TabulatedFallback {
    TabulatedFallback::load(DEMO_WSTAR.as_bytes()).expect("bundled table is valid")
}

#[derive(Debug, Clone)]
pub struct DemoSentence {
    pub number: usize,
    pub text: &'static str,
    pub base: Vec<Triple>,
    /// PPs in sentence order.
    pub pps: Vec<PpSlot>,
    /// `(pp index, message)` in the order the parser sends them.
    pub messages: Vec<(usize, &'static str)>,
}

const MSG_FINGER: &str = r#"(:ambig-PP
    (PP :prep "with" :det "one" :noun "finger")
 :possible-attachments
    ((V :verb "play")
     (NP :det "the" :noun "guitar")))"#;

const MSG_STRING: &str = r#"(:ambig-PP
    (PP :prep "with" :det "one" :noun "string")
 :possible-attachments
    ((V :verb "play")
     (NP :det "the" :noun "guitar")))"#;

const MSG_FINGER_AFTER_STRING: &str = r#"(:ambig-PP
    (PP :prep "with" :det "one" :noun "finger")
 :possible-attachments
    ((V :verb "play")
     (NP :det "the" :noun "guitar")
     (PP :prep "with" :det "one" :noun "string")))"#;

pub fn sentences() -> Vec<DemoSentence> {
    let skeleton = || vec![Triple::new("John", "play", "guitar").expect("non-empty")];
    let finger = PpSlot::new("with", "finger", Some("one"));
    let string = PpSlot::new("with", "string", Some("one"));
    vec![
        DemoSentence {
            number: 1,
            text: "John is playing the guitar with one finger.",
            base: skeleton(),
            pps: vec![finger.clone()],
            messages: vec![(0, MSG_FINGER)],
        },
        DemoSentence {
            number: 2,
            text: "John is playing the guitar with one string.",
            base: skeleton(),
            pps: vec![string.clone()],
            messages: vec![(0, MSG_STRING)],
        },
        DemoSentence {
            number: 3,
            text: "John is playing the guitar with one string with one finger.",
            base: skeleton(),
            pps: vec![string, finger],
            messages: vec![(1, MSG_FINGER_AFTER_STRING), (0, MSG_STRING)],
        },
    ]
}

#[derive(Debug, Clone)]
pub struct DemoOutcome {
    pub sentence: DemoSentence,
    pub requests: Vec<AmbiguityRequest>,
    pub decisions: Vec<AttachmentDecision>,
    pub triples: String,
}

pub fn run_sentence(
    sentence: &DemoSentence,
    resolver: &Resolver,
    backends: Backends<'_>,
    mode: BackendMode,
) -> Result<DemoOutcome, ResolveError> {
    let requests: Vec<AmbiguityRequest> = sentence
        .messages
        .iter()
        .map(|(_, m)| parse_request(m).expect("bundled message parses"))
        .collect();
    let decisions = resolver.resolve_sequence(&requests, backends, mode)?;
    let attachments: Vec<Attachment> = sentence
        .messages
        .iter()
        .zip(&decisions)
        .map(|((pp, _), d)| Attachment {
            pp: *pp,
            head: d.chosen.head().to_string(),
        })
        .collect();
    let triples = render_triples(&sentence.base, &sentence.pps, &attachments);
    Ok(DemoOutcome {
        sentence: sentence.clone(),
        requests,
        decisions,
        triples,
    })
}

impl DemoOutcome {
    pub fn report(&self) -> String {
        let mut out = format!("== ({}) {}\n", self.sentence.number, self.sentence.text);
        for (i, (req, dec)) in self.requests.iter().zip(&self.decisions).enumerate() {
            out.push_str(&format!("-- consultation {}\n", i + 1));
            out.push_str(&print_request(req));
            out.push('\n');
            out.push_str(&serialize_decision(dec));
            out.push('\n');
        }
        out.push_str("-- output\n");
        out.push_str(&self.triples);
        out
    }
}
