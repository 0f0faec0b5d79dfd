//! Canonical text renderings of dialogues, items, and preference sets.
//!
//! Every downstream consumer (encoder, BM25 index, prompt construction)
//! sees exactly these strings, so the renderers are pure and byte-stable:
//! same input, same bytes, on every platform.

use crate::corpus::{Dialogue, ItemRecord, PreferenceSet, Speaker};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum RenderError {
    #[error("dialogue {dialogue_id} has no turns to render")]
    EmptyDialogue { dialogue_id: String },
    #[error("item {item_id} has no metadata to render")]
    EmptyMetadata { item_id: String },
}

/// What a rendered string represents; drives the encoder's token budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SourceKind {
    DialogueCtx,
    ItemMeta,
    ItemFull,
    LikePrefs,
    DislikePrefs,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedText {
    pub text: String,
    pub kind: SourceKind,
}

fn speaker_tag(speaker: Speaker) -> &'static str {
    match speaker {
        Speaker::User => "[User]",
        Speaker::System => "[System]",
    }
}

/// Conversation context: turns as "[User] <text> [System] <text>", all
/// segments joined by single spaces, texts verbatim.
pub fn render_dialogue(dialogue: &Dialogue) -> Result<RenderedText, RenderError> {
    if dialogue.turns.is_empty() {
        return Err(RenderError::EmptyDialogue {
            dialogue_id: dialogue.id.clone(),
        });
    }
    let text = dialogue
        .turns
        .iter()
        .map(|t| format!("{} {}", speaker_tag(t.speaker), t.text))
        .collect::<Vec<_>>()
        .join(" ");
    Ok(RenderedText {
        text,
        kind: SourceKind::DialogueCtx,
    })
}

/// Item metadata: one "key: value" line per pair, newline-joined, file order.
pub fn render_metadata(item: &ItemRecord) -> Result<RenderedText, RenderError> {
    if item.metadata.is_empty() {
        return Err(RenderError::EmptyMetadata {
            item_id: item.id.clone(),
        });
    }
    let text = item
        .metadata
        .iter()
        .map(|(k, v)| format!("{k}: {v}"))
        .collect::<Vec<_>>()
        .join("\n");
    Ok(RenderedText {
        text,
        kind: SourceKind::ItemMeta,
    })
}

/// Full item text: metadata plus, when review keyphrases exist and are not
/// both empty, tagged like/dislike lines.
pub fn render_item(item: &ItemRecord) -> Result<RenderedText, RenderError> {
    let mut text = render_metadata(item)?.text;
    if let Some(prefs) = &item.review_keyphrases {
        if !prefs.is_empty() {
            text.push_str("\n[Like] ");
            text.push_str(&prefs.like.join(", "));
            text.push_str("\n[Dislike] ");
            text.push_str(&prefs.dislike.join(", "));
        }
    }
    Ok(RenderedText {
        text,
        kind: SourceKind::ItemFull,
    })
}

/// Preference texts: raw comma-joined phrase lists, no polarity tags.
/// Empty lists render as empty strings.
pub fn render_preferences(prefs: &PreferenceSet) -> (RenderedText, RenderedText) {
    (
        RenderedText {
            text: prefs.like.join(", "),
            kind: SourceKind::LikePrefs,
        },
        RenderedText {
            text: prefs.dislike.join(", "),
            kind: SourceKind::DislikePrefs,
        },
    )
}
