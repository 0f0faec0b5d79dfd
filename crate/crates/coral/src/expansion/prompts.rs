//! Prompt templates and placeholder substitution.
//!
//! Bodies are fixed strings with `{name}` placeholders. Only names in the
//! template's schema are substituted, so literal braces elsewhere (like the
//! `{{...}}` format hints shown to the model) survive rendering untouched.

use super::ExpansionError;
use crate::corpus::PreferenceSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TemplateId {
    Extract,
    Augment,
    Summarize,
    Keyphrase,
}

impl TemplateId {
    pub fn label(&self) -> &'static str {
        match self {
            TemplateId::Extract => "extract",
            TemplateId::Augment => "augment",
            TemplateId::Summarize => "summarize",
            TemplateId::Keyphrase => "keyphrase",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub body: &'static str,
    /// Placeholder names this template substitutes.
    pub schema: &'static [&'static str],
}

pub const EXTRACT_BODY: &str = "Given a dialogue history between the User and the System, find all aspects related to the movies the user currently seeks. Also, you must classify the preferences about each aspect, Like and Dislike. If there is nothing to mention about likes or dislikes, simply write \"None.\" under the corresponding tag.\nDialogue history: {dialogHistory}\nResponse:\n[Like] {{keyphrases or descriptions separated by comma}}\n[Dislike] {{keyphrases or descriptions separated by comma}}";

pub const AUGMENT_BODY: &str = "You are an advanced user's profile generator. Based on the conversation and the user's like/dislike preferences, use your reasoning to infer and expand upon the user's potential preferences. Augment key phrases related to the user's likes and dislikes, including preferences they may not have explicitly stated, to better guide personalized suggestions. If no explicit user preferences are provided, infer them from the conversation. Do not include any unrelated information; only state the user's preferences.\n\nUser's preferences:\n{extractedPreferences}\nConversation:\n{dialogHistory}\n\nNow, let's get started!\n[Like] {{Expanded keyphrases describing the user's likes}}\n[Dislike] {{Expanded keyphrases describing the user's dislikes}}";

pub const SUMMARIZE_BODY: &str = "Given some popular reviews about Kids {title}, describe what people liked and disliked about the movie under [Like] and [Dislike], respectively. If there is nothing to mention about like/dislike, simply write \"None.\" under the corresponding tag.\n\nHere are some basic information about the movie and reviews about it:\nTitle: {title}\nGenre: {genres}\nCast: {cast}\nDirector: {director} Reviews: {reviews}";

pub const KEYPHRASE_BODY: &str = "Below are the common [Like] and [Dislike] from users about the {title}. Based on this information, generate 5-8 keyphrases that represent user preferences and intentions for this movie, separated by commas. Do not include any other explanations or sentences.\n\nHere is some basic information about the movie and users' preferences information:\n{userInformation}\nThe output format must strictly adhere to the following:\n[Like] keyphrases or descriptions separated by comma\n[Dislike] keyphrases or descriptions separated by comma";

const TEMPLATES: [PromptTemplate; 4] = [
    PromptTemplate {
        id: TemplateId::Extract,
        body: EXTRACT_BODY,
        schema: &["dialogHistory"],
    },
    PromptTemplate {
        id: TemplateId::Augment,
        body: AUGMENT_BODY,
        schema: &["extractedPreferences", "dialogHistory"],
    },
    PromptTemplate {
        id: TemplateId::Summarize,
        body: SUMMARIZE_BODY,
        schema: &["title", "genres", "cast", "director", "reviews"],
    },
    PromptTemplate {
        id: TemplateId::Keyphrase,
        body: KEYPHRASE_BODY,
        schema: &["title", "userInformation"],
    },
];

pub fn template(id: TemplateId) -> &'static PromptTemplate {
    TEMPLATES.iter().find(|t| t.id == id).expect("all ids present")
}

/// Substitutes every schema placeholder with its binding. Every schema name
/// must be bound (an empty string is a valid binding); bindings outside the
/// schema are ignored.
pub fn render_prompt(
    template: &PromptTemplate,
    bindings: &[(&str, &str)],
) -> Result<String, ExpansionError> {
    let mut out = template.body.to_string();
    for name in template.schema {
        let value = bindings
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| ExpansionError::MissingBinding {
                name: (*name).to_string(),
            })?;
        out = out.replace(&format!("{{{name}}}"), value);
    }
    Ok(out)
}

/// Renders a preference set in the tag form the prompts describe; empty
/// lists become the literal "None." sentinel so the output stays parseable.
pub fn format_preferences(prefs: &PreferenceSet) -> String {
    let side = |phrases: &[String]| {
        if phrases.is_empty() {
            "None.".to_string()
        } else {
            phrases.join(", ")
        }
    };
    format!(
        "[Like] {}\n[Dislike] {}",
        side(&prefs.like),
        side(&prefs.dislike)
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::parse_like_dislike;

    #[test]
    fn every_schema_placeholder_appears_in_its_body() {
        for t in &TEMPLATES {
            for name in t.schema {
                assert!(
                    t.body.contains(&format!("{{{name}}}")),
                    "{:?} missing placeholder {name}",
                    t.id
                );
            }
        }
    }

    #[test]
    fn extract_substitutes_dialogue_and_keeps_format_hint() {
        let rendered = render_prompt(
            template(TemplateId::Extract),
            &[("dialogHistory", "[User] hi")],
        )
        .unwrap();
        assert!(rendered.contains("Dialogue history: [User] hi"));
        assert!(rendered.contains("classify the preferences about each aspect"));
        // Double-brace format hints are not placeholders and survive.
        assert!(rendered.contains("{{keyphrases or descriptions separated by comma}}"));
        assert!(!rendered.contains("{dialogHistory}"));
    }

    #[test]
    fn empty_binding_substitutes_verbatim() {
        let rendered =
            render_prompt(template(TemplateId::Extract), &[("dialogHistory", "")]).unwrap();
        assert!(rendered.contains("Dialogue history: \nResponse:"));
    }

    #[test]
    fn missing_binding_is_named() {
        let err = render_prompt(template(TemplateId::Extract), &[]).unwrap_err();
        match err {
            ExpansionError::MissingBinding { name } => assert_eq!(name, "dialogHistory"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn summarize_substitutes_title_in_both_positions() {
        let rendered = render_prompt(
            template(TemplateId::Summarize),
            &[
                ("title", "Heat"),
                ("genres", "Crime"),
                ("cast", "P, D"),
                ("director", "M. Mann"),
                ("reviews", "r1\nr2"),
            ],
        )
        .unwrap();
        assert!(rendered.contains("reviews about Kids Heat,"));
        assert!(rendered.contains("Title: Heat"));
        assert!(rendered.contains("Director: M. Mann Reviews: r1\nr2"));
        assert!(!rendered.contains('{'));
    }

    #[test]
    fn augment_needs_both_bindings() {
        let err = render_prompt(
            template(TemplateId::Augment),
            &[("dialogHistory", "[User] hi")],
        )
        .unwrap_err();
        assert!(matches!(err, ExpansionError::MissingBinding { name } if name == "extractedPreferences"));
    }

    #[test]
    fn format_preferences_round_trips_through_the_parser() {
        let prefs = PreferenceSet::new(
            vec!["slow burns".into(), "neo noir".into()],
            vec!["jump scares".into()],
        );
        let parsed = parse_like_dislike(&format_preferences(&prefs)).unwrap();
        assert_eq!(parsed, prefs);
        let empty = PreferenceSet::new(vec![], vec![]);
        assert_eq!(format_preferences(&empty), "[Like] None.\n[Dislike] None.");
        assert_eq!(parse_like_dislike(&format_preferences(&empty)).unwrap(), empty);
    }
}
