//! Static second-step vCBT (virtual cognitive behavioral therapy) content and
//! label routing.

use serde::{Deserialize, Serialize};

use crate::schema::DisorderLabel;

/// Shown with every detection result.
pub const DISCLAIMER: &str = "This screening result is an indication only and is not an exact \
diagnosis. Automated detection is not 100% accurate; please consult a qualified mental health \
professional for an assessment.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemKind {
    Audio,
    Video,
    Reading,
    Activity,
    Referral,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TherapyItem {
    pub title: String,
    pub description: String,
    pub kind: ItemKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub disorder: String,
    pub code: u8,
    pub items: Vec<TherapyItem>,
}

fn item(title: &str, description: &str, kind: ItemKind) -> TherapyItem {
    TherapyItem { title: title.to_owned(), description: description.to_owned(), kind, link: None }
}

/// Route token the client follows after consenting.
pub fn route_for(label: DisorderLabel) -> String {
    format!("vcbt/{}", label.name())
}

pub fn catalog(label: DisorderLabel) -> CatalogEntry {
    use ItemKind::*;
    let items = match label {
        DisorderLabel::Depression => vec![
            item("Music therapy", "Curated calming music sessions to lower everyday stress.", Audio),
            item("Job circulars", "Current job postings to help with finding new work.", Reading),
            item("Local support groups", "Community support groups nearby that are open to new members.", Referral),
            item(
                "Physical exercise",
                "Guided exercise videos and trainer advice; regular activity raises serotonin and endorphin levels.",
                Video,
            ),
            item("Healthy food and lifestyle", "Expert guidance on diet and daily routines.", Reading),
            item(
                "Antidepressant advice",
                "Referral to a professional who can advise on antidepressant medication.",
                Referral,
            ),
        ],
        DisorderLabel::InternetAddiction => vec![
            item("Time with family and friends", "Plan more offline time with the people close to you.", Activity),
            item("Daily usage rules", "Set a cut-off time each day after which the internet stays off.", Activity),
            item("30-minute session limit", "Configure device rules that end online sessions after 30 minutes.", Activity),
            item("Travel and fun", "Ideas for trips and activities to enjoy with friends, relatives and loved ones.", Reading),
            item("Digital priorities", "Guidance on keeping screen time focused on study and core work.", Reading),
        ],
        DisorderLabel::Anxiety => vec![
            item("Recommended books", "A reading list of helpful books and sources.", Reading),
            item("Short e-learning course", "A brief online course on understanding and managing anxiety.", Video),
            item("Motivational therapy", "Exercises for turning negative thoughts into positive ones.", Audio),
            item(
                "Relaxation therapy",
                "Mindfulness meditation, yoga and progressive muscle relaxation routines.",
                Activity,
            ),
        ],
    };
    CatalogEntry { disorder: label.name().to_owned(), code: label.code(), items }
}

/// Catalog lookup by disorder name; `None` for anything else.
pub fn catalog_by_name(name: &str) -> Option<CatalogEntry> {
    DisorderLabel::from_name(name).map(catalog)
}
