//! Per-section field extraction: the five service kinds, the category field
//! manifest, and the deterministic pattern-based stub extractor that stands
//! in for trained sequence models. The stub combines built-in scanners
//! (email addresses, phone-number digit runs, four-digit years) with a
//! keyword lexicon loaded from the service's stored pattern file.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// The five prediction services, one per CV information category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionKind {
    PersonalInformation,
    Education,
    WorkExperience,
    Skills,
    FunctionalArea,
}

impl SectionKind {
    /// Service call order for sequential mode (deployment listing order).
    pub const ALL: [SectionKind; 5] = [
        SectionKind::PersonalInformation,
        SectionKind::Education,
        SectionKind::WorkExperience,
        SectionKind::Skills,
        SectionKind::FunctionalArea,
    ];

    pub fn category_name(self) -> &'static str {
        match self {
            SectionKind::PersonalInformation => "Personal information",
            SectionKind::Education => "Education",
            SectionKind::WorkExperience => "Work experience",
            SectionKind::Skills => "Skills",
            SectionKind::FunctionalArea => "Functional area",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SectionKind::PersonalInformation => "personal_information",
            SectionKind::Education => "education",
            SectionKind::WorkExperience => "work_experience",
            SectionKind::Skills => "skills",
            SectionKind::FunctionalArea => "functional_area",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.as_str() == name)
    }
}

impl core::fmt::Display for SectionKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The CV information category manifest: which fields belong to which
/// service kind. Composite education entries are flattened to one field per
/// sub-attribute.
pub fn fields_for(kind: SectionKind) -> &'static [&'static str] {
    match kind {
        SectionKind::PersonalInformation => &[
            "Name",
            "Date of birth",
            "Mobile number",
            "Email ID",
            "Gender",
            "Languages known",
            "Address",
            "City",
            "Country",
            "Alternate mobile number",
            "Alternate email ID",
        ],
        SectionKind::Skills => &["Key Skills"],
        SectionKind::Education => &[
            "Diploma course",
            "Diploma specialization",
            "Undergrd course",
            "Undergrd specialization",
            "Undergrd institute",
            "Undergrd year",
            "Postgrd course",
            "Postgrd specialization",
            "Postgrd institute",
            "Postgrd year",
            "Doctoral course",
            "Doctoral specialization",
            "Doctoral institute",
            "Doctoral year",
        ],
        SectionKind::FunctionalArea => &["Functional area", "Industry type", "Role"],
        SectionKind::WorkExperience => &[
            "Current designation",
            "Current employer",
            "Previous designation",
            "Previous employer",
            "Salary",
            "Total experience",
            "Notice period",
            "Experiences",
        ],
    }
}

/// The kind whose category owns a field name, if any. Used by the gateway
/// merge to resolve the same field reported by two services.
pub fn owner_of(field: &str) -> Option<SectionKind> {
    SectionKind::ALL
        .iter()
        .copied()
        .find(|&k| fields_for(k).contains(&field))
}

/// One extracted value plus the index of the sentence it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldValue {
    pub value: String,
    pub sentence_index: usize,
}

/// A prediction response: extracted field values plus server-side timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NerResult {
    pub fields: BTreeMap<String, Vec<FieldValue>>,
    pub timing_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternError {
    pub line: usize,
    pub message: String,
}

impl core::fmt::Display for PatternError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "pattern file line {}: {}", self.line, self.message)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for PatternError {}

/// Parsed pattern rules for one service kind. Extraction is deterministic:
/// sentences are scanned in order and rules applied in file order.
#[derive(Debug, Clone)]
pub struct PatternRules {
    kind: SectionKind,
    /// (lowercased keyword, target field), in file order.
    keywords: Vec<(String, &'static str)>,
}

impl PatternRules {
    /// Parses `keyword<TAB>field` lines. Every target field must belong to
    /// the kind's manifest; `#` starts a comment.
    pub fn parse(kind: SectionKind, text: &str) -> Result<Self, PatternError> {
        let mut keywords = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (keyword, field) = line.split_once('\t').ok_or_else(|| PatternError {
                line: idx + 1,
                message: "expected keyword<TAB>field".to_string(),
            })?;
            let field = field.trim();
            let canonical = fields_for(kind)
                .iter()
                .copied()
                .find(|f| *f == field)
                .ok_or_else(|| PatternError {
                    line: idx + 1,
                    message: "field does not belong to this section".to_string(),
                })?;
            let keyword = keyword.trim().to_lowercase();
            if keyword.is_empty() {
                return Err(PatternError {
                    line: idx + 1,
                    message: "empty keyword".to_string(),
                });
            }
            keywords.push((keyword, canonical));
        }
        Ok(Self { kind, keywords })
    }

    /// The bundled default pattern file text for a kind; the same bytes are
    /// what operators store as the stub's model artifact.
    pub fn default_source(kind: SectionKind) -> &'static str {
        match kind {
            SectionKind::PersonalInformation => {
                include_str!("../assets/patterns/personal_information.tsv")
            }
            SectionKind::Education => include_str!("../assets/patterns/education.tsv"),
            SectionKind::WorkExperience => include_str!("../assets/patterns/work_experience.tsv"),
            SectionKind::Skills => include_str!("../assets/patterns/skills.tsv"),
            SectionKind::FunctionalArea => include_str!("../assets/patterns/functional_area.tsv"),
        }
    }

    pub fn default_for(kind: SectionKind) -> Self {
        Self::parse(kind, Self::default_source(kind)).expect("bundled patterns are well-formed")
    }

    pub fn kind(&self) -> SectionKind {
        self.kind
    }

    /// Applies built-in scanners and keyword rules to indexed sentences.
    /// Field names in the output are always a subset of the kind's manifest.
    pub fn extract(&self, sentences: &[(String, usize)]) -> BTreeMap<String, Vec<FieldValue>> {
        fn push(
            fields: &mut BTreeMap<String, Vec<FieldValue>>,
            field: &str,
            value: String,
            sentence_index: usize,
        ) {
            fields
                .entry(field.to_string())
                .or_default()
                .push(FieldValue {
                    value,
                    sentence_index,
                });
        }

        let mut fields: BTreeMap<String, Vec<FieldValue>> = BTreeMap::new();
        for (text, index) in sentences {
            match self.kind {
                SectionKind::PersonalInformation => {
                    for email in find_emails(text) {
                        let field = if fields.contains_key("Email ID") {
                            "Alternate email ID"
                        } else {
                            "Email ID"
                        };
                        push(&mut fields, field, email, *index);
                    }
                    for phone in find_phone_runs(text) {
                        let field = if fields.contains_key("Mobile number") {
                            "Alternate mobile number"
                        } else {
                            "Mobile number"
                        };
                        push(&mut fields, field, phone, *index);
                    }
                }
                SectionKind::Education => {
                    for year in find_years(text) {
                        push(&mut fields, "Undergrd year", year, *index);
                    }
                }
                SectionKind::WorkExperience => {
                    for year in find_years(text) {
                        push(&mut fields, "Experiences", year, *index);
                    }
                }
                SectionKind::Skills | SectionKind::FunctionalArea => {}
            }
            let lower = text.to_lowercase();
            for (keyword, field) in &self.keywords {
                if lower.contains(keyword.as_str()) {
                    push(&mut fields, field, keyword.clone(), *index);
                }
            }
        }
        fields
    }
}

/// Scans for email addresses: a run of local characters, '@', then dotted
/// domain labels ending in an alphabetic TLD of length >= 2. Matches are
/// non-overlapping and the domain is the longest valid prefix of the
/// domain-character run, so a sentence-final period is not swallowed.
pub fn find_emails(text: &str) -> Vec<String> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let is_local =
        |b: u8| b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'%' | b'+' | b'-');
    let is_domain = |b: u8| b.is_ascii_alphanumeric() || matches!(b, b'.' | b'-');
    let mut i = 0;
    let mut floor = 0; // end of the previous match; matches never overlap
    while i < bytes.len() {
        if bytes[i] != b'@' {
            i += 1;
            continue;
        }
        // Walk back over the local part, not past the previous match.
        let mut start = i;
        while start > floor && is_local(bytes[start - 1]) {
            start -= 1;
        }
        // Walk forward over the maximal domain-character run.
        let mut end = i + 1;
        while end < bytes.len() && is_domain(bytes[end]) {
            end += 1;
        }
        if start < i {
            let run = &text[i + 1..end];
            if let Some(len) = longest_valid_domain(run) {
                let match_end = i + 1 + len;
                out.push(text[start..match_end].to_string());
                floor = match_end;
                i = match_end;
                continue;
            }
        }
        i = end.max(i + 1);
    }
    out
}

/// Longest prefix of a domain-character run that is dotted labels ending in
/// an alphabetic label of length >= 2; None when no prefix qualifies.
fn longest_valid_domain(run: &str) -> Option<usize> {
    (1..=run.len()).rev().find(|&len| {
        let candidate = &run[..len];
        let mut labels = candidate.split('.');
        let n_labels = candidate.split('.').count();
        n_labels >= 2
            && labels.all(|label| !label.is_empty())
            && candidate
                .rsplit('.')
                .next()
                .is_some_and(|tld| tld.len() >= 2 && tld.bytes().all(|b| b.is_ascii_alphabetic()))
    })
}

/// Maximal ASCII digit runs of phone-number length (7..=15 digits).
pub fn find_phone_runs(text: &str) -> Vec<String> {
    digit_runs(text)
        .into_iter()
        .filter(|run| (7..=15).contains(&run.len()))
        .collect()
}

/// Four-digit runs that look like years (1900..=2099).
pub fn find_years(text: &str) -> Vec<String> {
    digit_runs(text)
        .into_iter()
        .filter(|run| {
            run.len() == 4 && matches!(run.parse::<u32>(), Ok(y) if (1900..=2099).contains(&y))
        })
        .collect()
}

fn digit_runs(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_ascii_digit() {
            current.push(c);
        } else if !current.is_empty() {
            out.push(core::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}
