//! Section routing and result merging for the parse gateway: which service
//! kinds receive which classified sentences, and how per-service results
//! combine into one structured document.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ner::{owner_of, FieldValue, NerResult, SectionKind};
use crate::segmenter::{SectionClass, SectionedDocument};

/// Gateway fan-out mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseMode {
    Parallel,
    Sequential,
}

impl ParseMode {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "parallel" => Some(ParseMode::Parallel),
            "sequential" => Some(ParseMode::Sequential),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ParseMode::Parallel => "parallel",
            ParseMode::Sequential => "sequential",
        }
    }
}

/// One routing rule: sentences labeled with any class in `classes` go to
/// `target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub classes: Vec<SectionClass>,
    pub target: SectionKind,
}

/// The full routing table. Source class sets may overlap (a sentence can go
/// to several services) but every service kind appears exactly once as a
/// target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingTable {
    routes: Vec<Route>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RoutingError {
    DuplicateTarget(SectionKind),
    MissingTarget(SectionKind),
    /// Merge was given no successful results.
    NothingToMerge,
}

impl core::fmt::Display for RoutingError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            RoutingError::DuplicateTarget(k) => write!(f, "duplicate routing target {k}"),
            RoutingError::MissingTarget(k) => write!(f, "no route targets {k}"),
            RoutingError::NothingToMerge => write!(f, "no successful results to merge"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for RoutingError {}

impl RoutingTable {
    pub fn new(routes: Vec<Route>) -> Result<Self, RoutingError> {
        let mut seen = BTreeSet::new();
        for route in &routes {
            if !seen.insert(route.target) {
                return Err(RoutingError::DuplicateTarget(route.target));
            }
        }
        for kind in SectionKind::ALL {
            if !seen.contains(&kind) {
                return Err(RoutingError::MissingTarget(kind));
            }
        }
        Ok(Self { routes })
    }

    /// The deployment routing: each of the first three classes feeds its own
    /// service; skills reads work-experience and others sentences; the
    /// functional-area service reads others sentences.
    pub fn standard() -> Self {
        use SectionClass::*;
        use SectionKind as K;
        Self::new(vec![
            Route {
                classes: vec![PersonalInformation],
                target: K::PersonalInformation,
            },
            Route {
                classes: vec![Education],
                target: K::Education,
            },
            Route {
                classes: vec![WorkExperience],
                target: K::WorkExperience,
            },
            Route {
                classes: vec![WorkExperience, Others],
                target: K::Skills,
            },
            Route {
                classes: vec![Others],
                target: K::FunctionalArea,
            },
        ])
        .expect("standard table is valid")
    }

    pub fn routes(&self) -> &[Route] {
        &self.routes
    }

    /// Assigns each sentence (with its document index) to target services.
    /// Kinds with no routed sentences are absent from the result.
    pub fn route(
        &self,
        document: &SectionedDocument,
    ) -> BTreeMap<SectionKind, Vec<(String, usize)>> {
        let mut batches: BTreeMap<SectionKind, Vec<(String, usize)>> = BTreeMap::new();
        for route in &self.routes {
            let mut batch = Vec::new();
            for (index, sentence) in document.sentences.iter().enumerate() {
                if route.classes.contains(&sentence.label) {
                    batch.push((sentence.text.clone(), index));
                }
            }
            if !batch.is_empty() {
                batches.insert(route.target, batch);
            }
        }
        batches
    }
}

/// Wall-clock duration of each gateway stage, in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub extract_s: f64,
    pub sectioning_s: f64,
    pub embedding_s: f64,
    pub services_s: f64,
    pub total_s: f64,
    pub per_service_s: BTreeMap<SectionKind, f64>,
}

/// An extracted value with its provenance: which service produced it and
/// which sentence it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenancedValue {
    pub value: String,
    pub kind: SectionKind,
    pub sentence_index: usize,
}

/// category name -> field name -> values.
pub type Categories = BTreeMap<String, BTreeMap<String, Vec<ProvenancedValue>>>;

/// The gateway's response to one parse request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedDocument {
    pub categories: Categories,
    pub timings: StageTimings,
    /// One entry per tolerated service failure; empty on full success.
    pub warnings: Vec<String>,
}

/// One structured timing log line, as written by the gateway and consumed
/// by the report tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub doc_id: String,
    pub mode: ParseMode,
    pub timings: StageTimings,
    pub warnings: Vec<String>,
}

/// Merges per-service results into the category map. Every field lands
/// under the category that owns it; when several kinds report the same
/// field, the owning kind's values win.
pub fn merge(results: &BTreeMap<SectionKind, NerResult>) -> Result<Categories, RoutingError> {
    if results.is_empty() {
        return Err(RoutingError::NothingToMerge);
    }
    // field -> reporting kind -> values
    let mut by_field: BTreeMap<&str, BTreeMap<SectionKind, &Vec<FieldValue>>> = BTreeMap::new();
    for (&kind, result) in results {
        for (field, values) in &result.fields {
            by_field
                .entry(field.as_str())
                .or_default()
                .insert(kind, values);
        }
    }

    let mut categories: Categories = BTreeMap::new();
    for (field, reporters) in by_field {
        let owner = owner_of(field);
        let (source_kind, values) = match owner.and_then(|o| reporters.get(&o).map(|v| (o, *v))) {
            Some(hit) => hit,
            // Owner did not report it: fall back to the first reporter.
            None => {
                let (&kind, &values) = reporters.iter().next().expect("non-empty reporters");
                (kind, values)
            }
        };
        let category = owner.unwrap_or(source_kind).category_name();
        let slot = categories
            .entry(String::from(category))
            .or_default()
            .entry(String::from(field))
            .or_default();
        for v in values {
            slot.push(ProvenancedValue {
                value: v.value.clone(),
                kind: source_kind,
                sentence_index: v.sentence_index,
            });
        }
    }
    Ok(categories)
}

/// Short human summary of a per-service failure, used for warnings.
pub fn failure_warning(kind: SectionKind, error: &str) -> String {
    format!("{kind}: {error}")
}
