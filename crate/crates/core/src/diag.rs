//! Diagnostics collected while interpreting a model.
//!
//! Conversion degrades gracefully: unsupported geometry or malformed
//! relations do not abort the pipeline, they land here instead.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Info,
}

/// What went sideways for one entity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagKind {
    /// No supported body representation; the component got a zero-extent
    /// placeholder box.
    InexactBox,
    /// A relation record referenced something unusable and was skipped.
    SkippedRelation,
    /// A reference did not resolve under the permissive parsing flag.
    DanglingReference,
    /// Anything else worth surfacing.
    Note,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub kind: DiagKind,
    /// Express id of the entity concerned, when there is one.
    pub entity: Option<u64>,
    pub message: String,
}

impl Diagnostic {
    pub fn warning(kind: DiagKind, entity: Option<u64>, message: impl Into<String>) -> Self {
        Self { severity: Severity::Warning, kind, entity, message: message.into() }
    }
}
