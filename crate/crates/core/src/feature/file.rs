//! Feature files: one `weight<TAB>feature` per line, `#` starts a comment.

use std::fmt::Write;

use super::{parse_feature_with, FeatureError, FeatureExpr, Signature};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatureFileError {
    #[error("line {line}: expected `weight<TAB>feature`")]
    MissingTab { line: usize },
    #[error("line {line}: bad weight `{text}`")]
    BadWeight { line: usize, text: String },
    #[error("line {line}: {source}")]
    Feature {
        line: usize,
        #[source]
        source: FeatureError,
    },
}

pub fn parse_feature_file(
    text: &str,
    sig: &Signature,
) -> Result<Vec<(f64, FeatureExpr)>, FeatureFileError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let (w, f) = content
            .split_once('\t')
            .ok_or(FeatureFileError::MissingTab { line })?;
        let weight: f64 = w.trim().parse().map_err(|_| FeatureFileError::BadWeight {
            line,
            text: w.trim().to_string(),
        })?;
        if !weight.is_finite() {
            return Err(FeatureFileError::BadWeight {
                line,
                text: w.trim().to_string(),
            });
        }
        let feature = parse_feature_with(f.trim(), sig)
            .map_err(|source| FeatureFileError::Feature { line, source })?;
        out.push((weight, feature));
    }
    Ok(out)
}

/// Weights are written with `{:?}`, which round-trips `f64` exactly.
pub fn write_feature_file<'a>(entries: impl IntoIterator<Item = (f64, &'a FeatureExpr)>) -> String {
    let mut s = String::new();
    for (w, f) in entries {
        writeln!(s, "{w:?}\t{f}").unwrap();
    }
    s
}
