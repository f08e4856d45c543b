use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Target,
    /// Present in the file but not used (row identifiers and the like).
    Ignore,
}

fn default_missing() -> String {
    "?".to_owned()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default = "default_missing")]
    pub missing_token: String,
    /// Closed category list; values outside it are rejected at load time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Delimiter {
    #[default]
    Comma,
    Whitespace,
}

/// Column layout of a CSV source file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSpec>,
    pub target: String,
    #[serde(default)]
    pub header: bool,
    #[serde(default)]
    pub delimiter: Delimiter,
}

impl Schema {
    pub fn from_json(text: &str) -> Result<Self> {
        let schema: Schema = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read schema {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let targets: Vec<_> = self
            .columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Target)
            .collect();
        if targets.len() != 1 {
            return Err(Error::Config(format!(
                "schema needs exactly one target column, found {}",
                targets.len()
            )));
        }
        if targets[0].name != self.target {
            return Err(Error::Config(format!(
                "target `{}` does not name the target column `{}`",
                self.target, targets[0].name
            )));
        }
        if !self
            .columns
            .iter()
            .any(|c| matches!(c.kind, ColumnKind::Numeric | ColumnKind::Categorical))
        {
            return Err(Error::Config("schema has no feature columns".into()));
        }
        let mut names: Vec<_> = self.columns.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("duplicate column name `{}`", w[0])));
        }
        Ok(())
    }

    pub fn target_index(&self) -> usize {
        self.columns
            .iter()
            .position(|c| c.kind == ColumnKind::Target)
            .expect("validated schema")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_schema_with_defaults() {
        let s = Schema::from_json(
            r#"{"columns":[{"name":"a","kind":"numeric"},{"name":"y","kind":"target"}],"target":"y"}"#,
        )
        .unwrap();
        assert_eq!(s.columns[0].missing_token, "?");
        assert!(!s.header);
        assert_eq!(s.target_index(), 1);
    }

    #[test]
    fn rejects_schema_without_target_or_features() {
        let no_target = r#"{"columns":[{"name":"a","kind":"numeric"}],"target":"y"}"#;
        assert!(matches!(Schema::from_json(no_target), Err(Error::Config(_))));
        let no_features = r#"{"columns":[{"name":"y","kind":"target"}],"target":"y"}"#;
        assert!(matches!(Schema::from_json(no_features), Err(Error::Config(_))));
        let two_targets = r#"{"columns":[{"name":"a","kind":"numeric"},{"name":"y","kind":"target"},{"name":"z","kind":"target"}],"target":"y"}"#;
        assert!(Schema::from_json(two_targets).is_err());
    }
}
