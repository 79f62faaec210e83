use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::feature::is_feature_name;
use super::{FlcError, SourceUnit};

/// A product: one member of the product line, named by its enabled features.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProductDef {
    pub name: String,
    pub enabled: BTreeSet<String>,
}

impl ProductDef {
    pub fn new<I, S>(name: impl Into<String>, enabled: I) -> ProductDef
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ProductDef {
            name: name.into(),
            enabled: enabled.into_iter().map(Into::into).collect(),
        }
    }

    pub fn validate(&self, unit: &SourceUnit) -> Result<(), FlcError> {
        let declared = unit.declared_features();
        for f in &self.enabled {
            if !declared.contains(f.as_str()) {
                return Err(FlcError::UnknownProductFeature {
                    product: self.name.clone(),
                    feature: f.clone(),
                });
            }
        }
        Ok(())
    }
}

impl fmt::Display for ProductDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let feats: Vec<&str> = self.enabled.iter().map(String::as_str).collect();
        write!(f, "{}: {}", self.name, feats.join(", "))
    }
}

/// Parses a product file: one `name: feat1, feat2, ...` per line. Blank lines
/// and lines starting with `#` are ignored.
pub fn parse_products(text: &str) -> Result<Vec<ProductDef>, FlcError> {
    let mut out: Vec<ProductDef> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx as u32 + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let Some((name, feats)) = t.split_once(':') else {
            return Err(FlcError::ProductFile {
                line,
                message: "expected `name: feature, ...`".into(),
            });
        };
        let name = name.trim();
        if name.is_empty() {
            return Err(FlcError::ProductFile {
                line,
                message: "empty product name".into(),
            });
        }
        let mut enabled = BTreeSet::new();
        for f in feats.split(',').map(str::trim).filter(|f| !f.is_empty()) {
            if !is_feature_name(f) {
                return Err(FlcError::ProductFile {
                    line,
                    message: format!("invalid feature name `{f}`"),
                });
            }
            enabled.insert(f.to_string());
        }
        if out.iter().any(|p| p.name == name) {
            return Err(FlcError::ProductFile {
                line,
                message: format!("duplicate product `{name}`"),
            });
        }
        out.push(ProductDef {
            name: name.to_string(),
            enabled,
        });
    }
    if out.is_empty() {
        return Err(FlcError::ProductFile {
            line: 0,
            message: "no products defined".into(),
        });
    }
    Ok(out)
}

pub fn render_products(products: &[ProductDef]) -> String {
    products.iter().map(|p| format!("{p}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_renders() {
        let text = "# products\nbase:\nsv: Sign, Verify\n\n";
        let ps = parse_products(text).unwrap();
        assert_eq!(ps.len(), 2);
        assert!(ps[0].enabled.is_empty());
        assert_eq!(ps[1].enabled.len(), 2);
        assert_eq!(parse_products(&render_products(&ps)).unwrap(), ps);
    }

    #[test]
    fn errors() {
        assert!(parse_products("").is_err());
        assert!(parse_products("a: X\na: Y\n").is_err());
        assert!(parse_products("nocolon\n").is_err());
        assert!(parse_products("a: 9x\n").is_err());
    }
}
