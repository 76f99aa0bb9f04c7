//! Schema JSON.
//!
//! ```json
//! {
//!   "scaled_group": 0,
//!   "blocks": [
//!     {"name": "sex", "kind": "bit", "categories": ["Female", "Male"], "role": "protected"},
//!     {"name": "age", "kind": "categorical", "categories": ["<25", "25-45", ">45"]}
//!   ]
//! }
//! ```

use std::path::Path;

use maxent_debias_core::{AttributeBlock, BlockKind, DomainSchema, Role};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindSpec {
    Bit,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoleSpec {
    #[default]
    Feature,
    Label,
    Protected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub name: String,
    pub kind: KindSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
    #[serde(default)]
    pub role: RoleSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaFile {
    /// Protected group whose cell counts reweighting divides by `tau`.
    #[serde(default)]
    pub scaled_group: u32,
    pub blocks: Vec<BlockSpec>,
}

impl SchemaFile {
    pub fn to_schema(&self) -> Result<DomainSchema> {
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let role = match b.role {
                RoleSpec::Feature => Role::Feature,
                RoleSpec::Label => Role::Label,
                RoleSpec::Protected => Role::Protected,
            };
            let block = match b.kind {
                KindSpec::Bit => {
                    let block = AttributeBlock::bit(&b.name, role);
                    match &b.categories {
                        None => block,
                        Some(c) if c.len() == 2 => block.with_labels(c),
                        Some(c) => {
                            return Err(CliError::config(format!(
                                "bit block `{}` needs exactly 2 categories, got {}",
                                b.name,
                                c.len()
                            )))
                        }
                    }
                }
                KindSpec::Categorical => {
                    let c = b.categories.as_ref().ok_or_else(|| {
                        CliError::config(format!("categorical block `{}` lists no categories", b.name))
                    })?;
                    AttributeBlock::one_hot(&b.name, c.len(), role).with_labels(c)
                }
            };
            blocks.push(block);
        }
        let mut seen = std::collections::BTreeSet::new();
        for b in &blocks {
            for l in &b.labels {
                if !seen.insert((b.name.clone(), l.clone())) {
                    return Err(CliError::config(format!(
                        "block `{}` lists category `{l}` twice",
                        b.name
                    )));
                }
            }
        }
        let schema = DomainSchema::new(blocks).map_err(|e| CliError::config(e.to_string()))?;
        schema
            .with_scaled_group(self.scaled_group)
            .map_err(|e| CliError::config(e.to_string()))
    }

    pub fn from_schema(schema: &DomainSchema) -> Self {
        let blocks = schema
            .blocks()
            .iter()
            .map(|b| BlockSpec {
                name: b.name.clone(),
                kind: match b.kind {
                    BlockKind::Bit => KindSpec::Bit,
                    BlockKind::OneHot { .. } => KindSpec::Categorical,
                },
                categories: Some(b.labels.clone()),
                role: match b.role {
                    Role::Feature => RoleSpec::Feature,
                    Role::Label => RoleSpec::Label,
                    Role::Protected => RoleSpec::Protected,
                },
            })
            .collect();
        Self {
            scaled_group: schema.scaled_group(),
            blocks,
        }
    }
}

pub fn parse_schema(text: &str) -> Result<DomainSchema> {
    let file: SchemaFile =
        serde_json::from_str(text).map_err(|e| CliError::config(format!("schema JSON: {e}")))?;
    file.to_schema()
}

pub fn load_schema(path: &Path) -> Result<DomainSchema> {
    parse_schema(&super::read_to_string(path)?)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}
