use std::path::{Path, PathBuf};

use crate::config::{Catalogs, ConfigError, SchemaSet, Validator};
use crate::llm::PromptLibrary;

/// Root of the source tree this crate was built from; holds the shipped
/// schemas, catalogs, prompts and fixtures.
pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Grammar of the placement language, as shown to the model.
pub const PLACEMENT_GRAMMAR: &str = include_str!("../../../docs/placement-lang.ebnf");

/// Everything loaded from an asset root: `schemas/`, `catalogs/`, `prompts/`.
#[derive(Debug)]
pub struct Assets {
    pub root: PathBuf,
    pub validator: Validator,
    pub prompts: PromptLibrary,
}

impl Assets {
    pub fn load(root: &Path) -> Result<Self, ConfigError> {
        let schemas = SchemaSet::load(&root.join("schemas"))?;
        let catalogs = Catalogs::load(&root.join("catalogs"))?;
        Ok(Self {
            root: root.to_path_buf(),
            validator: Validator::new(schemas, catalogs),
            prompts: PromptLibrary::new(root.join("prompts")),
        })
    }

    /// Assets of the source tree, for tests and examples.
    pub fn shipped() -> Self {
        Self::load(&repo_root()).expect("shipped assets load")
    }
}
