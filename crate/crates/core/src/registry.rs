//! Name-keyed factories for interchangeable strategies (retrievers, generator
//! backends, prompt formats, embedders).

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RegistryError {
    #[error("unknown {kind} {name:?}; registered: {known}")]
    Unknown {
        kind: &'static str,
        name: String,
        known: String,
    },
    #[error("{kind} {name:?} is already registered")]
    Duplicate { kind: &'static str, name: String },
    #[error("cannot build {kind} {name:?}: {reason}")]
    Build {
        kind: &'static str,
        name: String,
        reason: String,
    },
}

type Factory<C, T> = Box<dyn Fn(&C, &str) -> Result<Box<T>, String> + Send + Sync>;

/// Factories producing `Box<T>` from a shared context `C` plus the argument
/// that followed `name:` in the selector (empty if none).
pub struct Registry<C, T: ?Sized> {
    kind: &'static str,
    factories: BTreeMap<String, Factory<C, T>>,
}

impl<C, T: ?Sized> Registry<C, T> {
    pub fn new(kind: &'static str) -> Self {
        Self { kind, factories: BTreeMap::new() }
    }

    pub fn register(
        &mut self,
        name: &str,
        factory: impl Fn(&C, &str) -> Result<Box<T>, String> + Send + Sync + 'static,
    ) -> Result<(), RegistryError> {
        if self.factories.contains_key(name) {
            return Err(RegistryError::Duplicate { kind: self.kind, name: name.to_owned() });
        }
        self.factories.insert(name.to_owned(), Box::new(factory));
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    /// Builds from a selector such as `bm25`, `oracle:answer_table` or
    /// `remote:http://host:8080`.
    pub fn build(&self, selector: &str, ctx: &C) -> Result<Box<T>, RegistryError> {
        let (name, arg) = selector.split_once(':').unwrap_or((selector, ""));
        let factory = self.factories.get(name).ok_or_else(|| RegistryError::Unknown {
            kind: self.kind,
            name: name.to_owned(),
            known: self.names().collect::<Vec<_>>().join(", "),
        })?;
        factory(ctx, arg).map_err(|reason| RegistryError::Build {
            kind: self.kind,
            name: name.to_owned(),
            reason,
        })
    }
}

impl<C, T: ?Sized> fmt::Debug for Registry<C, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("names", &self.factories.keys().collect::<Vec<_>>())
            .finish()
    }
}
