//! Name-keyed registry of trait objects.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Implemented by anything stored in a [`Registry`].
pub trait Named {
    fn name(&self) -> &'static str;
}

/// Entries keep registration order; names are unique.
pub struct Registry<T: ?Sized + Named> {
    kind: &'static str,
    entries: Vec<Arc<T>>,
}

impl<T: ?Sized + Named> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: Vec::new(),
        }
    }

    pub fn register(&mut self, entry: Arc<T>) -> Result<()> {
        if self.entries.iter().any(|e| e.name() == entry.name()) {
            return Err(Error::InvalidConfig(format!(
                "{} `{}` is already registered",
                self.kind,
                entry.name()
            )));
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn with(mut self, entry: Arc<T>) -> Self {
        self.register(entry).expect("unique built-in names");
        self
    }

    pub fn get(&self, name: &str) -> Result<Arc<T>> {
        self.entries
            .iter()
            .find(|e| e.name() == name)
            .cloned()
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown {} `{name}` (available: {})",
                    self.kind,
                    self.names().join(", ")
                ))
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<T>> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl<T: ?Sized + Named> fmt::Debug for Registry<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("entries", &self.names())
            .finish()
    }
}
