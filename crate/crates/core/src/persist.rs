//! Versioned JSON documents for fitted artifacts.
//!
//! Floats are written in shortest round-trip form and parsed with exact
//! rounding, so a save/load cycle reproduces every value bit for bit.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dc::{CollaborationModel, PartyState};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Envelope<T> {
    kind: String,
    version: u32,
    body: T,
}

pub trait Document: Serialize + DeserializeOwned {
    const KIND: &'static str;
}

impl Document for PartyState {
    const KIND: &'static str = "party-state";
}

impl Document for CollaborationModel {
    const KIND: &'static str = "collaboration-model";
}

pub fn to_json<T: Document>(value: &T) -> Result<String> {
    let env = Envelope {
        kind: T::KIND.to_owned(),
        version: FORMAT_VERSION,
        body: value,
    };
    Ok(serde_json::to_string_pretty(&env)?)
}

pub fn from_json<T: Document>(text: &str) -> Result<T> {
    let env: Envelope<serde_json::Value> = serde_json::from_str(text)?;
    if env.kind != T::KIND {
        return Err(Error::Document(format!(
            "expected a {} document, found {}",
            T::KIND,
            env.kind
        )));
    }
    if env.version != FORMAT_VERSION {
        return Err(Error::Document(format!(
            "unsupported {} version {} (this build reads {FORMAT_VERSION})",
            T::KIND,
            env.version
        )));
    }
    Ok(serde_json::from_value(env.body)?)
}

pub fn save<T: Document>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_json(value)?).map_err(|e| Error::io(path, e))
}

pub fn load<T: Document>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}
