use std::fmt;
use std::path::{Path, PathBuf};

use butler_core::service::{parse_commands, ScriptedCommand};
use butler_core::sim::{EventScript, WorldState};

/// A file that could not be read or parsed, with its path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileError {
    pub path: PathBuf,
    pub message: String,
}

impl fmt::Display for FileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path.display(), self.message)
    }
}

impl std::error::Error for FileError {}

fn read(path: &Path) -> Result<String, FileError> {
    std::fs::read_to_string(path).map_err(|e| FileError {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// World text, event script and commands of one run.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub world: String,
    pub script: EventScript,
    pub commands: Vec<ScriptedCommand>,
}

/// Reads and validates the files. A missing event script or command list
/// means none.
pub fn load(world: &Path, events: Option<&Path>, commands: Option<&Path>) -> Result<Bundle, FileError> {
    let text = read(world)?;
    let state = WorldState::from_json(&text).map_err(|e| FileError {
        path: world.to_path_buf(),
        message: e.to_string(),
    })?;
    state.validate().map_err(|e| FileError {
        path: world.to_path_buf(),
        message: e.to_string(),
    })?;
    let script = match events {
        None => EventScript::default(),
        Some(p) => {
            let s = EventScript::from_json(&read(p)?).map_err(|e| FileError {
                path: p.to_path_buf(),
                message: e.to_string(),
            })?;
            s.validate(&state).map_err(|e| FileError {
                path: p.to_path_buf(),
                message: e.to_string(),
            })?;
            s
        }
    };
    let commands = match commands {
        None => Vec::new(),
        Some(p) => parse_commands(&read(p)?),
    };
    Ok(Bundle {
        world: text,
        script,
        commands,
    })
}
