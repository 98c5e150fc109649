//! JSON-lines checkpoints: one line per completed unit of work, tagged with
//! the config hash.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

#[derive(Serialize, Deserialize)]
struct Line {
    hash: String,
    unit: usize,
    data: Value,
}

pub struct Checkpoint {
    hash: String,
    path: Option<PathBuf>,
    done: BTreeMap<usize, Value>,
    writer: Option<Mutex<File>>,
}

impl Checkpoint {
    /// Opens (or creates) the checkpoint at `path`. Lines from another config
    /// are an error; a torn last line from an interrupted write is dropped.
    pub fn open(path: Option<&Path>, hash: &str) -> Result<Self, CliError> {
        let mut done = BTreeMap::new();
        let Some(path) = path else {
            return Ok(Self {
                hash: hash.into(),
                path: None,
                done,
                writer: None,
            });
        };
        if path.exists() {
            let lines: Vec<String> = BufReader::new(File::open(path)?).lines().collect::<Result<_, _>>()?;
            let last = lines.len().saturating_sub(1);
            for (i, text) in lines.iter().enumerate() {
                if text.trim().is_empty() {
                    continue;
                }
                let line: Line = match serde_json::from_str(text) {
                    Ok(l) => l,
                    Err(_) if i == last => break,
                    Err(e) => return Err(CliError::Config(format!("corrupt checkpoint {}: {e}", path.display()))),
                };
                if line.hash != hash {
                    return Err(CliError::ConfigMismatch {
                        path: path.display().to_string(),
                        found: line.hash,
                        expected: hash.into(),
                    });
                }
                done.insert(line.unit, line.data);
            }
            // Rewrite without any torn tail so appends start on a fresh line.
            let mut f = File::create(path)?;
            for (unit, data) in &done {
                let line = Line {
                    hash: hash.into(),
                    unit: *unit,
                    data: data.clone(),
                };
                writeln!(f, "{}", serde_json::to_string(&line).expect("serializable"))?;
            }
        }
        let writer = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            hash: hash.into(),
            path: Some(path.to_path_buf()),
            done,
            writer: Some(Mutex::new(writer)),
        })
    }

    pub fn completed<T: DeserializeOwned>(&self, unit: usize) -> Result<Option<T>, CliError> {
        self.done
            .get(&unit)
            .map(|v| {
                serde_json::from_value(v.clone()).map_err(|e| {
                    let p = self.path.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
                    CliError::Config(format!("checkpoint {p} unit {unit}: {e}"))
                })
            })
            .transpose()
    }

    /// Appends a finished unit; called only once its result is complete.
    pub fn record<T: Serialize>(&self, unit: usize, data: &T) -> Result<(), CliError> {
        let Some(w) = &self.writer else {
            return Ok(());
        };
        let line = Line {
            hash: self.hash.clone(),
            unit,
            data: serde_json::to_value(data).map_err(|e| CliError::Config(e.to_string()))?,
        };
        let text = serde_json::to_string(&line).map_err(|e| CliError::Config(e.to_string()))? + "\n";
        let mut f = w.lock().expect("checkpoint writer poisoned");
        f.write_all(text.as_bytes())?;
        f.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resume_and_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ck.jsonl");
        let ck = Checkpoint::open(Some(&p), "aa").unwrap();
        ck.record(2, &vec![0.1, 0.2]).unwrap();
        ck.record(0, &vec![1.0 / 3.0]).unwrap();
        drop(ck);
        // Simulate a kill in the middle of a write.
        let mut f = OpenOptions::new().append(true).open(&p).unwrap();
        write!(f, "{{\"hash\":\"aa\",\"unit\":1,\"da").unwrap();
        drop(f);
        let ck = Checkpoint::open(Some(&p), "aa").unwrap();
        assert_eq!(ck.completed::<Vec<f64>>(0).unwrap(), Some(vec![1.0 / 3.0]));
        assert_eq!(ck.completed::<Vec<f64>>(1).unwrap(), None);
        assert_eq!(ck.completed::<Vec<f64>>(2).unwrap(), Some(vec![0.1, 0.2]));
        drop(ck);
        assert!(matches!(Checkpoint::open(Some(&p), "bb"), Err(CliError::ConfigMismatch { .. })));
    }
}
