use std::path::{Path, PathBuf};

use super::run::{RunOutput, CLOUD_FILE, GRASPS_FILE, MASK_FILE, TRACE_FILE};
use super::{PipelineError, RunTrace};
use crate::geometry::io;

/// Run directories under one root, one per run id. Each directory is
/// assembled under a hidden temporary name and renamed into place, so
/// readers never see a partial run.
#[derive(Debug, Clone)]
pub struct TraceStore {
    root: PathBuf,
}

fn write_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::TraceWrite(format!("{}: {e}", path.display()))
}

impl TraceStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn run_dir(&self, run_id: &str) -> PathBuf {
        self.root.join(run_id)
    }

    pub fn write(&self, out: &RunOutput) -> Result<PathBuf, PipelineError> {
        let id = &out.trace.run_id;
        if id.is_empty() || id.starts_with('.') || id.contains(['/', '\\']) {
            return Err(PipelineError::TraceWrite(format!("unusable run id '{id}'")));
        }
        std::fs::create_dir_all(&self.root).map_err(|e| write_err(&self.root, e))?;
        let tmp = self.root.join(format!(".tmp-{id}"));
        let fin = self.run_dir(id);
        if fin.exists() {
            return Err(PipelineError::TraceWrite(format!("run {id} already exists")));
        }
        std::fs::create_dir_all(&tmp).map_err(|e| write_err(&tmp, e))?;
        let put = |name: &str, bytes: &[u8]| -> Result<(), PipelineError> {
            let p = tmp.join(name);
            std::fs::write(&p, bytes).map_err(|e| write_err(&p, e))
        };
        put(TRACE_FILE, out.trace.to_json().as_bytes())?;
        if let Some(mask) = &out.artifacts.mask {
            put(MASK_FILE, &io::encode_mask_png(mask).map_err(|e| write_err(&tmp, e))?)?;
        }
        if let Some(cloud) = &out.artifacts.cloud {
            put(CLOUD_FILE, &serde_json::to_vec(cloud).expect("cloud serializes"))?;
        }
        if let Some(c) = &out.artifacts.candidates {
            put(GRASPS_FILE, &serde_json::to_vec_pretty(c).expect("candidates serialize"))?;
        }
        std::fs::rename(&tmp, &fin).map_err(|e| write_err(&fin, e))?;
        Ok(fin)
    }

    pub fn load(&self, run_id: &str) -> Result<RunTrace, PipelineError> {
        if run_id.starts_with('.') || run_id.contains(['/', '\\']) {
            return Err(PipelineError::NotFound(run_id.to_string()));
        }
        let path = self.run_dir(run_id).join(TRACE_FILE);
        let text = std::fs::read_to_string(&path).map_err(|_| PipelineError::NotFound(run_id.to_string()))?;
        RunTrace::from_json(&text).map_err(|e| PipelineError::TraceWrite(format!("{}: {e}", path.display())))
    }

    /// Bytes of one artifact file of a run.
    pub fn artifact(&self, run_id: &str, file: &str) -> Result<Vec<u8>, PipelineError> {
        if run_id.starts_with('.') || run_id.contains(['/', '\\']) {
            return Err(PipelineError::NotFound(run_id.to_string()));
        }
        std::fs::read(self.run_dir(run_id).join(file)).map_err(|_| PipelineError::NotFound(format!("{run_id}/{file}")))
    }

    /// Published traces, ordered by start time then run id.
    pub fn list(&self) -> Result<Vec<RunTrace>, PipelineError> {
        let Ok(entries) = std::fs::read_dir(&self.root) else { return Ok(vec![]) };
        let mut out = Vec::new();
        for entry in entries.flatten() {
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.starts_with('.') || !entry.path().is_dir() {
                continue;
            }
            if let Ok(t) = self.load(&name) {
                out.push(t);
            }
        }
        out.sort_by(|a, b| a.started_at.cmp(&b.started_at).then(a.run_id.cmp(&b.run_id)));
        Ok(out)
    }
}
