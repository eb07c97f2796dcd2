use std::fmt;
use std::path::PathBuf;
use std::time::Duration;

use serde::Serialize;

use crate::layers::solver::SolveStats;

/// Pipeline stages in execution order. `Config`, `Load` and `Write` only
/// appear in errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Load,
    Preprocess,
    Align,
    Decompose,
    Transfer,
    Recompose,
    Fuse,
    Write,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Load => "load",
            Stage::Preprocess => "preprocess",
            Stage::Align => "align",
            Stage::Decompose => "decompose",
            Stage::Transfer => "transfer",
            Stage::Recompose => "recompose",
            Stage::Fuse => "fuse",
            Stage::Write => "write",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: Stage,
    #[serde(serialize_with = "as_millis")]
    pub duration: Duration,
}

fn as_millis<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64() * 1e3)
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverReport {
    /// `"input"` or `"reference"`.
    pub image: &'static str,
    #[serde(flatten)]
    pub stats: SolveStats,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct PipelineReport {
    pub stages: Vec<StageTiming>,
    pub solver: Vec<SolverReport>,
    pub output: Option<PathBuf>,
    pub warnings: Vec<String>,
}

impl PipelineReport {
    pub fn total(&self) -> Duration {
        self.stages.iter().map(|s| s.duration).sum()
    }

    /// `Server-Timing` style summary: `align;dur=1.234, ...` in milliseconds.
    pub fn timing_header(&self) -> String {
        let mut parts: Vec<String> = self
            .stages
            .iter()
            .map(|s| format!("{};dur={:.3}", s.stage, s.duration.as_secs_f64() * 1e3))
            .collect();
        parts.push(format!("total;dur={:.3}", self.total().as_secs_f64() * 1e3));
        parts.join(", ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timing_header_format() {
        let report = PipelineReport {
            stages: vec![
                StageTiming { stage: Stage::Align, duration: Duration::from_micros(1500) },
                StageTiming { stage: Stage::Transfer, duration: Duration::from_micros(250) },
            ],
            ..Default::default()
        };
        assert_eq!(report.timing_header(), "align;dur=1.500, transfer;dur=0.250, total;dur=1.750");
    }
}
