//! Command-line front end: figure presets, custom experiments, CSV/JSON
//! datasets with a reproducibility manifest, and a text summary.

pub mod args;
pub mod output;
pub mod summary;

use std::path::{Path, PathBuf};

use css_core::montecarlo::{roc_sweep, RocCurve};

pub use args::{resolve, Args, Format, Preset, RunPlan};
pub use output::{emit_results, RunManifest};
pub use summary::summarize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid manifest: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] css_core::Error),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit status: 2 for usage errors, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            _ => 1,
        }
    }
}

/// Runs every experiment of a plan, in order, on `threads` workers (all
/// cores when `None`). Results do not depend on the worker count.
pub fn run_plan(plan: &RunPlan, threads: Option<usize>) -> Result<Vec<RocCurve>, CliError> {
    let sweep = || plan.experiments.iter().map(roc_sweep).collect::<Result<Vec<_>, _>>();
    let curves = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(sweep)?,
        None => sweep()?,
    };
    Ok(curves)
}

/// Result of a complete invocation.
#[derive(Debug)]
pub struct Outcome {
    pub curves: Vec<RocCurve>,
    pub manifest: RunManifest,
    pub summary: String,
}

/// Resolves (or replays) the configuration, runs it and writes the outputs.
pub fn run(args: &Args) -> Result<Outcome, CliError> {
    let (plan, format, out) = match &args.replay {
        Some(path) => {
            let m = RunManifest::load(path)?;
            let out = args.out.clone().or_else(|| {
                m.outputs
                    .first()
                    .filter(|o| o.as_str() != "-")
                    .map(PathBuf::from)
            });
            (m.plan, m.format, out)
        }
        None => (resolve(args)?, args.format, args.out.clone()),
    };

    let manifest_path = match (&args.manifest, &out, format) {
        (Some(p), _, _) => Some(p.clone()),
        (None, Some(o), Format::Csv) => Some(output::manifest_path_for(o)),
        _ => None,
    };
    let mut outputs = vec![out.as_ref().map_or("-".to_string(), |p| p.display().to_string())];
    if let Some(p) = &manifest_path {
        outputs.push(p.display().to_string());
    }

    let curves = run_plan(&plan, args.threads)?;
    let manifest = RunManifest::new(plan, format, outputs);
    emit_results(&curves, format, out.as_deref(), &manifest)?;
    if let Some(p) = &manifest_path {
        output::write_manifest(&manifest, p)?;
    }
    let summary = summarize(&curves);
    Ok(Outcome {
        curves,
        manifest,
        summary,
    })
}
