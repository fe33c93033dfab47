use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use tumorseg::eval::{aggregate, evaluate_case, write_csv, DiceReport, EvalMode};
use tumorseg::io::{read_labels, write_json};
use tumorseg::phantom::{generate_phantom, PhantomSpec};
use tumorseg::pipeline::{
    load_case, run_full, run_subregions_given_wt, write_failure, write_outputs, write_phantom,
    CaseInputs, PipelineError, RunConfig,
};
use tumorseg::study::{Modality, TumorType};

#[derive(Parser)]
#[command(name = "tumorseg", version, about = "Brain tumor and subregion segmentation from multi-modal MRI")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tissue, whole-tumor and subregion segmentation of one case.
    Segment(SegmentArgs),
    /// Subregion labels inside a supplied whole-tumor mask.
    Subregions {
        /// Whole-tumor mask (NIfTI, nonzero = tumor).
        #[arg(long)]
        wt: PathBuf,
        #[command(flatten)]
        inputs: SegmentArgs,
    },
    /// Synthetic phantom with ground-truth labels.
    Phantom {
        /// Phantom spec as JSON.
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        spec: Option<PathBuf>,
        /// Built-in spec: atrt, dipg, lgg or healthy.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Dice scores of a prediction against a truth label image.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        mode: EvalMode,
        /// CSV file; the aggregate is written next to it as JSON.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "case")]
        case_id: String,
    },
    /// Segments every case of a manifest concurrently.
    Batch {
        /// JSON manifest listing the cases.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
}

#[derive(Args, Clone)]
struct SegmentArgs {
    #[arg(long = "type")]
    tumor_type: TumorType,
    #[arg(long)]
    t1: PathBuf,
    #[arg(long)]
    t1post: PathBuf,
    #[arg(long)]
    t2: PathBuf,
    #[arg(long)]
    flair: PathBuf,
    #[arg(long)]
    adc: Option<PathBuf>,
    #[arg(long)]
    atlas_wm: PathBuf,
    #[arg(long)]
    atlas_gm: PathBuf,
    /// Run configuration as JSON.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    debug: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Brain mask; by default every voxel that is nonzero in some scan.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Defaults to the output directory name.
    #[arg(long)]
    case_id: Option<String>,
}

impl SegmentArgs {
    fn inputs(&self) -> CaseInputs {
        let mut scans = BTreeMap::from([
            (Modality::T1, self.t1.clone()),
            (Modality::T1Post, self.t1post.clone()),
            (Modality::T2, self.t2.clone()),
            (Modality::Flair, self.flair.clone()),
        ]);
        if let Some(adc) = &self.adc {
            scans.insert(Modality::Adc, adc.clone());
        }
        CaseInputs {
            scans,
            atlas_wm: self.atlas_wm.clone(),
            atlas_gm: self.atlas_gm.clone(),
            mask: self.mask.clone(),
        }
    }

    fn case_id(&self) -> String {
        self.case_id.clone().unwrap_or_else(|| dir_name(&self.out))
    }

    fn config(&self) -> Result<RunConfig, PipelineError> {
        let mut cfg = read_config(&self.config)?;
        cfg.debug |= self.debug;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

fn dir_name(p: &Path) -> String {
    p.file_name().map_or_else(|| "case".to_string(), |n| n.to_string_lossy().into_owned())
}

fn invalid(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Validation(e.to_string())
}

fn read_config(path: &Path) -> Result<RunConfig, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    RunConfig::from_json(&text)
}

/// Runs a case and writes either the outputs or a failure report.
fn segment_case(
    case_id: &str,
    tumor_type: TumorType,
    inputs: &CaseInputs,
    cfg: &RunConfig,
    wt: Option<&Path>,
    truth: Option<&Path>,
    out: &Path,
) -> Result<Option<DiceReport>, PipelineError> {
    let run = || {
        let (study, atlas_wm, atlas_gm) = load_case::<f64>(case_id, tumor_type, inputs)?;
        let truth = truth.map(read_labels).transpose().map_err(invalid)?;
        let result = match wt {
            Some(p) => {
                let mask = read_labels(p).map_err(invalid)?;
                run_subregions_given_wt(&study, &mask, &atlas_wm, &atlas_gm, cfg)?
            }
            None => run_full(&study, &atlas_wm, &atlas_gm, cfg, truth.as_ref())?,
        };
        write_outputs(&result, cfg, out)?;
        Ok(result.dice)
    };
    run().inspect_err(|e: &PipelineError| {
        let _ = write_failure(case_id, e, out);
    })
}

fn segment(args: &SegmentArgs, wt: Option<&Path>) -> Result<(), PipelineError> {
    let cfg = args.config()?;
    segment_case(&args.case_id(), args.tumor_type, &args.inputs(), &cfg, wt, None, &args.out).map(|_| ())
}

fn phantom(spec: Option<&Path>, preset: Option<&str>, out: &Path, seed: Option<u64>) -> Result<(), PipelineError> {
    let mut spec = match (spec, preset) {
        (Some(p), _) => {
            let text = std::fs::read_to_string(p).map_err(|e| invalid(format!("{}: {e}", p.display())))?;
            serde_json::from_str::<PhantomSpec>(&text).map_err(|e| invalid(format!("{}: {e}", p.display())))?
        }
        (None, Some(name)) => PhantomSpec::preset(name).ok_or_else(|| {
            invalid(format!("unknown preset {name} (expected one of {})", PhantomSpec::PRESETS.join(", ")))
        })?,
        (None, None) => return Err(invalid("either --spec or --preset is required")),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let case = generate_phantom::<f64>(&spec).map_err(invalid)?;
    write_phantom(&case, &spec, out)
}

fn write_scores(reports: &[DiceReport], out: &Path) -> Result<(), PipelineError> {
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| PipelineError::from(tumorseg::error::IoError::from(e)))?;
    }
    let file = std::fs::File::create(out).map_err(|e| PipelineError::from(tumorseg::error::IoError::from(e)))?;
    write_csv(reports, std::io::BufWriter::new(file)).map_err(|e| invalid(e))?;
    let json = if out.extension().is_some_and(|e| e == "json") {
        out.with_extension("aggregate.json")
    } else {
        out.with_extension("json")
    };
    write_json(json, &aggregate(reports))?;
    Ok(())
}

fn evaluate(pred: &Path, truth: &Path, mode: EvalMode, out: &Path, case_id: &str) -> Result<(), PipelineError> {
    let p = read_labels(pred).map_err(invalid)?;
    let t = read_labels(truth).map_err(invalid)?;
    let report = evaluate_case(case_id, &p, &t, mode).map_err(invalid)?;
    write_scores(&[report], out)
}

#[derive(Debug, Deserialize)]
struct Manifest {
    cases: Vec<ManifestCase>,
}

#[derive(Debug, Deserialize)]
struct ManifestCase {
    case_id: String,
    #[serde(rename = "type")]
    tumor_type: TumorType,
    t1: PathBuf,
    t1post: PathBuf,
    t2: PathBuf,
    flair: PathBuf,
    adc: Option<PathBuf>,
    atlas_wm: PathBuf,
    atlas_gm: PathBuf,
    mask: Option<PathBuf>,
    /// Supplied whole-tumor mask; switches the case to subregion-only mode.
    wt: Option<PathBuf>,
    /// Truth labels to score against.
    truth: Option<PathBuf>,
}

impl ManifestCase {
    fn resolve(&self, base: &Path) -> (CaseInputs, Option<PathBuf>, Option<PathBuf>) {
        let r = |p: &PathBuf| base.join(p);
        let mut scans = BTreeMap::from([
            (Modality::T1, r(&self.t1)),
            (Modality::T1Post, r(&self.t1post)),
            (Modality::T2, r(&self.t2)),
            (Modality::Flair, r(&self.flair)),
        ]);
        if let Some(adc) = &self.adc {
            scans.insert(Modality::Adc, r(adc));
        }
        let inputs = CaseInputs {
            scans,
            atlas_wm: r(&self.atlas_wm),
            atlas_gm: r(&self.atlas_gm),
            mask: self.mask.as_ref().map(r),
        };
        (inputs, self.wt.as_ref().map(r), self.truth.as_ref().map(r))
    }
}

#[derive(Serialize)]
struct CaseStatus {
    case_id: String,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    stage: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn batch(manifest: &Path, config: Option<&Path>, out: &Path, jobs: Option<usize>) -> Result<(), PipelineError> {
    let text = std::fs::read_to_string(manifest).map_err(|e| invalid(format!("{}: {e}", manifest.display())))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", manifest.display())))?;
    let mut seen = std::collections::BTreeSet::new();
    if let Some(dup) = m.cases.iter().find(|c| !seen.insert(c.case_id.as_str())) {
        return Err(invalid(format!("duplicate case id {}", dup.case_id)));
    }
    let cfg = config.map(read_config).transpose()?.unwrap_or_default();
    cfg.validate()?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(out).map_err(|e| PipelineError::from(tumorseg::error::IoError::from(e)))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(invalid)?;
    let results: Vec<Result<Option<DiceReport>, PipelineError>> = pool.install(|| {
        m.cases
            .par_iter()
            .map(|c| {
                let (inputs, wt, truth) = c.resolve(base);
                let dir = out.join(&c.case_id);
                let res = segment_case(&c.case_id, c.tumor_type, &inputs, &cfg, wt.as_deref(), truth.as_deref(), &dir);
                if let Err(e) = &res {
                    eprintln!("{}: {e}", c.case_id);
                }
                res
            })
            .collect()
    });
    let statuses: Vec<CaseStatus> = m
        .cases
        .iter()
        .zip(&results)
        .map(|(c, r)| CaseStatus {
            case_id: c.case_id.clone(),
            status: if r.is_ok() { "ok" } else { "failed" },
            stage: r.as_ref().err().map(|e| e.stage().to_string()),
            error: r.as_ref().err().map(|e| e.to_string()),
        })
        .collect();
    write_json(out.join("batch.json"), &statuses)?;
    let reports: Vec<DiceReport> = results.iter().filter_map(|r| r.as_ref().ok().cloned().flatten()).collect();
    if !reports.is_empty() {
        write_scores(&reports, &out.join("scores.csv"))?;
    }
    match results.into_iter().filter_map(Result::err).max_by_key(PipelineError::exit_code) {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Segment(args) => segment(args, None),
        Command::Subregions { wt, inputs } => segment(inputs, Some(wt)),
        Command::Phantom {
            spec,
            preset,
            out,
            seed,
        } => phantom(spec.as_deref(), preset.as_deref(), out, *seed),
        Command::Evaluate {
            pred,
            truth,
            mode,
            out,
            case_id,
        } => evaluate(pred, truth, *mode, out, case_id),
        Command::Batch {
            manifest,
            config,
            out,
            jobs,
        } => batch(manifest, config.as_deref(), out, *jobs),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
