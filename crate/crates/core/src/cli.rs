//! Command-line front end: `sample`, `design` and `bench-rejection`.
//!
//! Exit codes: 0 success, 1 output failure, 2 configuration error,
//! 3 sampler or design failure.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{CriterionName, Format, RunConfig};
use crate::design::{
    cmm_design, fff_design, greedy_design, mindist, CandidateSet, Criterion, DistanceMetric,
    FffSummary, TraceEntry,
};
use crate::error::Error;
use crate::geodesic::NeighborGraph;
use crate::output::{
    write_design_csv, write_json, write_samples_csv, DesignReport, DesignRow, RejectionReport,
};
use crate::region::Region;
use crate::scmc::run_scmc;
use crate::svg::{Marker, Plot};

/// Points drawn by the pre-run nonemptiness probe.
const PROBE_POINTS: usize = 100_000;
const PROBE_EQ_TOL: f64 = 0.05;

#[derive(Debug, Parser)]
#[command(
    name = "scmc-design",
    version,
    about = "Uniform sampling on constrained regions and space-filling designs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the region; writes samples.csv, schedule.json, sample.svg.
    Sample(RunArgs),
    /// Build a design on a sample; writes design.csv, design.json, design.svg.
    Design {
        #[command(flatten)]
        run: RunArgs,
        /// Reuse an existing samples.csv instead of sampling.
        #[arg(long, value_name = "CSV")]
        samples: Option<PathBuf>,
    },
    /// Compare naive rejection sampling with the sampler; writes comparison.json.
    BenchRejection(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Run configuration (TOML).
    pub config: PathBuf,
    /// Override the sampler and design seeds.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the number of particles.
    #[arg(long)]
    pub n: Option<usize>,
    /// Override the output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct CliError {
    pub code: i32,
    #[source]
    pub error: Error,
}

impl CliError {
    fn config(error: Error) -> Self {
        CliError { code: 2, error }
    }

    fn failure(error: Error) -> Self {
        CliError { code: 3, error }
    }

    fn output(error: Error) -> Self {
        CliError { code: 1, error }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Sample(args) => {
            let job = Job::load(&args)?;
            job.sample()?;
        }
        Command::Design { run, samples } => {
            let job = Job::load(&run)?;
            if job.cfg.design.is_none() {
                return Err(CliError::config(Error::Config(format!(
                    "{}: the design command needs a [design] block",
                    run.config.display()
                ))));
            }
            let points = match samples {
                Some(path) => {
                    let pts = crate::output::read_samples_csv(&path).map_err(CliError::config)?;
                    if pts.ncols() != job.region.dim() {
                        return Err(CliError::config(Error::DimensionMismatch {
                            expected: job.region.dim(),
                            got: pts.ncols(),
                        }));
                    }
                    pts
                }
                None => job.sample()?,
            };
            job.design(&points)?;
        }
        Command::BenchRejection(args) => {
            let job = Job::load(&args)?;
            job.bench_rejection()?;
        }
    }
    Ok(())
}

struct Job {
    cfg: RunConfig,
    region: Region,
    out: PathBuf,
}

impl Job {
    fn load(args: &RunArgs) -> Result<Self, CliError> {
        let mut cfg = RunConfig::load(&args.config).map_err(CliError::config)?;
        if let Some(seed) = args.seed {
            cfg.scmc.seed = seed;
            if let Some(d) = cfg.design.as_mut() {
                d.seed = Some(seed);
            }
        }
        if let Some(n) = args.n {
            cfg.scmc.n_particles = n;
        }
        cfg.validate().map_err(CliError::config)?;
        let region = cfg.build_region().map_err(CliError::config)?;
        let out = match &args.out {
            Some(dir) => dir.clone(),
            None => cfg.resolve(&cfg.output.directory),
        };
        std::fs::create_dir_all(&out).map_err(|e| CliError::output(Error::io(&out, e)))?;
        Ok(Job { cfg, region, out })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn probe(&self) {
        match self
            .region
            .probe_nonempty(PROBE_POINTS, PROBE_EQ_TOL, self.cfg.scmc.seed)
        {
            Ok(true) => {}
            Ok(false) => log::warn!(
                "none of {PROBE_POINTS} box-uniform points is feasible (equality tolerance {PROBE_EQ_TOL}); the region may be empty or very thin"
            ),
            Err(e) => log::warn!("nonemptiness probe failed: {e}"),
        }
    }

    fn sample(&self) -> Result<Array2<f64>, CliError> {
        self.probe();
        let started = Instant::now();
        let (cloud, schedule) =
            run_scmc(&self.region, &self.cfg.scmc).map_err(CliError::failure)?;
        log::info!(
            "sampled {} particles in {} steps (final tau {:.3e}) in {:.2?}",
            cloud.len(),
            schedule.len(),
            schedule.final_tau(),
            started.elapsed()
        );
        let points = cloud.into_points();
        let eq_tol = self.cfg.scmc.eq_tol;
        if self.cfg.output.wants(Format::Csv) {
            write_samples_csv(&self.path("samples.csv"), &points, &self.region, eq_tol)
                .map_err(CliError::output)?;
        }
        if self.cfg.output.wants(Format::Json) {
            write_json(&self.path("schedule.json"), &schedule).map_err(CliError::output)?;
        }
        if self.cfg.output.plot {
            let outline = self.cfg.polygon_set().map_err(CliError::output)?;
            Plot {
                bbox: self.region.bbox(),
                cloud: points.as_slice().expect("standard layout"),
                markers: &[],
                outline: outline.as_deref(),
                title: &format!("{} particles, {} steps", points.nrows(), schedule.len()),
            }
            .write(&self.path("sample.svg"))
            .map_err(CliError::output)?;
        }
        Ok(points)
    }

    fn design(&self, samples: &Array2<f64>) -> Result<(), CliError> {
        let spec = self.cfg.design.as_ref().expect("checked by caller");
        let seed = spec.seed.unwrap_or(self.cfg.scmc.seed);
        let p = spec.size;
        let n_samples = samples.nrows();
        let started = Instant::now();

        let first_for = |cands: &CandidateSet| -> Result<Option<usize>, CliError> {
            match spec.first {
                None => Ok(None),
                Some(row) => cands.candidate_for_row(row).map(Some).ok_or_else(|| {
                    CliError::config(Error::Config(format!(
                        "design: first = {row} is not a sample row (or duplicates an earlier row)"
                    )))
                }),
            }
        };

        let mut metric = "euclidean".to_string();
        let mut trace: Option<Vec<TraceEntry>> = None;
        let mut penalty_hits = 0;
        let mut subsampled = false;
        let (rows, n_candidates, design_mindist) = match spec.criterion {
            CriterionName::Cmm | CriterionName::Ard | CriterionName::Maxpro => {
                let mut cands = CandidateSet::new(samples.clone()).map_err(CliError::failure)?;
                if let Some(w) = &spec.weights {
                    cands = cands
                        .with_metric(DistanceMetric::WeightedEuclidean(w.clone()))
                        .map_err(CliError::config)?;
                    metric = "weighted_euclidean".into();
                }
                let criterion = match spec.criterion {
                    CriterionName::Cmm => Criterion::Cmm,
                    CriterionName::Ard => Criterion::Ard { k: spec.ard_order },
                    _ => Criterion::MaxPro,
                };
                let d = greedy_design(&cands, p, criterion, seed, first_for(&cands)?)
                    .map_err(CliError::failure)?;
                penalty_hits = d.penalty_hits;
                trace = Some(relabel_trace(&d.trace, |i| cands.source_row(i)));
                let md = (p >= 2).then(|| cands.mindist(&d.indices)).transpose();
                (member_rows(&cands, &d.indices, |i| i), cands.len(), md)
            }
            CriterionName::Geodesic => {
                metric = "geodesic".into();
                let cands = CandidateSet::new(samples.clone()).map_err(CliError::failure)?;
                let graph = NeighborGraph::build(cands.points(), spec.geodesic.k)
                    .map_err(CliError::failure)?;
                if spec.geodesic.export_graph {
                    let labels: Vec<usize> =
                        (0..cands.len()).map(|i| cands.source_row(i)).collect();
                    graph
                        .write_edge_csv(&self.path("graph_edges.csv"), Some(&labels))
                        .map_err(CliError::output)?;
                }
                let cands = cands
                    .with_metric(DistanceMetric::Geodesic(Arc::new(graph)))
                    .map_err(CliError::failure)?;
                let d =
                    cmm_design(&cands, p, seed, first_for(&cands)?).map_err(CliError::failure)?;
                trace = Some(relabel_trace(&d.trace, |i| cands.source_row(i)));
                let md = (p >= 2).then(|| cands.mindist(&d.indices)).transpose();
                (member_rows(&cands, &d.indices, |i| i), cands.len(), md)
            }
            CriterionName::Fff => {
                if spec.first.is_some() {
                    log::warn!("design.first is ignored by the fff criterion");
                }
                let max = spec.fff.max_candidates;
                let picked: Vec<usize> = if n_samples > max {
                    subsampled = true;
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let mut v = rand::seq::index::sample(&mut rng, n_samples, max).into_vec();
                    v.sort_unstable();
                    log::info!("fff: clustering a subsample of {max} of {n_samples} points");
                    v
                } else {
                    (0..n_samples).collect()
                };
                let sub = samples.select(Axis(0), &picked);
                let cands = CandidateSet::new(sub).map_err(CliError::failure)?;
                let f = fff_design(&cands, p, spec.fff.summary).map_err(CliError::failure)?;
                let rows: Vec<DesignRow> = match &f.indices {
                    Some(idx) => member_rows(&cands, idx, |r| picked[r]),
                    None => f
                        .points
                        .rows()
                        .into_iter()
                        .map(|r| DesignRow {
                            sample_row: None,
                            point: r.to_vec(),
                        })
                        .collect(),
                };
                let md = (p >= 2)
                    .then(|| mindist(&f.points, &vec![1.0; f.points.ncols()]))
                    .transpose();
                (rows, cands.len(), md)
            }
        };
        let design_mindist = design_mindist.map_err(CliError::failure)?;

        let eq_tol = self.cfg.scmc.eq_tol;
        let mut infeasible = Vec::new();
        let mut markers = Vec::with_capacity(rows.len());
        for (order, row) in rows.iter().enumerate() {
            let ok = self
                .region
                .is_feasible(&row.point, eq_tol)
                .map_err(CliError::failure)?;
            if !ok {
                infeasible.push(order + 1);
            }
            markers.push(Marker {
                point: row.point.clone(),
                feasible: ok,
            });
        }
        let criterion = match (spec.criterion, spec.fff.summary) {
            (CriterionName::Fff, FffSummary::Centroid) => "fff_centroid".to_string(),
            (CriterionName::Fff, FffSummary::MedoidMaxpro) => "fff_medoid_maxpro".to_string(),
            (CriterionName::Ard, _) => format!("ard(k={})", spec.ard_order),
            (c, _) => c.as_str().to_string(),
        };
        log::info!(
            "{criterion} design of {p} points from {n_candidates} candidates in {:.2?}; {} infeasible",
            started.elapsed(),
            infeasible.len()
        );
        if !infeasible.is_empty() {
            log::warn!(
                "{} design points lie outside the region: {:?}",
                infeasible.len(),
                infeasible
            );
        }

        if self.cfg.output.wants(Format::Csv) {
            write_design_csv(&self.path("design.csv"), &rows, &self.region, eq_tol)
                .map_err(CliError::output)?;
        }
        if self.cfg.output.wants(Format::Json) {
            let report = DesignReport {
                criterion,
                size: p,
                seed,
                metric,
                weights: spec.weights.clone(),
                sample_rows: rows.iter().map(|r| r.sample_row).collect(),
                trace,
                mindist: design_mindist,
                penalty_hits,
                infeasible_count: infeasible.len(),
                infeasible,
                n_samples,
                n_candidates,
                subsampled,
            };
            write_json(&self.path("design.json"), &report).map_err(CliError::output)?;
        }
        if self.cfg.output.plot {
            let outline = self.cfg.polygon_set().map_err(CliError::output)?;
            Plot {
                bbox: self.region.bbox(),
                cloud: samples.as_slice().expect("standard layout"),
                markers: &markers,
                outline: outline.as_deref(),
                title: &format!("{} design, {} points", spec.criterion.as_str(), p),
            }
            .write(&self.path("design.svg"))
            .map_err(CliError::output)?;
        }
        Ok(())
    }

    fn bench_rejection(&self) -> Result<(), CliError> {
        let n = self.cfg.scmc.n_particles;
        let eq_tol = self.cfg.scmc.eq_tol;
        let bbox = self.region.bbox();
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.scmc.seed);
        rng.set_stream(0xbe7c);
        let mut x = vec![0.0; self.region.dim()];
        let mut accepted = 0usize;
        for _ in 0..n {
            bbox.sample(&mut rng, &mut x);
            if self
                .region
                .is_feasible(&x, eq_tol)
                .map_err(CliError::failure)?
            {
                accepted += 1;
            }
        }
        let acceptance = accepted as f64 / n as f64;
        let std_error = (acceptance * (1.0 - acceptance) / n as f64).sqrt();
        log::info!("rejection sampling kept {accepted} of {n} draws ({acceptance:.4})");

        let (cloud, _) = run_scmc(&self.region, &self.cfg.scmc).map_err(CliError::failure)?;
        let mut feasible = 0usize;
        for i in 0..cloud.len() {
            if self
                .region
                .is_feasible(cloud.point(i), eq_tol)
                .map_err(CliError::failure)?
            {
                feasible += 1;
            }
        }
        let report = RejectionReport {
            n_draws: n,
            rejection_accepted: accepted,
            rejection_acceptance: acceptance,
            rejection_std_error: std_error,
            scmc_particles: cloud.len(),
            scmc_feasible: feasible,
            scmc_retained_fraction: cloud.len() as f64 / n as f64,
            scmc_feasible_fraction: feasible as f64 / cloud.len() as f64,
            eq_tol,
        };
        write_json(&self.path("comparison.json"), &report).map_err(CliError::output)
    }
}

fn relabel_trace(trace: &[TraceEntry], row: impl Fn(usize) -> usize) -> Vec<TraceEntry> {
    trace
        .iter()
        .map(|t| TraceEntry {
            selected_index: row(t.selected_index),
            ..t.clone()
        })
        .collect()
}

/// Design rows for candidate indices; `outer` maps a candidate's source row
/// to a row of the samples file.
fn member_rows(
    cands: &CandidateSet,
    idx: &[usize],
    outer: impl Fn(usize) -> usize,
) -> Vec<DesignRow> {
    idx.iter()
        .map(|&i| DesignRow {
            sample_row: Some(outer(cands.source_row(i))),
            point: cands.point(i).to_vec(),
        })
        .collect()
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e.error);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            e.code
        }
    }
}
