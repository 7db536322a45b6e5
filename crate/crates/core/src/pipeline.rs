//! End-to-end runs: the four-step method on one stack, and the simulation
//! study comparing it with the point-cloud baseline.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MvError, Result};
use crate::filtration::filter_stack;
use crate::maxtest::{run_max_test, MaxTestConfig, MaxTestResult};
use crate::partition::{build_slice_complexes, threshold_slices, write_masks, SetOp};
use crate::pcvr::{run_pcvr, PcvrConfig, TrackTable};
use crate::persistence::{compute_persistence, PersistenceDiagram};
use crate::plot::{diagram_svg, null_svg, Marker, Svg};
use crate::simgen::{generate, NoiseSpec, PatternId, PatternSpec, TruthTable};
use crate::smoothing::SmootherConfig;
use crate::stack::{load_stack, replicate_rng, ImageStack};
use crate::zigzag::{render_zigzag, zigzag_persistence, ZigzagDiagram};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub test: MaxTestConfig,
    #[serde(default)]
    pub set_op: SetOp,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub emit_plots: bool,
}

/// In-memory result of the four steps.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub smoothed: ImageStack,
    /// Full diagram of the smoothed stack, when requested.
    pub diagram: Option<PersistenceDiagram>,
    pub test: MaxTestResult,
    /// Per-frame vertex sets at the estimated threshold (rejection only).
    pub slices: Option<Vec<Vec<u32>>>,
    pub zigzag: Option<ZigzagDiagram>,
}

/// Wall-clock time per stage, reported separately from the deterministic
/// outputs.
#[derive(Debug, Default, Clone)]
pub struct Timings(pub Vec<(&'static str, f64)>);

impl Timings {
    fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f().map_err(|e| e.in_stage(stage));
        self.0.push((stage, t.elapsed().as_secs_f64()));
        out
    }

    pub fn render(&self) -> String {
        self.0
            .iter()
            .map(|(s, t)| format!("{s}\t{:.3} ms\n", t * 1e3))
            .collect()
    }
}

/// Smooth, test, threshold at the significant feature's birth, and run
/// zigzag on the slices. `full_diagram` also computes the complete diagram
/// of the smoothed stack.
pub fn analyze(
    raw: &ImageStack,
    test: &MaxTestConfig,
    set_op: SetOp,
    full_diagram: bool,
    timings: &mut Timings,
) -> Result<Analysis> {
    test.validate(raw.ndim())
        .map_err(|e| e.in_stage("config"))?;
    let smoothed = timings.time("smooth", || match &test.smoother {
        Some(cfg) => crate::smoothing::smooth_stack(raw, cfg),
        None => Ok(raw.clone()),
    })?;
    let diagram = if full_diagram {
        Some(timings.time("persistence", || {
            let fc = filter_stack(&smoothed, raw.ndim())?;
            Ok(compute_persistence(&fc, raw.ndim() - 1))
        })?)
    } else {
        None
    };
    let result = timings.time("maxtest", || run_max_test(raw, test))?;
    let (mut slices, mut zigzag) = (None, None);
    if let (true, Some(theta), 3) = (result.reject, result.theta_hat, raw.ndim()) {
        let sets = threshold_slices(&smoothed, theta);
        let seq = timings.time("partition", || {
            build_slice_complexes(&sets, raw.rows(), raw.cols(), set_op, theta)
        })?;
        let zz = timings.time("zigzag", || zigzag_persistence(&seq, 1))?;
        zigzag = Some(zz.with_spacing(raw.time_spacing()));
        slices = Some(sets);
    }
    Ok(Analysis {
        smoothed,
        diagram,
        test: result,
        slices,
        zigzag,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZigzagSummary {
    pub h0_intervals: usize,
    pub h1_intervals: usize,
    pub sequence_length: usize,
}

/// Machine-readable summary of a run. Timings are kept out of it so that
/// reports are reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub input: String,
    pub dims: Vec<usize>,
    pub time_spacing: f64,
    pub smoother: Option<SmootherConfig>,
    pub dim: usize,
    pub permutations: usize,
    pub alpha: f64,
    pub seed: u64,
    pub pvalue_add_one: bool,
    pub set_op: SetOp,
    pub rho_obs: f64,
    pub birth_obs: Option<f64>,
    pub death_obs: Option<f64>,
    pub p_value: f64,
    pub reject: bool,
    pub theta_hat: Option<f64>,
    pub diagram_counts: Vec<usize>,
    pub zigzag: Option<ZigzagSummary>,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
}

fn write(dir: &Path, name: &str, body: &str, outputs: &mut Vec<String>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| MvError::io(&path, e).in_stage("export"))?;
    outputs.push(name.to_string());
    Ok(())
}

/// Runs the method on `cfg.input` and writes every artifact into
/// `cfg.out_dir`. Artifacts are written as soon as their stage finishes.
pub fn run_mv(cfg: &PipelineConfig) -> Result<RunReport> {
    let mut timings = Timings::default();
    let raw = timings.time("load", || load_stack(&cfg.input))?;
    run_mv_on(&raw, &cfg.input.display().to_string(), cfg, &mut timings)
}

pub fn run_mv_on(
    raw: &ImageStack,
    input_label: &str,
    cfg: &PipelineConfig,
    timings: &mut Timings,
) -> Result<RunReport> {
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).map_err(|e| MvError::io(dir, e).in_stage("export"))?;
    let a = analyze(raw, &cfg.test, cfg.set_op, true, timings)?;
    let mut outputs = Vec::new();
    let pd = a.diagram.as_ref().expect("full diagram requested");
    write(dir, "diagram.json", &(pd.to_json() + "\n"), &mut outputs)?;
    write(dir, "diagram.csv", &pd.to_csv(), &mut outputs)?;
    let test_json = serde_json::to_string_pretty(&a.test).expect("result serializes");
    write(dir, "maxtest.json", &(test_json + "\n"), &mut outputs)?;
    if cfg.emit_plots {
        write(
            dir,
            "diagram.svg",
            &diagram_svg(pd, "Persistence diagram"),
            &mut outputs,
        )?;
        write(dir, "maxtest.svg", &null_svg(&a.test), &mut outputs)?;
    }
    if let Some(sets) = &a.slices {
        write_masks(&dir.join("masks"), sets, raw.rows(), raw.cols())
            .map_err(|e| e.in_stage("export"))?;
        outputs.push("masks/".to_string());
    }
    let empty = ZigzagDiagram {
        intervals: Vec::new(),
        sequence_length: 0,
    };
    let zz = a.zigzag.as_ref().unwrap_or(&empty);
    let (csv, svg) = render_zigzag(zz, raw.time_spacing());
    write(dir, "zigzag.csv", &csv, &mut outputs)?;
    if cfg.emit_plots {
        write(dir, "zigzag.svg", &svg, &mut outputs)?;
    }
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        input: input_label.to_string(),
        dims: raw.dims().to_vec(),
        time_spacing: raw.time_spacing(),
        smoother: cfg.test.smoother,
        dim: cfg.test.dim,
        permutations: cfg.test.permutations,
        alpha: cfg.test.alpha,
        seed: cfg.test.seed,
        pvalue_add_one: cfg.test.pvalue_add_one,
        set_op: cfg.set_op,
        rho_obs: a.test.rho_obs,
        birth_obs: a.test.birth_obs,
        death_obs: a.test.death_obs,
        p_value: a.test.p_value,
        reject: a.test.reject,
        theta_hat: a.test.theta_hat,
        diagram_counts: pd.betti.clone(),
        zigzag: a.zigzag.as_ref().map(|z| ZigzagSummary {
            h0_intervals: z.in_dim(0).count(),
            h1_intervals: z.in_dim(1).count(),
            sequence_length: z.sequence_length,
        }),
        outputs: {
            let mut o = outputs.clone();
            o.push("report.json".into());
            o
        },
        warnings: a.test.warnings.clone(),
    };
    let body = serde_json::to_string_pretty(&report).expect("report serializes");
    write(dir, "report.json", &(body + "\n"), &mut outputs)?;
    let log = dir.join("timings.log");
    fs::write(&log, timings.render()).map_err(|e| MvError::io(&log, e).in_stage("export"))?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Simulation study

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub patterns: Vec<PatternId>,
    pub replicates: usize,
    pub seed: u64,
    /// Overrides each pattern's noise level.
    #[serde(default)]
    pub sigma0: Option<f64>,
    pub permutations: usize,
    pub alpha: f64,
    pub smoother: SmootherConfig,
    #[serde(default)]
    pub set_op: SetOp,
    pub pcvr: PcvrConfig,
    /// Slack in pixels around a loop's outer radius when locating a
    /// detected loop.
    pub match_margin: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        serde_json::from_str(include_str!("../patterns/study.json")).expect("shipped study config")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mv,
    Pcvr,
}

/// Detection tallies for one method on one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub pattern: PatternId,
    pub replicate: usize,
    pub method: Method,
    pub instances: usize,
    pub detected: usize,
    pub links: usize,
    pub linked: usize,
    /// `(loop, frame)` instances that were detected.
    pub hits: Vec<(u32, usize)>,
    /// `(loop, from_frame)` links that were recovered.
    pub link_hits: Vec<(u32, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub detection_rate: Option<f64>,
    pub continuity_rate: Option<f64>,
    /// Detected instances plus recovered links over their totals.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub schema_version: u32,
    pub config: StudyConfig,
    pub records: Vec<StudyRecord>,
    pub summary: Vec<MethodSummary>,
}

/// A method's tracked loop: the frames it claims and where it sits in each.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub hits: Vec<(usize, [f64; 2])>,
}

/// Zigzag `H1` intervals as tracks over the frames they cover, located by
/// the interval's representative cycle in each frame.
pub fn mv_tracks(zz: &ZigzagDiagram) -> Vec<Track> {
    zz.in_dim(1)
        .map(|iv| Track {
            hits: iv
                .representatives
                .iter()
                .filter(|(p, _)| iv.contains(*p))
                .map(|&(p, loc)| (p.div_ceil(2), loc))
                .collect(),
        })
        .filter(|t| !t.hits.is_empty())
        .collect()
}

pub fn pcvr_tracks(table: &TrackTable) -> Vec<Track> {
    table
        .track_ids()
        .into_iter()
        .map(|id| Track {
            hits: table
                .points
                .iter()
                .filter(|p| p.track == id)
                .map(|p| (p.frame, p.location))
                .collect(),
        })
        .collect()
}

/// Detected `(loop, frame)` instances and recovered `(loop, from_frame)`
/// links.
pub type Matches = (Vec<(u32, usize)>, Vec<(u32, usize)>);

/// Scores tracks against the truth. Each track is assigned to at most one
/// loop and vice versa, greedily by the number of instances it detects; a
/// track detects `(loop, frame)` if it claims the frame at a location within
/// `margin` of one of the loop's sites in that frame. A link counts when the
/// assigned track detects both ends.
pub fn score(truth: &TruthTable, tracks: &[Track], margin: f64) -> Matches {
    let loops = truth.loop_ids();
    let near = |l: u32, o: usize, x: [f64; 2]| {
        truth
            .get(l, o)
            .is_some_and(|e| e.sites.iter().any(|s| s.contains(x, margin)))
    };
    let detects = |t: &Track, l: u32| -> Vec<usize> {
        let mut f: Vec<usize> = t
            .hits
            .iter()
            .filter(|(o, x)| near(l, *o, *x))
            .map(|(o, _)| *o)
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    };
    let mut cand: Vec<(usize, usize, u32, Vec<usize>)> = Vec::new();
    for (ti, t) in tracks.iter().enumerate() {
        for &l in &loops {
            let f = detects(t, l);
            if !f.is_empty() {
                cand.push((f.len(), ti, l, f));
            }
        }
    }
    cand.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let (mut used_t, mut used_l) = (Vec::new(), Vec::new());
    let (mut hits, mut links) = (Vec::new(), Vec::new());
    for (_, ti, l, frames) in cand {
        if used_t.contains(&ti) || used_l.contains(&l) {
            continue;
        }
        used_t.push(ti);
        used_l.push(l);
        for &o in &frames {
            hits.push((l, o));
        }
        for link in truth.links.iter().filter(|k| k.loop_id == l) {
            if frames.contains(&link.from) && frames.contains(&link.to) {
                links.push((l, link.from));
            }
        }
    }
    hits.sort_unstable();
    links.sort_unstable();
    (hits, links)
}

fn record(
    pattern: PatternId,
    replicate: usize,
    method: Method,
    truth: &TruthTable,
    (hits, link_hits): Matches,
) -> StudyRecord {
    StudyRecord {
        pattern,
        replicate,
        method,
        instances: truth.present().count(),
        detected: hits.len(),
        links: truth.links.len(),
        linked: link_hits.len(),
        hits,
        link_hits,
    }
}

/// Seeds `(noise, permutations)` for one replicate.
pub fn replicate_seeds(seed: u64, pattern: PatternId, replicate: usize) -> (u64, u64) {
    let stream = ((pattern as u64) << 32) | replicate as u64;
    let mut rng = replicate_rng(seed, stream);
    (rng.next_u64(), rng.next_u64())
}

/// Runs both methods on one noisy realization of `spec`.
pub fn study_replicate(
    spec: &PatternSpec,
    replicate: usize,
    cfg: &StudyConfig,
) -> Result<[StudyRecord; 2]> {
    let (noise_seed, test_seed) = replicate_seeds(cfg.seed, spec.id, replicate);
    let noise = NoiseSpec {
        sigma0: cfg.sigma0.unwrap_or(spec.noise.sigma0),
        seed: noise_seed,
        ..spec.noise.clone()
    };
    let (raw, _, truth) = generate(spec, &noise).map_err(|e| e.in_stage("simulate"))?;
    let test = MaxTestConfig {
        permutations: cfg.permutations,
        dim: 2,
        alpha: cfg.alpha,
        seed: test_seed,
        smoother: Some(cfg.smoother),
        pvalue_add_one: false,
    };
    let a = analyze(&raw, &test, cfg.set_op, false, &mut Timings::default())?;
    let mv = match &a.zigzag {
        Some(zz) => mv_tracks(zz),
        None => Vec::new(),
    };
    let (_, table) = run_pcvr(&raw, &cfg.pcvr).map_err(|e| e.in_stage("pcvr"))?;
    Ok([
        record(
            spec.id,
            replicate,
            Method::Mv,
            &truth,
            score(&truth, &mv, cfg.match_margin),
        ),
        record(
            spec.id,
            replicate,
            Method::Pcvr,
            &truth,
            score(&truth, &pcvr_tracks(&table), cfg.match_margin),
        ),
    ])
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    let specs = cfg
        .patterns
        .iter()
        .map(|&id| PatternSpec::canonical(id))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..specs.len())
        .flat_map(|p| (1..=cfg.replicates).map(move |r| (p, r)))
        .collect();
    let records: Vec<StudyRecord> = jobs
        .into_par_iter()
        .map(|(p, r)| study_replicate(&specs[p], r, cfg))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let summary = [Method::Mv, Method::Pcvr]
        .into_iter()
        .map(|m| {
            let rs = records.iter().filter(|r| r.method == m);
            let (i, d, l, k) = rs.fold((0, 0, 0, 0), |(i, d, l, k), r| {
                (i + r.instances, d + r.detected, l + r.links, k + r.linked)
            });
            MethodSummary {
                method: m,
                detection_rate: ratio(d, i),
                continuity_rate: ratio(k, l),
                rate: ratio(d + k, i + l),
            }
        })
        .collect();
    Ok(StudyResult {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        records,
        summary,
    })
}

impl StudyResult {
    pub fn summary_for(&self, m: Method) -> &MethodSummary {
        self.summary
            .iter()
            .find(|s| s.method == m)
            .expect("both methods summarized")
    }

    /// One row per pattern, method and replicate.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("pattern,replicate,method,instances,detected,links,linked\n");
        for r in &self.records {
            let m = match r.method {
                Method::Mv => "mv",
                Method::Pcvr => "pcvr",
            };
            let _ = writeln!(
                s,
                "{},{},{m},{},{},{},{}",
                r.pattern, r.replicate, r.instances, r.detected, r.links, r.linked
            );
        }
        s
    }

    /// Truth (circles), and the loops and links each method recovered in at
    /// least half of the replicates (triangles for MV, diamonds for PCVR).
    pub fn to_svg(&self) -> Result<String> {
        let mut rows: Vec<(PatternId, u32, TruthTable)> = Vec::new();
        for &p in &self.config.patterns {
            let t = PatternSpec::canonical(p)?.truth_table();
            for l in t.loop_ids() {
                rows.push((p, l, t.clone()));
            }
        }
        let frames = rows.iter().map(|r| r.2.frames).max().unwrap_or(5);
        let n = rows.len().max(1) as f64;
        let mut svg = Svg::new(
            560.0,
            80.0 + 36.0 * n,
            (0.6, frames as f64 + 0.4),
            (0.4, n + 0.6),
        );
        svg.title("Loop detection by frame");
        svg.axes("time point", "loop");
        let reps = self.config.replicates.max(1) as f64;
        let styles = [
            (None, Marker::Circle, "#c0262d", 0.0),
            (Some(Method::Mv), Marker::Triangle, "#1f4e9c", 0.22),
            (Some(Method::Pcvr), Marker::Diamond, "#7b3294", -0.22),
        ];
        for (k, (p, l, truth)) in rows.iter().enumerate() {
            let y = n - k as f64;
            svg.text(0.65, y + 0.25, "start", &format!("{p} loop {l}"));
            for &(method, marker, color, dy) in &styles {
                let shown = |o: usize| match method {
                    None => truth.get(*l, o).is_some(),
                    Some(m) => {
                        let c = self
                            .records
                            .iter()
                            .filter(|r| {
                                r.method == m && r.pattern == *p && r.hits.contains(&(*l, o))
                            })
                            .count();
                        c as f64 / reps >= 0.5
                    }
                };
                let linked = |o: usize| match method {
                    None => truth.links.iter().any(|k| k.loop_id == *l && k.from == o),
                    Some(m) => {
                        let c = self
                            .records
                            .iter()
                            .filter(|r| {
                                r.method == m && r.pattern == *p && r.link_hits.contains(&(*l, o))
                            })
                            .count();
                        c as f64 / reps >= 0.5
                    }
                };
                for o in 1..=truth.frames {
                    if o < truth.frames && linked(o) {
                        svg.line((o as f64, y + dy), (o as f64 + 1.0, y + dy), color);
                    }
                    if shown(o) {
                        svg.point(o as f64, y + dy, marker, color);
                    }
                }
            }
        }
        svg.legend(&[
            ("truth", Marker::Circle, "#c0262d"),
            ("MV", Marker::Triangle, "#1f4e9c"),
            ("PCVR", Marker::Diamond, "#7b3294"),
        ]);
        Ok(svg.finish())
    }
}
