//! End-to-end segmentation: blur, edges, k-means, HMRF-EM, outputs.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use crate::edge::{canny_edges, load_edge_map, CannyParams, EdgeMap};
use crate::em::{hmrf_em_with, EmConfig, EnergyTrace};
use crate::error::{Error, Result};
use crate::image::{gaussian_blur, GrayImage};
use crate::io::{load_image, save_gray_image, save_label_image};
use crate::kmeans::kmeans_restarts;
use crate::model::{ClassParams, LabelField};
use crate::mrf::{EdgeRule, IcmConfig, Schedule};

#[derive(Clone, Debug, Default, PartialEq)]
pub enum EdgeMode {
    #[default]
    Canny,
    File(PathBuf),
    None,
}

impl FromStr for EdgeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canny" => Ok(EdgeMode::Canny),
            "none" => Ok(EdgeMode::None),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(EdgeMode::File(PathBuf::from(p))),
                _ => Err(Error::InvalidConfig(format!(
                    "edge mode must be canny, none or file:<path>, got {s:?}"
                ))),
            },
        }
    }
}

/// Which image k-means clusters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum KmeansInput {
    #[default]
    Blurred,
    Original,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentConfig {
    pub k: usize,
    pub em_iters: usize,
    pub map_iters: usize,
    pub energy_tol: f64,
    pub blur_sigma: f64,
    pub edges: EdgeMode,
    pub canny: CannyParams,
    pub schedule: Schedule,
    /// Use the one-sided edge rule instead of the symmetric one.
    pub edge_literal: bool,
    pub kmeans_input: KmeansInput,
    pub kmeans_iters: usize,
    pub kmeans_restarts: usize,
    pub seed: u64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            k: 2,
            em_iters: 10,
            map_iters: 10,
            energy_tol: 1e-6,
            blur_sigma: 3.0,
            edges: EdgeMode::Canny,
            canny: CannyParams::default(),
            schedule: Schedule::Sequential,
            edge_literal: false,
            kmeans_input: KmeansInput::Blurred,
            kmeans_iters: 100,
            kmeans_restarts: 0,
            seed: 0,
        }
    }
}

impl SegmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if self.kmeans_iters == 0 {
            return Err(Error::InvalidConfig("kmeans_iters must be at least 1".into()));
        }
        if !(self.blur_sigma.is_finite() && self.blur_sigma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "blur sigma must be positive, got {}",
                self.blur_sigma
            )));
        }
        if self.edges == EdgeMode::Canny {
            self.canny.validate()?;
        }
        self.em_config().validate()
    }

    pub fn em_config(&self) -> EmConfig {
        EmConfig {
            em_iters: self.em_iters,
            icm: IcmConfig {
                max_iters: self.map_iters,
                energy_tol: self.energy_tol,
                schedule: self.schedule,
                edge_rule: if self.edge_literal {
                    EdgeRule::OneSided
                } else {
                    EdgeRule::Symmetric
                },
            },
            record_trace: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Segmentation {
    pub blurred: GrayImage,
    pub edges: Option<EdgeMap>,
    pub init_labels: LabelField,
    pub init_params: ClassParams,
    pub labels: LabelField,
    pub params: ClassParams,
    pub trace: EnergyTrace,
    pub elapsed_ms: f64,
}

/// Runs the in-memory pipeline on `img`. `log` receives one line per EM iteration.
pub fn segment(img: &GrayImage, cfg: &SegmentConfig, log: &mut dyn Write) -> Result<Segmentation> {
    cfg.validate()?;
    let start = Instant::now();
    let blurred = gaussian_blur(img, cfg.blur_sigma)?;
    let edges = match &cfg.edges {
        EdgeMode::None => None,
        EdgeMode::Canny => Some(canny_edges(img, cfg.canny.sigma, cfg.canny.low, cfg.canny.high)?),
        EdgeMode::File(p) => Some(load_edge_map(p, img.width(), img.height())?),
    };
    let km_source = match cfg.kmeans_input {
        KmeansInput::Blurred => &blurred,
        KmeansInput::Original => img,
    };
    let km = kmeans_restarts(km_source, cfg.k, cfg.kmeans_iters, cfg.seed, cfg.kmeans_restarts)?;

    let mut log_err = None;
    let out = hmrf_em_with(
        &blurred,
        &km.labels,
        &km.params,
        edges.as_ref(),
        &cfg.em_config(),
        |e, p| {
            if log_err.is_none() {
                if let Err(err) = writeln!(
                    log,
                    "iter {:>3}  total {:.10e}  likelihood {:.10e}  prior {:.10e}  mu {:?}  sigma {:?}",
                    e.iter,
                    e.total,
                    e.likelihood,
                    e.prior,
                    p.mus(),
                    p.sigmas()
                ) {
                    log_err = Some(err);
                }
            }
        },
    )?;
    if let Some(err) = log_err {
        return Err(Error::io("<log>", err));
    }
    Ok(Segmentation {
        blurred,
        edges,
        init_labels: km.labels,
        init_params: km.params,
        labels: out.labels,
        params: out.params,
        trace: out.trace,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub out_dir: PathBuf,
    pub segment: SegmentConfig,
}

pub const LABELS_INIT_FILE: &str = "labels_init.pgm";
pub const LABELS_FINAL_FILE: &str = "labels_final.pgm";
pub const BLURRED_FILE: &str = "blurred.pgm";
pub const EDGES_FILE: &str = "edges.pgm";
pub const ENERGY_FILE: &str = "energy.csv";

/// Loads the input, segments it and writes every output file into `out_dir`.
pub fn run_pipeline(cfg: &PipelineConfig, log: &mut dyn Write) -> Result<Segmentation> {
    let total = Instant::now();
    let img = load_image(&cfg.input)?;
    let seg = segment(&img, &cfg.segment, log)?;
    write_outputs(&seg, &cfg.out_dir)?;
    writeln!(
        log,
        "segmentation of {}x{} image: {:.1} ms (total with i/o {:.1} ms)",
        img.width(),
        img.height(),
        seg.elapsed_ms,
        total.elapsed().as_secs_f64() * 1e3
    )
    .map_err(|e| Error::io("<log>", e))?;
    Ok(seg)
}

pub fn write_outputs(seg: &Segmentation, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    save_label_image(&seg.init_labels, out_dir.join(LABELS_INIT_FILE))?;
    save_label_image(&seg.labels, out_dir.join(LABELS_FINAL_FILE))?;
    save_gray_image(&seg.blurred, out_dir.join(BLURRED_FILE))?;
    if let Some(e) = &seg.edges {
        e.save(out_dir.join(EDGES_FILE))?;
    }
    seg.trace.write_csv(out_dir.join(ENERGY_FILE))
}
