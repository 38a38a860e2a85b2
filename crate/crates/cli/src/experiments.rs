//! Experiment pipelines: the simulation study, Monte Carlo cross-validation
//! and gridded prediction maps.
//!
//! Every `(replicate, α)` cell runs the same chain: transform the training
//! compositions, fit a nugget + Whittle–Matérn LMC, cokrige the test
//! locations, back-transform and score against the true compositions.

use alphait::geostat::{
    default_scale_grid, empirical_cross_variogram, fit_nugget_matern, fit_proportional_matern,
    CokrigingSystem, LagBins, LmcFit,
};
use alphait::metrics::{alpha_it_or_aitchison_distance, pooled_std, score_predictions};
use alphait::mle::estimate_alpha;
use alphait::sim::{apply_scenario, to_compositions, uniform_locations, GrfSampler, ScenarioConfig};
use alphait::transforms::{alpha_it_or_ilr, alpha_it_or_ilr_inverse};
use alphait::{Composition, CompositionalField, Location};
use anyhow::{anyhow, bail, Context, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{AlphaSpec, ExperimentConfig, ModelKind};
use crate::io::{fmt_f64, fmt_opt};

/// Back-transformed predictions with a larger inverse residual are flagged.
pub const RESIDUAL_FLAG: f64 = 1e-6;

/// α used in place of 0 on data with zero parts when substitution is enabled.
pub const ZERO_ALPHA_SUBSTITUTE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub nu: f64,
    pub scale_grid: usize,
    pub model: ModelKind,
}

impl FitOptions {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self {
            nu: cfg.nu,
            scale_grid: cfg.scale_grid,
            model: cfg.model_kind(),
        }
    }
}

/// Transform, fit and return the cokriging system on `(locations, compositions)`.
pub fn fit_system(
    locations: &[Location],
    compositions: &[Composition],
    alpha: f64,
    opts: &FitOptions,
) -> Result<(CokrigingSystem, LmcFit)> {
    let zs = transform_all(compositions, alpha)?;
    let bins = LagBins::default_for(locations)?;
    let ev = empirical_cross_variogram(locations, &zs, &bins)?;
    let scales = default_scale_grid(&ev, opts.scale_grid);
    let fit = match opts.model {
        ModelKind::Proportional => fit_proportional_matern(&ev, opts.nu, &scales)?,
        ModelKind::NuggetMatern => fit_nugget_matern(&ev, opts.nu, &scales)?,
    };
    let sys = CokrigingSystem::new(&fit.model, locations, &zs)?;
    Ok((sys, fit))
}

/// Cokriged compositions at `targets`, plus the count of flagged back-transforms.
pub fn predict_compositions(
    sys: &CokrigingSystem,
    targets: &[Location],
    alpha: f64,
) -> Result<(Vec<Composition>, Vec<f64>)> {
    let z = sys.predict(targets);
    let sols = z
        .par_iter()
        .map(|z| alpha_it_or_ilr_inverse(z, alpha))
        .collect::<alphait::Result<Vec<_>>>()?;
    let residuals = sols.iter().map(|s| s.residual).collect();
    Ok((sols.into_iter().map(|s| s.composition).collect(), residuals))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellScores {
    pub delta_h: f64,
    pub delta_tv: f64,
    /// RMSE in the α-IT metric of the cell's own α (Aitchison at 0).
    pub delta_alpha: f64,
    /// Pooled standard deviation of the transformed training compositions.
    pub sigma: f64,
    /// Predictions whose inverse residual exceeds [`RESIDUAL_FLAG`].
    pub flagged: usize,
    /// `δ_a/σ_a` for each extra metric α.
    pub metric: Vec<f64>,
}

fn transform_all(xs: &[Composition], alpha: f64) -> Result<Vec<Vec<f64>>> {
    Ok(xs
        .iter()
        .map(|x| alpha_it_or_ilr(x, alpha))
        .collect::<alphait::Result<Vec<_>>>()?)
}

fn rmse_in_metric(truth: &[Composition], pred: &[Composition], a: f64) -> Result<f64> {
    let mut sq = 0.0;
    for (t, p) in truth.iter().zip(pred) {
        sq += alpha_it_or_aitchison_distance(t, p, a)?.powi(2);
    }
    Ok((sq / truth.len() as f64).sqrt())
}

/// One `(replicate, α)` cell on an explicit train/test split. Every σ is the
/// pooled standard deviation of the transformed training set.
pub fn evaluate_cell(
    train: &CompositionalField,
    test: &CompositionalField,
    alpha: f64,
    opts: &FitOptions,
    metric_alphas: &[f64],
) -> Result<CellScores> {
    let (sys, _) = fit_system(train.locations(), train.compositions(), alpha, opts)?;
    let (pred, residuals) = predict_compositions(&sys, test.locations(), alpha)?;
    let truth = test.compositions();
    let report = score_predictions(truth, &pred, alpha)?;
    let sigma = pooled_std(&transform_all(train.compositions(), alpha)?)?;
    let metric = metric_alphas
        .iter()
        .map(|&a| {
            let s = pooled_std(&transform_all(train.compositions(), a)?)?;
            Ok(rmse_in_metric(truth, &pred, a)? / s)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CellScores {
        delta_h: report.hellinger_mean,
        delta_tv: report.total_variation_mean,
        delta_alpha: report.alpha_it_rmse,
        sigma,
        flagged: residuals.iter().filter(|&&r| r > RESIDUAL_FLAG).count(),
        metric,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub replicate: usize,
    pub alpha_label: String,
    /// α actually used; NaN when it could not be determined.
    pub alpha: f64,
    pub alpha_hat: Option<f64>,
    pub outcome: std::result::Result<CellScores, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub statistic: &'static str,
    pub alpha_label: String,
    pub n_ok: usize,
    pub alpha: f64,
    pub delta_h: f64,
    pub delta_tv: f64,
    pub delta_alpha: f64,
    pub sigma: f64,
    pub ratio: f64,
    pub flagged: f64,
    pub metric: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub metric_alphas: Vec<f64>,
    /// Detail rows, ordered by replicate then grid position.
    pub rows: Vec<ResultRow>,
    /// ML estimates per replicate, when computed.
    pub alpha_hats: Vec<Option<f64>>,
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        f64::NAN
    };
    (m, sd)
}

impl ResultTable {
    pub fn labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.alpha_label) {
                out.push(r.alpha_label.clone());
            }
        }
        out
    }

    pub fn cells<'a>(&'a self, label: &'a str) -> impl Iterator<Item = (&'a ResultRow, &'a CellScores)> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.alpha_label == label)
            .filter_map(|r| r.outcome.as_ref().ok().map(|c| (r, c)))
    }

    pub fn missing(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome.is_err()).count()
    }

    /// Mean and sample standard deviation per α label over successful cells.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut out = Vec::new();
        for label in self.labels() {
            let cells: Vec<(&ResultRow, &CellScores)> = self.cells(&label).collect();
            let col = |f: &dyn Fn(&ResultRow, &CellScores) -> f64| -> (f64, f64) {
                mean_sd(&cells.iter().map(|(r, c)| f(r, c)).collect::<Vec<_>>())
            };
            let a = col(&|r, _| r.alpha);
            let h = col(&|_, c| c.delta_h);
            let tv = col(&|_, c| c.delta_tv);
            let d = col(&|_, c| c.delta_alpha);
            let s = col(&|_, c| c.sigma);
            let q = col(&|_, c| c.delta_alpha / c.sigma);
            let fl = col(&|_, c| c.flagged as f64);
            let m: Vec<(f64, f64)> = (0..self.metric_alphas.len())
                .map(|k| col(&|_, c| c.metric[k]))
                .collect();
            for (stat, pick) in [("mean", 0usize), ("sd", 1)] {
                let g = |t: (f64, f64)| if pick == 0 { t.0 } else { t.1 };
                out.push(SummaryRow {
                    statistic: stat,
                    alpha_label: label.clone(),
                    n_ok: cells.len(),
                    alpha: g(a),
                    delta_h: g(h),
                    delta_tv: g(tv),
                    delta_alpha: g(d),
                    sigma: g(s),
                    ratio: g(q),
                    flagged: g(fl),
                    metric: m.iter().map(|&t| g(t)).collect(),
                });
            }
        }
        out
    }

    pub fn mean_row(&self, label: &str) -> Option<SummaryRow> {
        self.summary()
            .into_iter()
            .find(|s| s.statistic == "mean" && s.alpha_label == label)
    }

    pub fn alpha_hat_mean_sd(&self) -> Option<(f64, f64)> {
        let v: Vec<f64> = self.alpha_hats.iter().flatten().copied().collect();
        (!v.is_empty()).then(|| mean_sd(&v))
    }

    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = [
            "row", "replicate", "alpha_label", "alpha", "delta_h", "delta_tv", "delta_alpha",
            "sigma", "delta_alpha_over_sigma", "alpha_hat", "flagged", "n_ok", "status",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        h.extend(self.metric_alphas.iter().map(|a| format!("metric_{a}")));
        h
    }

    /// Detail rows, then mean/sd summary rows, then the α̂ summary if any.
    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        let width = self.header().len();
        let mut out = Vec::new();
        for r in &self.rows {
            let mut row = vec![
                "detail".to_string(),
                r.replicate.to_string(),
                r.alpha_label.clone(),
                fmt_f64(r.alpha),
            ];
            match &r.outcome {
                Ok(c) => {
                    row.extend([
                        fmt_f64(c.delta_h),
                        fmt_f64(c.delta_tv),
                        fmt_f64(c.delta_alpha),
                        fmt_f64(c.sigma),
                        fmt_f64(c.delta_alpha / c.sigma),
                        fmt_opt(r.alpha_hat),
                        c.flagged.to_string(),
                        String::new(),
                        "ok".to_string(),
                    ]);
                    row.extend(c.metric.iter().map(|v| fmt_f64(*v)));
                }
                Err(e) => {
                    row.extend(vec![String::new(); 5]);
                    row.push(fmt_opt(r.alpha_hat));
                    row.push(String::new());
                    row.push(String::new());
                    row.push(format!("missing: {e}"));
                    row.extend(vec![String::new(); self.metric_alphas.len()]);
                }
            }
            out.push(row);
        }
        for s in self.summary() {
            let mut row = vec![
                s.statistic.to_string(),
                String::new(),
                s.alpha_label.clone(),
                fmt_f64(s.alpha),
                fmt_f64(s.delta_h),
                fmt_f64(s.delta_tv),
                fmt_f64(s.delta_alpha),
                fmt_f64(s.sigma),
                fmt_f64(s.ratio),
                String::new(),
                fmt_f64(s.flagged),
                s.n_ok.to_string(),
                "summary".to_string(),
            ];
            row.extend(s.metric.iter().map(|v| fmt_f64(*v)));
            out.push(row);
        }
        if let Some((m, sd)) = self.alpha_hat_mean_sd() {
            for (stat, v) in [("alpha_hat_mean", m), ("alpha_hat_sd", sd)] {
                let mut row = vec![String::new(); width];
                row[0] = stat.to_string();
                row[9] = fmt_f64(v);
                row[11] = self.alpha_hats.iter().flatten().count().to_string();
                row[12] = "summary".to_string();
                out.push(row);
            }
        }
        out
    }
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| anyhow!("thread pool: {e}"))
}

fn has_zeros(field: &CompositionalField) -> bool {
    field.compositions().iter().any(|x| !x.is_strictly_positive())
}

/// Resolves `0` on zero-containing data: substitute or refuse.
fn resolve_zero_alpha(grid: &[AlphaSpec], zeros: bool, substitute: bool) -> Result<Vec<AlphaSpec>> {
    grid.iter()
        .map(|a| match a {
            AlphaSpec::Value(v) if *v == 0.0 && zeros => {
                if substitute {
                    Ok(AlphaSpec::Value(ZERO_ALPHA_SUBSTITUTE))
                } else {
                    bail!(
                        "alpha = 0 (log-ratio transform) is undefined for compositions with zero parts; \
                         use a positive alpha or enable substitute_zero_alpha to use {ZERO_ALPHA_SUBSTITUTE}"
                    )
                }
            }
            other => Ok(*other),
        })
        .collect()
}

/// Runs every grid cell of one replicate.
fn replicate_rows(
    replicate: usize,
    train: &CompositionalField,
    test: &CompositionalField,
    grid: &[AlphaSpec],
    cfg: &ExperimentConfig,
) -> (Vec<ResultRow>, Option<f64>) {
    let opts = FitOptions::from_config(cfg);
    let needs_ml = grid.contains(&AlphaSpec::Ml);
    let alpha_hat = if needs_ml {
        estimate_alpha(train.compositions(), cfg.alpha_max, cfg.alpha_step)
            .map(|e| e.alpha_hat)
            .map_err(|e| e.to_string())
    } else {
        Err(String::new())
    };
    let hat = alpha_hat.as_ref().ok().copied();
    let rows = grid
        .iter()
        .map(|spec| {
            let alpha = match spec {
                AlphaSpec::Value(v) => Ok(*v),
                AlphaSpec::Ml => alpha_hat
                    .clone()
                    .map_err(|e| format!("alpha estimation failed: {e}")),
            };
            let outcome = alpha.clone().and_then(|a| {
                evaluate_cell(train, test, a, &opts, &cfg.metric_alphas).map_err(|e| format!("{e:#}"))
            });
            ResultRow {
                replicate,
                alpha_label: spec.to_string(),
                alpha: alpha.unwrap_or(f64::NAN),
                alpha_hat: hat,
                outcome,
            }
        })
        .collect();
    (rows, hat)
}

fn assemble(cfg: &ExperimentConfig, per_rep: Vec<(Vec<ResultRow>, Option<f64>)>) -> ResultTable {
    let mut rows = Vec::new();
    let mut alpha_hats = Vec::new();
    for (r, h) in per_rep {
        rows.extend(r);
        alpha_hats.push(h);
    }
    ResultTable {
        metric_alphas: cfg.metric_alphas.clone(),
        rows,
        alpha_hats,
    }
}

/// Simulation study on a named scenario: fixed locations and split, a fresh
/// field per replicate (seed `seed + b`), every grid α per replicate.
pub fn run_simulation_study(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let name = cfg
        .scenario
        .as_deref()
        .ok_or_else(|| anyhow!("simulation study needs a scenario preset"))?;
    let mut scenario = ScenarioConfig::preset(name, cfg.seed)?;
    if cfg.test_size == 0 {
        bail!("simulation study needs test_size > 0");
    }
    scenario.n_points = cfg.train_size + cfg.test_size;
    scenario.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let locations = uniform_locations(scenario.n_points, scenario.domain, &mut rng);
    let mut order: Vec<usize> = (0..scenario.n_points).collect();
    order.shuffle(&mut rng);
    let (train_idx, test_idx) = order.split_at(cfg.train_size);
    let sampler = GrfSampler::new(locations.clone(), &scenario.model, scenario.parts() - 1)?;
    let grid = cfg.alpha_grid.clone();

    let pool = thread_pool(cfg.workers)?;
    let per_rep = pool.install(|| {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(b as u64));
                let z = sampler.sample(&mut rng);
                let field = apply_scenario(&z, &scenario)
                    .and_then(|w| to_compositions(&locations, &w, scenario.alpha0))
                    .and_then(|f| Ok((f.select(train_idx)?, f.select(test_idx)?)));
                match field {
                    Ok((train, test)) => replicate_rows(b, &train, &test, &grid, cfg),
                    Err(e) => (failed_rows(b, &grid, &e.to_string()), None),
                }
            })
            .collect::<Vec<_>>()
    });
    Ok(assemble(cfg, per_rep))
}

fn failed_rows(replicate: usize, grid: &[AlphaSpec], msg: &str) -> Vec<ResultRow> {
    grid.iter()
        .map(|spec| ResultRow {
            replicate,
            alpha_label: spec.to_string(),
            alpha: match spec {
                AlphaSpec::Value(v) => *v,
                AlphaSpec::Ml => f64::NAN,
            },
            alpha_hat: None,
            outcome: Err(format!("replicate data unavailable: {msg}")),
        })
        .collect()
}

/// Monte Carlo cross-validation: per replicate a random train/test split
/// (seed `seed + b`), α̂ on the training set, every grid α.
pub fn run_cross_validation(cfg: &ExperimentConfig, field: &CompositionalField) -> Result<ResultTable> {
    cfg.validate()?;
    let n = field.len();
    let test_size = if cfg.test_size == 0 {
        n.checked_sub(cfg.train_size)
            .ok_or_else(|| anyhow!("train_size {} exceeds the {n} points", cfg.train_size))?
    } else {
        cfg.test_size
    };
    if cfg.train_size + test_size > n || test_size == 0 {
        bail!(
            "train_size {} + test_size {test_size} must fit in the {n} available points",
            cfg.train_size
        );
    }
    let grid = resolve_zero_alpha(&cfg.alpha_grid, has_zeros(field), cfg.substitute_zero_alpha)?;
    let pool = thread_pool(cfg.workers)?;
    let per_rep = pool.install(|| {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(b as u64));
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut rng);
                let split = field
                    .select(&order[..cfg.train_size])
                    .and_then(|tr| Ok((tr, field.select(&order[cfg.train_size..cfg.train_size + test_size])?)));
                match split {
                    Ok((train, test)) => replicate_rows(b, &train, &test, &grid, cfg),
                    Err(e) => (failed_rows(b, &grid, &e.to_string()), None),
                }
            })
            .collect::<Vec<_>>()
    });
    Ok(assemble(cfg, per_rep))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapRow {
    pub location: Location,
    pub composition: Composition,
    pub residual: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMap {
    pub alpha: f64,
    pub rows: Vec<MapRow>,
}

impl PredictionMap {
    pub fn flagged(&self) -> usize {
        self.rows.iter().filter(|r| r.flagged).count()
    }

    pub fn csv(&self, part_names: &[String]) -> (Vec<String>, Vec<Vec<String>>) {
        let mut header = vec!["x".to_string(), "y".to_string()];
        header.extend(part_names.iter().cloned());
        header.extend(["residual".to_string(), "flag".to_string()]);
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut v = vec![fmt_f64(r.location[0]), fmt_f64(r.location[1])];
                v.extend(r.composition.parts().iter().map(|p| fmt_f64(*p)));
                v.push(fmt_f64(r.residual));
                v.push(u8::from(r.flagged).to_string());
                v
            })
            .collect();
        (header, rows)
    }
}

/// Regular `side × side` grid over the bounding box, cell centers at the
/// box edges included.
pub fn regular_grid(lo: Location, hi: Location, side: usize) -> Vec<Location> {
    let step = |k: usize, a: f64, b: f64| {
        if side == 1 {
            0.5 * (a + b)
        } else {
            a + (b - a) * k as f64 / (side - 1) as f64
        }
    };
    (0..side * side)
        .map(|k| [step(k % side, lo[0], hi[0]), step(k / side, lo[1], hi[1])])
        .collect()
}

/// Fits on the whole field with the first grid α (α̂ for `ml`) and predicts
/// compositions on a regular grid.
pub fn krige_map(cfg: &ExperimentConfig, field: &CompositionalField) -> Result<PredictionMap> {
    cfg.validate()?;
    if cfg.grid_size == 0 {
        bail!("grid_size must be positive");
    }
    let grid = resolve_zero_alpha(&cfg.alpha_grid, has_zeros(field), cfg.substitute_zero_alpha)?;
    let alpha = match grid[0] {
        AlphaSpec::Value(v) => v,
        AlphaSpec::Ml => {
            estimate_alpha(field.compositions(), cfg.alpha_max, cfg.alpha_step)
                .context("estimating alpha")?
                .alpha_hat
        }
    };
    let pool = thread_pool(cfg.workers)?;
    pool.install(|| {
        let (sys, _) = fit_system(
            field.locations(),
            field.compositions(),
            alpha,
            &FitOptions::from_config(cfg),
        )?;
        let (lo, hi) = field.bounding_box();
        let targets = regular_grid(lo, hi, cfg.grid_size);
        let (comps, residuals) = predict_compositions(&sys, &targets, alpha)?;
        let rows = targets
            .into_iter()
            .zip(comps)
            .zip(residuals)
            .map(|((location, composition), residual)| MapRow {
                location,
                composition,
                residual,
                flagged: residual > RESIDUAL_FLAG,
            })
            .collect();
        Ok(PredictionMap { alpha, rows })
    })
}

/// Run manifest: configuration, seed and software version.
pub fn manifest(cfg: &ExperimentConfig, extra: &[(&str, String)]) -> String {
    let mut s = format!(
        "software = alphait {}\nseed = {}\n",
        env!("CARGO_PKG_VERSION"),
        cfg.seed
    );
    for (k, v) in extra {
        s.push_str(&format!("{k} = {v}\n"));
    }
    s.push_str("\n[config]\n");
    s.push_str(&cfg.to_text());
    s
}
