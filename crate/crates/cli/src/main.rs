use std::path::{Path, PathBuf};

use alphait::geostat::{
empirical_cross_variogram, CovarianceFunction, LagBins
};
use alphait::mle::estimate_alpha;
use alphait::sim::{inject_zeros, simulate_scenario, ScenarioConfig};
use alphait::transforms::{alpha_it_or_ilr, alpha_it_or_ilr_inverse};
use alphait_cli::config::{parse_alpha_grid, parse_float_list, AlphaSpec, ExperimentConfig, Mode, ModelKind};
use alphait_cli::experiments::{
    fit_system, krige_map, manifest, run_cross_validation, run_simulation_study, FitOptions,
    ResultTable, RESIDUAL_FLAG,
};
use alphait_cli::io::{
    default_part_names, fmt_f64, load_field, load_scores, read_table, write_field, write_points,
    write_rows, write_text, LoadedField,
};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "alphait", version, about = "α-isometric log-ratio geostatistics for compositional data")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat key = value experiment configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Single α; 0 selects the log-ratio transform.
    #[arg(long, global = true)]
    alpha: Option<String>,
    /// Comma list, lo:hi:step ranges and the token `ml`.
    #[arg(long, global = true)]
    alpha_grid: Option<String>,
    /// proportional or nugget-matern.
    #[arg(long, global = true)]
    model: Option<ModelKind>,
}

#[derive(Subcommand)]
enum Command {
    /// Compositions to α-IT scores.
    Transform {
        input: PathBuf,
    },
    /// Scores back to compositions, with the inverse residual.
    Inverse {
        input: PathBuf,
    },
    /// Maximum likelihood α with the zero-pattern decomposition.
    EstimateAlpha {
        input: PathBuf,
        #[arg(long, default_value_t = 1.5)]
        alpha_max: f64,
        #[arg(long, default_value_t = 0.01)]
        alpha_step: f64,
    },
    /// Empirical cross-variogram of the transformed field.
    Variogram {
        input: PathBuf,
        #[arg(long, default_value_t = alphait::geostat::DEFAULT_BINS)]
        bins: usize,
    },
    /// Nugget + Whittle–Matérn LMC fit to the transformed field.
    Fit {
        input: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        nu: f64,
    },
    /// Cokriged compositions at target locations (CSV with x, y).
    Krige {
        input: PathBuf,
        targets: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        nu: f64,
        /// Also report the score-space cokriging variances.
        #[arg(long)]
        variance: bool,
    },
    /// Simulated compositional field from a named scenario.
    Simulate {
        /// e.g. center-0.2, border-0.6, corner-1
        scenario: String,
        #[arg(long, default_value_t = 2000)]
        n_points: usize,
        /// Fraction of compositions receiving zeros.
        #[arg(long, default_value_t = 0.0)]
        zeros: f64,
        /// Shares of one-zero, two-zero, … compositions among the whole field.
        #[arg(long, default_value = "1")]
        zero_mix: String,
    },
    /// Simulation study on a scenario preset.
    Study {
        #[arg(long)]
        scenario: Option<String>,
        #[command(flatten)]
        sizes: Sizes,
    },
    /// Monte Carlo cross-validation on a field.
    Cv {
        input: Option<PathBuf>,
        #[command(flatten)]
        sizes: Sizes,
    },
    /// Predictions on a regular grid over the field's bounding box.
    KrigeMap {
        input: Option<PathBuf>,
        #[arg(long)]
        grid_size: Option<usize>,
    },
}

#[derive(Args)]
struct Sizes {
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    train_size: Option<usize>,
    /// 0 uses every point outside the training set.
    #[arg(long)]
    test_size: Option<usize>,
    /// Extra α-IT metrics scored as δ_a/σ_a columns.
    #[arg(long)]
    metric_alphas: Option<String>,
    /// Use α = 0.01 in place of 0 on data with zero parts.
    #[arg(long)]
    substitute_zero_alpha: bool,
}

impl Sizes {
    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(b) = self.replicates {
            cfg.replicates = b;
        }
        if let Some(n) = self.train_size {
            cfg.train_size = n;
        }
        if let Some(n) = self.test_size {
            cfg.test_size = n;
        }
        if let Some(m) = &self.metric_alphas {
            cfg.metric_alphas = parse_float_list(m)?;
        }
        cfg.substitute_zero_alpha |= self.substitute_zero_alpha;
        Ok(())
    }
}

fn experiment_config(common: &Common, mode: Mode) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.mode = mode;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    if let Some(d) = &common.out_dir {
        cfg.out_dir = d.clone();
    }
    if let Some(m) = common.model {
        cfg.model = Some(m);
    }
    if let Some(g) = common.alpha_grid.as_deref().or(common.alpha.as_deref()) {
        cfg.alpha_grid = parse_alpha_grid(g)?;
    }
    Ok(cfg)
}

/// The single α for the per-field subcommands; `ml` estimates it first.
fn single_alpha(common: &Common, cfg: &ExperimentConfig, field: &LoadedField) -> Result<f64> {
    let spec = match common.alpha.as_deref() {
        Some(s) => parse_alpha_grid(s)?[0],
        None => cfg.alpha_grid[0],
    };
    let a = match spec {
        AlphaSpec::Value(v) => v,
        AlphaSpec::Ml => {
            let e = estimate_alpha(field.field.compositions(), cfg.alpha_max, cfg.alpha_step)?;
            eprintln!("alpha_hat = {}", e.alpha_hat);
            e.alpha_hat
        }
    };
    if a == 0.0 && field.census.has_zeros() {
        bail!("alpha = 0 is undefined for compositions with zero parts; use a positive alpha");
    }
    Ok(a)
}

fn load(path: &Path) -> Result<LoadedField> {
    let f = load_field(path)?;
    eprintln!("{} compositions, D = {}: {}", f.field.len(), f.field.dim(), f.census.report());
    Ok(f)
}

fn score_names(k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("z{i}")).collect()
}

fn write_table(cfg: &ExperimentConfig, name: &str, table: &ResultTable) -> Result<()> {
    let path = cfg.out_dir.join(format!("{name}.csv"));
    write_rows(&path, &table.header(), &table.csv_rows())?;
    let mut extra = vec![("missing_cells", table.missing().to_string())];
    if let Some((m, sd)) = table.alpha_hat_mean_sd() {
        extra.push(("alpha_hat", format!("{m:.3} ({sd:.3})")));
    }
    write_text(&cfg.out_dir.join(format!("{name}.manifest.txt")), &manifest(cfg, &extra))?;
    for s in table.summary().iter().filter(|s| s.statistic == "mean") {
        println!(
            "alpha {:>6}  n_ok {:>3}  delta_H {:.5}  delta_TV {:.5}  delta_alpha/sigma {:.5}",
            s.alpha_label, s.n_ok, s.delta_h, s.delta_tv, s.ratio
        );
    }
    for (label, value) in extra {
        println!("{label}: {value}");
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let common = &cli.common;
    match &cli.command {
        Command::Transform { input } => {
            let cfg = experiment_config(common, Mode::Estimate)?;
            let f = load(input)?;
            let alpha = single_alpha(common, &cfg, &f)?;
            let z = f
                .field
                .compositions()
                .iter()
                .map(|x| alpha_it_or_ilr(x, alpha))
                .collect::<alphait::Result<Vec<_>>>()?;
            let out = cfg.out_dir.join("scores.csv");
            write_points(&out, &score_names(f.field.dim() - 1), f.field.locations(), &z)?;
            println!("wrote {}", out.display());
        }
        Command::Inverse { input } => {
            let cfg = experiment_config(common, Mode::Estimate)?;
            let alpha = match common.alpha.as_deref().map(parse_alpha_grid).transpose()? {
                Some(g) => match g[0] {
                    AlphaSpec::Value(v) => v,
                    AlphaSpec::Ml => bail!("inverse needs a numeric alpha"),
                },
                None => bail!("inverse needs --alpha"),
            };
            let (locs, scores, _) = load_scores(input)?;
            let sols = scores
                .iter()
                .map(|z| alpha_it_or_ilr_inverse(z, alpha))
                .collect::<alphait::Result<Vec<_>>>()?;
            let d = scores[0].len() + 1;
            let mut names = default_part_names(d);
            names.extend(["residual".to_string(), "flag".to_string()]);
            let rows: Vec<Vec<f64>> = sols
                .iter()
                .map(|s| {
                    let mut v = s.composition.parts().to_vec();
                    v.push(s.residual);
                    v.push(f64::from(u8::from(s.residual > RESIDUAL_FLAG)));
                    v
                })
                .collect();
            let out = cfg.out_dir.join("compositions.csv");
            write_points(&out, &names, &locs, &rows)?;
            let flagged = sols.iter().filter(|s| s.residual > RESIDUAL_FLAG).count();
            println!("{flagged} of {} scores outside the codomain", sols.len());
            println!("wrote {}", out.display());
        }
        Command::EstimateAlpha { input, alpha_max, alpha_step } => {
            let cfg = experiment_config(common, Mode::Estimate)?;
            let f = load(input)?;
            let e = estimate_alpha(f.field.compositions(), *alpha_max, *alpha_step)?;
            println!("alpha_hat = {}", fmt_f64(e.alpha_hat));
            println!("loglik = {}", fmt_f64(e.loglik_at_hat));
            for (p, c) in &e.pattern_counts {
                println!("pattern {p}: {c}");
            }
            if !e.skipped_patterns.is_empty() {
                let s: Vec<String> = e.skipped_patterns.iter().map(|p| p.to_string()).collect();
                println!("skipped (too few points): {}", s.join(" "));
            }
            if e.excluded > 0 {
                println!("excluded (fewer than two positive parts): {}", e.excluded);
            }
            let out = cfg.out_dir.join("alpha_profile.csv");
            let rows: Vec<Vec<String>> = e
                .profile
                .iter()
                .map(|(a, l)| vec![fmt_f64(*a), fmt_f64(*l)])
                .collect();
            write_rows(&out, &["alpha".into(), "loglik".into()], &rows)?;
            println!("wrote {}", out.display());
        }
        Command::Variogram { input, bins } => {
            let cfg = experiment_config(common, Mode::Estimate)?;
            let f = load(input)?;
            let alpha = single_alpha(common, &cfg, &f)?;
            let z = f
                .field
                .compositions()
                .iter()
                .map(|x| alpha_it_or_ilr(x, alpha))
                .collect::<alphait::Result<Vec<_>>>()?;
            let max_lag = 0.5 * alphait::geostat::max_pairwise_distance(f.field.locations());
            let ev = empirical_cross_variogram(f.field.locations(), &z, &LagBins::equal_width(*bins, max_lag)?)?;
            let p = ev.n_variables();
            let mut header: Vec<String> = ["center", "mean_lag", "pairs", "sparse"].map(String::from).to_vec();
            for i in 0..p {
                for j in i..p {
                    header.push(format!("gamma_{}_{}", i + 1, j + 1));
                }
            }
            let rows: Vec<Vec<String>> = (0..ev.counts.len())
                .map(|k| {
                    let mut r = vec![
                        fmt_f64(ev.centers[k]),
                        fmt_f64(ev.mean_lags[k]),
                        ev.counts[k].to_string(),
                        u8::from(ev.sparse[k]).to_string(),
                    ];
                    for i in 0..p {
                        for j in i..p {
                            r.push(fmt_f64(ev.gamma[k][(i, j)]));
                        }
                    }
                    r
                })
                .collect();
            let out = cfg.out_dir.join("variogram.csv");
            write_rows(&out, &header, &rows)?;
            println!("wrote {}", out.display());
        }
        Command::Fit { input, nu } => {
            let mut cfg = experiment_config(common, Mode::Estimate)?;
            cfg.nu = *nu;
            let f = load(input)?;
            let alpha = single_alpha(common, &cfg, &f)?;
            let (_, fit) = fit_system(f.field.locations(), f.field.compositions(), alpha, &FitOptions::from_config(&cfg))?;
            let mut text = format!("alpha = {alpha}\nwss = {}\nconverged = {}\n", fmt_f64(fit.wss()), fit.converged);
            for (func, b) in fit.model.structures() {
                match func {
                    CovarianceFunction::Nugget => text.push_str("\n[nugget]\n"),
                    CovarianceFunction::WhittleMatern { nu, scale } => {
                        text.push_str(&format!("\n[whittle-matern]\nnu = {nu}\nscale = {}\n", fmt_f64(*scale)))
                    }
                }
                for i in 0..b.nrows() {
                    let row: Vec<String> = (0..b.ncols()).map(|j| fmt_f64(b[(i, j)])).collect();
                    text.push_str(&row.join(" "));
                    text.push('\n');
                }
            }
            print!("{text}");
            write_text(&cfg.out_dir.join("lmc_fit.txt"), &text)?;
        }
        Command::Krige { input, targets, nu, variance } => {
            let mut cfg = experiment_config(common, Mode::Estimate)?;
            cfg.nu = *nu;
            let f = load(input)?;
            let alpha = single_alpha(common, &cfg, &f)?;
            let (_, rows) = read_table(targets)?;
            let locs: Vec<_> = rows.iter().map(|(_, v)| [v[0], v[1]]).collect();
            let (sys, _) = fit_system(f.field.locations(), f.field.compositions(), alpha, &FitOptions::from_config(&cfg))?;
            let out = sys.predict_with_variance(&locs)?;
            let mut names = f.part_names.clone();
            names.extend(["residual".to_string(), "flag".to_string()]);
            if *variance {
                names.extend(score_names(f.field.dim() - 1).iter().map(|n| format!("var_{n}")));
            }
            let mut values = Vec::with_capacity(locs.len());
            let mut flagged = 0;
            for (z, var) in out.predictions.iter().zip(&out.variances) {
                let s = alpha_it_or_ilr_inverse(z, alpha)?;
                let mut v = s.composition.parts().to_vec();
                v.push(s.residual);
                let flag = s.residual > RESIDUAL_FLAG;
                flagged += usize::from(flag);
                v.push(f64::from(u8::from(flag)));
                if *variance {
                    v.extend(var.iter().copied());
                }
                values.push(v);
            }
            let path = cfg.out_dir.join("predictions.csv");
            write_points(&path, &names, &locs, &values)?;
            println!("{flagged} predictions flagged outside the codomain");
            println!("wrote {}", path.display());
        }
        Command::Simulate { scenario, n_points, zeros, zero_mix } => {
            let cfg = experiment_config(common, Mode::Estimate)?;
            let mut sc = ScenarioConfig::preset(scenario, cfg.seed)?;
            sc.n_points = *n_points;
            let mut field = simulate_scenario(&sc)?;
            if *zeros > 0.0 {
                field = inject_zeros(&field, *zeros, &parse_float_list(zero_mix)?, cfg.seed)?;
            }
            let out = cfg.out_dir.join(format!("{scenario}.csv"));
            write_field(&out, &field, &default_part_names(field.dim()))?;
            println!("wrote {}", out.display());
        }
        Command::Study { scenario, sizes } => {
            let mut cfg = experiment_config(common, Mode::SimulationStudy)?;
            sizes.apply(&mut cfg)?;
            if let Some(s) = scenario {
                cfg.scenario = Some(s.clone());
            }
            let table = run_simulation_study(&cfg)?;
            let name = format!("study_{}", cfg.scenario.as_deref().unwrap_or("scenario"));
            write_table(&cfg, &name, &table)?;
        }
        Command::Cv { input, sizes } => {
            let mut cfg = experiment_config(common, Mode::CrossValidation)?;
            sizes.apply(&mut cfg)?;
            if let Some(p) = input {
                cfg.input = Some(p.clone());
            }
            let path = cfg.input.clone().context("cv needs an input field")?;
            let f = load(&path)?;
            let table = run_cross_validation(&cfg, &f.field)?;
            write_table(&cfg, "cv", &table)?;
        }
        Command::KrigeMap { input, grid_size } => {
            let mut cfg = experiment_config(common, Mode::KrigeMap)?;
            if let Some(p) = input {
                cfg.input = Some(p.clone());
            }
            if let Some(g) = grid_size {
                cfg.grid_size = *g;
            }
            let path = cfg.input.clone().context("krige-map needs an input field")?;
            let f = load(&path)?;
            let map = krige_map(&cfg, &f.field)?;
            let (header, rows) = map.csv(&f.part_names);
            let out = cfg.out_dir.join("krige_map.csv");
            write_rows(&out, &header, &rows)?;
            let extra = [
                ("alpha", map.alpha.to_string()),
                ("flagged", map.flagged().to_string()),
            ];
            write_text(&cfg.out_dir.join("krige_map.manifest.txt"), &manifest(&cfg, &extra))?;
            println!("alpha = {}, {} cells, {} flagged", map.alpha, map.rows.len(), map.flagged());
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}
