//! The `mixdens` command line tool.
//!
//! Exit status is 0 on success, 1 when an estimator fails and 2 for input,
//! output and validation errors.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mixdens_core::copulas::{format_nu, t_profile, CopulaFamily};
use mixdens_core::evaluation::log_ratio_table;
use mixdens_core::simulation::{
    dgp_figure1, loss_matrix, EstimatorConfig, EstimatorKind, Experiment, FittedModel, Loss,
};
use mixdens_core::{DataMatrix, Density, RngStream, SampleDensity};

use crate::config::{ConfigError, DgpConfig, ExperimentConfig, ExperimentKind, DEFAULT_N_TEST};
use crate::csvio::{read_table, write_table, Table};
use crate::driver::{bic_select_par, fit_estimator_par, lps_cv_par, run_replications_par};
use crate::model::{BicRow, FitMetadata, ModelDocument};
use crate::report;

#[derive(Debug, Parser)]
#[command(
    name = "mixdens",
    version,
    about = "Multivariate density estimation experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config (JSON).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads; all logical cores by default.
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
    /// Output directory; overrides the config `output`, default `.`.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw training and test samples from a data-generating process.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Fit one estimator to a CSV file and write the model as JSON.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Overrides the config `input`.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
    },
    /// Replicated KL and L2 comparison of estimators on simulated data.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Also write per-replication log ratios in long format.
        #[arg(long)]
        emit_plot_data: bool,
    },
    /// Cross-validated log predictive scores.
    Cv {
        #[command(flatten)]
        common: Common,
        /// Overrides the config `input`.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
    },
    /// Draw from a fitted model.
    Sample {
        #[command(flatten)]
        common: Common,
        /// Model JSON written by `fit`.
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        #[arg(long)]
        n: usize,
        /// Discarded Metropolis-Hastings states (adapted models only).
        #[arg(long, default_value_t = 1000)]
        burn_in: usize,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Estimation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Estimation(_) => 1,
            Self::Input(_) => 2,
        }
    }
}

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        input_err(e)
    }
}

impl From<crate::csvio::CsvError> for CliError {
    fn from(e: crate::csvio::CsvError) -> Self {
        input_err(e)
    }
}

impl From<crate::model::ModelError> for CliError {
    fn from(e: crate::model::ModelError) -> Self {
        input_err(e)
    }
}

type CliResult<T> = Result<T, CliError>;

struct Context {
    cfg: ExperimentConfig,
    seed: u64,
    out: PathBuf,
}

impl Context {
    fn new(common: &Common, kind: Option<ExperimentKind>) -> CliResult<Self> {
        let cfg = match (&common.config, kind) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, None) => ExperimentConfig::from_json("{}")?,
            (None, Some(k)) => return Err(input_err(format!("{} needs --config", k.name()))),
        };
        let seed = common.seed.unwrap_or(cfg.seed());
        let out = common
            .out
            .clone()
            .or_else(|| cfg.output.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&out)
            .map_err(|e| input_err(format!("cannot create {}: {e}", out.display())))?;
        Ok(Self { cfg, seed, out })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write(&self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.path(name);
        fs::write(&path, contents)
            .map_err(|e| input_err(format!("cannot write {}: {e}", path.display())))
    }

    fn write_table(&self, name: &str, table: &Table) -> CliResult<()> {
        Ok(write_table(&self.path(name), table)?)
    }

    fn stream(&self) -> RngStream {
        RngStream::new(self.seed, 0)
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let jobs = match &cli.command {
        Command::Simulate { common }
        | Command::Fit { common, .. }
        | Command::Evaluate { common, .. }
        | Command::Cv { common, .. }
        | Command::Sample { common, .. } => common.jobs,
    };
    if let Some(n) = jobs {
        if n == 0 {
            return Err(input_err("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(input_err)?;
    }
    match cli.command {
        Command::Simulate { common } => simulate(&common),
        Command::Fit { common, input } => fit(&common, input),
        Command::Evaluate {
            common,
            emit_plot_data,
        } => evaluate(&common, emit_plot_data),
        Command::Cv { common, input } => cv(&common, input),
        Command::Sample {
            common,
            model,
            n,
            burn_in,
        } => sample(&common, &model, n, burn_in),
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    seed: u64,
    dgp: &'a DgpConfig,
    p: usize,
    n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_test: Option<usize>,
    files: Vec<&'a str>,
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn simulate(common: &Common) -> CliResult<()> {
    let ctx = Context::new(common, Some(ExperimentKind::Simulate))?;
    ctx.cfg.validate(ExperimentKind::Simulate)?;
    let dgp_cfg = ctx.cfg.dgp.as_ref().expect("validated");
    let n = ctx.cfg.n();
    let stream = ctx.stream();
    let manifest = if dgp_cfg.is_figure1() {
        let (three, two) = dgp_figure1();
        let files = ["figure1_three_separated.csv", "figure1_two_scale.csv"];
        for (i, (dgp, name)) in [three, two].iter().zip(files).enumerate() {
            let y = dgp.sample(n, &mut stream.child(i as u64).rng());
            let x = dgp.normal_scores(&y).expect("mixture marginals are known");
            ctx.write_table(
                name,
                &Table::numbered("y", y).hstack(&Table::numbered("x", x)),
            )?;
        }
        Manifest {
            seed: ctx.seed,
            dgp: dgp_cfg,
            p: 2,
            n,
            n_test: None,
            files: files.to_vec(),
        }
    } else {
        let dgp = dgp_cfg.build()?;
        let n_test = ctx.cfg.n_test.unwrap_or(DEFAULT_N_TEST);
        let train = dgp.sample(n, &mut stream.child(0).rng());
        ctx.write_table("train.csv", &Table::numbered("y", train))?;
        let mut files = vec!["train.csv"];
        if n_test > 0 {
            let test = dgp.sample(n_test, &mut stream.child(1).rng());
            ctx.write_table("test.csv", &Table::numbered("y", test))?;
            files.push("test.csv");
        }
        Manifest {
            seed: ctx.seed,
            dgp: dgp_cfg,
            p: dgp.dim(),
            n,
            n_test: Some(n_test),
            files,
        }
    };
    ctx.write("manifest.json", &to_json(&manifest))?;
    println!(
        "wrote {} to {}",
        manifest.files.join(", "),
        ctx.out.display()
    );
    Ok(())
}

fn load_input(ctx: &Context, input: Option<PathBuf>) -> CliResult<(Table, Option<Table>)> {
    let path = input.or_else(|| ctx.cfg.input.clone()).expect("validated");
    let table = read_table(&path).map_err(|e| input_err(format!("{}: {e}", path.display())))?;
    let (y, z) = table.split_regressors(&ctx.cfg.regressors)?;
    if y.names.is_empty() {
        return Err(input_err(
            "no response columns left after removing the regressors",
        ));
    }
    Ok((y, z))
}

fn fit(common: &Common, input: Option<PathBuf>) -> CliResult<()> {
    let mut ctx = Context::new(common, Some(ExperimentKind::Fit))?;
    if input.is_some() {
        ctx.cfg.input.clone_from(&input);
    }
    ctx.cfg.validate(ExperimentKind::Fit)?;
    let (y, z) = load_input(&ctx, input)?;
    let entry = &ctx.cfg.estimators[0];
    let kind = entry.kind()?;
    let cfg = ctx.cfg.estimator_config(entry);
    let stream = ctx.stream();
    let z_data = z.as_ref().map(|t| &t.data);
    let mut log = format!(
        "estimator {} on {} rows x {} columns{}\n",
        kind.label(),
        y.data.nrows(),
        y.data.ncols(),
        z.as_ref()
            .map(|z| format!(" with regressors {}", z.names.join(", ")))
            .unwrap_or_default()
    );
    let mut bic = None;
    let estimation =
        |e: mixdens_core::Error| CliError::Estimation(format!("{} fit failed: {e}", kind.label()));
    let model = if kind == EstimatorKind::Mn {
        let sel = bic_select_par(
            &y.data,
            z_data,
            cfg.adapted.max_components,
            &cfg.adapted.sa,
            &kind.own_stream(&stream),
        )
        .map_err(estimation)?;
        let rows: Vec<BicRow> = sel.table.iter().map(BicRow::from).collect();
        log.push_str(&bic_log(&rows, sel.selected_m()));
        bic = Some(rows);
        FittedModel::Mixture(sel.model)
    } else {
        fit_estimator_par(kind, &y.data, z_data, &cfg, &stream).map_err(estimation)?
    };
    log.push_str(&fit_diagnostics(&model, &y.data, &cfg));
    let mut doc = ModelDocument::from_fitted(&model);
    *doc.metadata_mut() = Some(FitMetadata {
        seed: Some(ctx.seed),
        iterations: Some(cfg.adapted.sa.iterations),
        bic,
    });
    ctx.write("model.json", &doc.to_json()?)?;
    ctx.write("fit_log.txt", &log)?;
    print!("{log}");
    Ok(())
}

fn bic_log(rows: &[BicRow], selected: usize) -> String {
    let mut s = String::from("BIC by number of components\n");
    for r in rows {
        let _ = match (r.bic, &r.error) {
            (Some(b), _) => writeln!(
                s,
                "  m = {:>2}  loglik = {:.4}  BIC = {b:.4}",
                r.m,
                r.log_likelihood.unwrap_or(f64::NAN)
            ),
            (None, Some(e)) => writeln!(s, "  m = {:>2}  failed: {e}", r.m),
            (None, None) => Ok(()),
        };
    }
    let _ = writeln!(s, "selected m = {selected}");
    s
}

fn fit_diagnostics(model: &FittedModel, data: &DataMatrix, cfg: &EstimatorConfig) -> String {
    let mut s = String::new();
    match model {
        FittedModel::Mixture(m) => {
            let _ = writeln!(s, "components: {}", m.components());
        }
        FittedModel::Copula(c) => match c.family() {
            CopulaFamily::Normal { correlation } => {
                let d: Vec<String> = correlation
                    .diagonal()
                    .iter()
                    .map(|v| format!("{v:.5}"))
                    .collect();
                let _ = writeln!(s, "correlation diagonal: {}", d.join(" "));
            }
            CopulaFamily::StudentT { nu, .. } => {
                s.push_str("nu profile log-likelihood\n");
                for &grid_nu in &cfg.copula.nu_grid {
                    let _ = match t_profile(data, c.marginals(), grid_nu, &cfg.copula) {
                        Ok(p) => {
                            writeln!(s, "  nu = {grid_nu:>6}  loglik = {:.4}", p.log_likelihood)
                        }
                        Err(e) => writeln!(s, "  nu = {grid_nu:>6}  failed: {e}"),
                    };
                }
                let _ = writeln!(s, "selected nu = {} ({nu})", format_nu(*nu));
            }
            CopulaFamily::Mixture { joint } => {
                let _ = writeln!(s, "joint mixture components: {}", joint.components());
            }
            CopulaFamily::Archimedean { family, theta } => {
                let _ = writeln!(s, "{} theta = {theta}", family.name());
            }
        },
        FittedModel::Adapted(a) => {
            let k = a.k_estimate();
            let _ = writeln!(s, "base components: {}", a.base().components());
            let _ = writeln!(s, "epsilon = {}", a.epsilon());
            let _ = writeln!(
                s,
                "log k = {:.6} (se {:.2e}, {} draws)",
                k.log_k, k.std_error, k.draws
            );
            let _ = writeln!(
                s,
                "clamped ratios: {} low, {} high of {} ({:.2}%){}",
                k.clamps.low,
                k.clamps.high,
                k.clamps.total,
                100.0 * k.clamps.fraction(),
                if k.unreliable {
                    "; k is unreliable"
                } else {
                    ""
                }
            );
        }
    }
    s
}

fn evaluate(common: &Common, emit_plot_data: bool) -> CliResult<()> {
    let ctx = Context::new(common, Some(ExperimentKind::Evaluate))?;
    let cfg = &ctx.cfg;
    cfg.validate(ExperimentKind::Evaluate)?;
    let mut exp = Experiment::new(cfg.dgp.as_ref().expect("validated").build()?, cfg.kinds()?);
    exp.n = cfg.n();
    exp.n_test = cfg.n_test.unwrap_or(DEFAULT_N_TEST);
    exp.config = cfg.base_config();
    exp.overrides = cfg
        .estimators
        .iter()
        .map(|e| (e.options != Default::default()).then(|| cfg.estimator_config(e)))
        .collect();
    let names: Vec<String> = exp.labels();
    let reference = cfg.reference_index()?;
    let replications = cfg.replications();
    let outcomes = run_replications_par(&exp, replications, &ctx.stream()).map_err(input_err)?;
    let kl =
        log_ratio_table(&loss_matrix(&outcomes, Loss::Kl), &names, reference).map_err(input_err)?;
    let l2 =
        log_ratio_table(&loss_matrix(&outcomes, Loss::L2), &names, reference).map_err(input_err)?;
    let reports = [(Loss::Kl, &kl), (Loss::L2, &l2)];
    ctx.write("report_kl.csv", &report::ratio_csv(&kl))?;
    ctx.write("report_l2.csv", &report::ratio_csv(&l2))?;
    ctx.write("losses.csv", &report::losses_csv(&outcomes, &names))?;
    let table = report::text_table(&reports);
    ctx.write("report.txt", &table)?;
    if emit_plot_data {
        let ids: Vec<usize> = outcomes.iter().map(|o| o.index).collect();
        ctx.write("plot_data.csv", &report::plot_data_csv(&reports, &ids))?;
    }
    print!("{table}");
    let failed: Vec<&str> = names
        .iter()
        .enumerate()
        .filter(|(j, _)| outcomes.iter().all(|o| o.fits[*j].error.is_some()))
        .map(|(_, n)| n.as_str())
        .collect();
    if !failed.is_empty() {
        return Err(CliError::Estimation(format!(
            "failed in every replication: {}",
            failed.join(", ")
        )));
    }
    Ok(())
}

fn cv(common: &Common, input: Option<PathBuf>) -> CliResult<()> {
    let mut ctx = Context::new(common, Some(ExperimentKind::Cv))?;
    if input.is_some() {
        ctx.cfg.input.clone_from(&input);
    }
    ctx.cfg.validate(ExperimentKind::Cv)?;
    let stream = ctx.stream();
    let (y, z) = match &ctx.cfg.dgp {
        Some(dgp) => {
            let data = dgp.build()?.sample(ctx.cfg.n(), &mut stream.child(0).rng());
            (Table::numbered("y", data), None)
        }
        None => load_input(&ctx, input)?,
    };
    ctx.cfg.check_folds(y.data.nrows())?;
    let folds = ctx.cfg.folds();
    let z_data = z.as_ref().map(|t| &t.data);
    let mut results = Vec::new();
    for entry in &ctx.cfg.estimators {
        let kind = entry.kind()?;
        let cfg = ctx.cfg.estimator_config(entry);
        let factory = |d: &DataMatrix, z: Option<&DataMatrix>, s: &RngStream| {
            fit_estimator_par(kind, d, z, &cfg, s)
        };
        let result = lps_cv_par(
            &y.data,
            z_data,
            factory,
            folds,
            &kind.own_stream(&stream.child(1)),
        )
        .map_err(input_err)?;
        results.push((kind.label().to_string(), result));
    }
    ctx.write("cv.csv", &report::cv_csv(&results))?;
    let text = report::cv_text(&results, folds);
    ctx.write("cv.txt", &text)?;
    print!("{text}");
    let failed: Vec<&str> = results
        .iter()
        .filter(|(_, r)| r.failed() == r.folds.len())
        .map(|(n, _)| n.as_str())
        .collect();
    if !failed.is_empty() {
        return Err(CliError::Estimation(format!(
            "failed in every fold: {}",
            failed.join(", ")
        )));
    }
    Ok(())
}

fn sample(common: &Common, model_path: &Path, n: usize, burn_in: usize) -> CliResult<()> {
    let ctx = Context::new(common, None)?;
    let text = fs::read_to_string(model_path)
        .map_err(|e| input_err(format!("{}: {e}", model_path.display())))?;
    let model = ModelDocument::from_json(&text)?.to_fitted()?;
    let mut rng = ctx.stream().rng();
    let draws = match &model {
        FittedModel::Mixture(m) => {
            if m.regressors() > 0 {
                return Err(input_err(
                    "sampling a model with regressors needs regressor values",
                ));
            }
            m.sample(n, &mut rng)
        }
        FittedModel::Copula(c) => c.sample(n, &mut rng),
        FittedModel::Adapted(a) => {
            if a.regression().is_some() {
                return Err(input_err(
                    "sampling a model with regressors needs regressor values",
                ));
            }
            let out = a.sample_mh(n, burn_in, &mut rng);
            println!(
                "Metropolis-Hastings acceptance rate: {:.4}",
                out.acceptance_rate
            );
            out.draws
        }
    };
    ctx.write_table("sample.csv", &Table::numbered("y", draws))?;
    println!("wrote {n} draws to {}", ctx.path("sample.csv").display());
    Ok(())
}
