use std::path::PathBuf;

use clap::Args;
use splitmetric::databench::{bench_table, load_dataset, LoadOptions, DEFAULT_PERMUTATIONS};
use splitmetric::jacobi::matrix_model_params;
use splitmetric::montecarlo::{compare, run_integrity_simulation, SimulationConfig};
use splitmetric::{
    asymptotic_p, integrity_curve, integrity_f, inv_cross_moment, inv_moment_1, inv_moment_2, optimal_p,
    sample_moments, solve_real_root, Error, Result, SplitProblem,
};

use crate::output::{Cell, Report};

#[derive(Debug, Args)]
pub struct Shape {
    /// Number of samples.
    #[arg(long)]
    pub m: u64,
    /// Number of features.
    #[arg(long)]
    pub n: u64,
}

#[derive(Debug, Args)]
pub struct AsymptoticArgs {
    #[command(flatten)]
    pub shape: Shape,
    /// Number of expansion terms, 1 to 4.
    #[arg(long, default_value_t = 4)]
    pub order: u32,
    /// Sweep m log-uniformly from --m up to this value.
    #[arg(long, value_name = "M_MAX")]
    pub sweep: Option<u64>,
    /// Grid points for --sweep.
    #[arg(long, default_value_t = 50, requires = "sweep")]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub shape: Shape,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct MomentsArgs {
    #[command(flatten)]
    pub shape: Shape,
    /// Training size; the sampler needs n + 1 <= p <= m - n.
    #[arg(long)]
    pub p: u64,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Delimited numeric table.
    pub path: PathBuf,
    /// 0-based column used as the regression target.
    #[arg(long, default_value_t = 0)]
    pub target_column: usize,
    /// 0-based columns to ignore, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub drop_columns: Vec<usize>,
    /// First line is a header.
    #[arg(long)]
    pub header: bool,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    #[arg(long, default_value = "?")]
    pub missing_token: String,
    #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
    pub permutations: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn problem(shape: &Shape) -> Result<SplitProblem> {
    SplitProblem::new(shape.m, shape.n)
}

pub fn solve(shape: &Shape) -> Result<Report> {
    let pr = problem(shape)?;
    let p = optimal_p(&pr)?;
    let root = if pr.p_min() == pr.p_max() {
        None
    } else {
        Some(solve_real_root(&pr)?)
    };
    let mut r = Report::new(vec!["m", "n", "p_star", "ratio", "f_at_p_star", "real_root"]);
    r.row(vec![
        shape.m.into(),
        shape.n.into(),
        p.into(),
        (p as f64 / shape.m as f64).into(),
        integrity_f(&pr, p)?.into(),
        root.into(),
    ]);
    Ok(r)
}

pub fn curve(shape: &Shape) -> Result<Report> {
    let c = integrity_curve(&problem(shape)?)?;
    let mut r = Report::new(vec!["p", "f"]);
    for e in &c.entries {
        r.row(vec![e.p.into(), e.f.into()]);
    }
    r.summary("m", shape.m);
    r.summary("n", shape.n);
    r.summary("argmin_p", c.argmin_p);
    Ok(r)
}

pub fn asymptotic(args: &AsymptoticArgs) -> Result<Report> {
    let ms = match args.sweep {
        None => vec![args.shape.m],
        Some(hi) => {
            let lo = args.shape.m;
            if hi < lo || args.points < 2 {
                return Err(Error::Domain(format!(
                    "sweep needs M_MAX >= m and at least 2 points (m = {lo}, M_MAX = {hi}, points = {})",
                    args.points
                )));
            }
            let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
            let mut ms: Vec<u64> = (0..args.points)
                .map(|k| (a + (b - a) * k as f64 / (args.points - 1) as f64).exp().round() as u64)
                .map(|m| m.clamp(lo, hi))
                .collect();
            ms.dedup();
            ms
        }
    };
    let mut r = Report::new(vec!["m", "n", "order", "expansion", "root", "ratio"]);
    for m in ms {
        let pr = SplitProblem::new(m, args.shape.n)?;
        let approx = asymptotic_p(&pr, args.order)?;
        let root = solve_real_root(&pr)?;
        r.row(vec![
            m.into(),
            args.shape.n.into(),
            u64::from(args.order).into(),
            approx.into(),
            root.into(),
            (approx / root).into(),
        ]);
    }
    Ok(r)
}

pub fn simulate(args: &SimulateArgs) -> Result<Report> {
    let cfg = SimulationConfig::new(args.shape.m, args.shape.n, args.sigma, args.trials, args.seed);
    let result = run_integrity_simulation(&cfg)?;
    let cmp = compare(&cfg, &result)?;
    let mut r = Report::new(vec!["p", "mean_sq_dev", "std_err", "analytic_f"]);
    for (e, o) in result.per_p.iter().zip(&cmp.overlay) {
        r.row(vec![
            e.p.into(),
            e.mean_sq_dev.into(),
            e.std_err.into(),
            o.analytic_f.into(),
        ]);
    }
    r.summary("m", args.shape.m);
    r.summary("n", args.shape.n);
    r.summary("sigma", args.sigma);
    r.summary("seed", args.seed);
    r.summary("trials", args.trials);
    r.summary("skipped_trials", result.skipped_trials);
    r.summary("empirical_argmin", cmp.empirical_argmin);
    r.summary("p_star", cmp.optimal_p);
    r.summary("argmin_gap", cmp.argmin_gap());
    Ok(r)
}

pub fn moments(args: &MomentsArgs) -> Result<Report> {
    let (m, n, p) = (args.shape.m, args.shape.n, args.p);
    let params = matrix_model_params(m, n, p)?;
    let sampled = sample_moments(m, n, p, args.trials, args.seed)?;
    let mut r = Report::new(vec!["moment", "closed_form", "sampled", "rel_err", "status"]);
    let mut push = |name: &str, exact: Result<f64>, sampled: f64| -> Result<()> {
        match exact {
            Ok(e) => r.row(vec![
                name.into(),
                e.into(),
                sampled.into(),
                ((sampled - e) / e).abs().into(),
                "finite".into(),
            ]),
            Err(Error::DivergentMoment { .. }) => r.row(vec![
                name.into(),
                Cell::Empty,
                sampled.into(),
                Cell::Empty,
                "divergent".into(),
            ]),
            Err(e) => return Err(e),
        }
        Ok(())
    };
    push("inv_x", inv_moment_1(&params), sampled.inv_1)?;
    push("inv_x_sq", inv_moment_2(&params), sampled.inv_2)?;
    if let Some(cross) = sampled.inv_cross {
        push("inv_x1_x2", inv_cross_moment(&params), cross)?;
    }
    r.summary("m", m);
    r.summary("n", n);
    r.summary("p", p);
    r.summary("alpha", params.alpha());
    r.summary("beta", params.beta());
    r.summary("samples", args.trials);
    r.summary("seed", args.seed);
    Ok(r)
}

/// Returns the report and any notes about fallbacks or rank-deficient fits.
pub fn bench(args: &BenchArgs) -> Result<(Report, Vec<String>)> {
    if !args.delimiter.is_ascii() {
        return Err(Error::Domain(format!(
            "delimiter must be a single ASCII character, got '{}'",
            args.delimiter
        )));
    }
    let opts = LoadOptions {
        target_column: args.target_column,
        drop_columns: args.drop_columns.clone(),
        has_header: args.header,
        missing_token: args.missing_token.clone(),
        delimiter: args.delimiter as u8,
    };
    let data = load_dataset(&args.path, &opts)?;
    for line in &data.provenance().log {
        log::info!("{line}");
    }
    let report = bench_table(&data, args.permutations, args.seed)?;
    let mut r = Report::new(vec![
        "policy",
        "p",
        "mean_loss",
        "ratio",
        "m",
        "n",
        "permutations",
        "seed",
    ]);
    for pr in report.policies() {
        r.row(vec![
            pr.policy.name().into(),
            pr.p.into(),
            pr.loss.mean_loss.into(),
            (pr.p as f64 / report.m as f64).into(),
            report.m.into(),
            report.n.into(),
            report.permutations.into(),
            report.seed.into(),
        ]);
    }
    Ok((r, report.notes))
}
