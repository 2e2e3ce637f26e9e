//! `outbreak`: monitor count networks for team communication outbreaks.
//!
//! Exit status is 0 on success, 1 for invalid input or configuration and 2
//! for filesystem errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use outbreak::calibration::{self, CalibrationGrid, CalibrationOptions, SurrogateDocument};
use outbreak::chart::{render_chart, ChartPoint};
use outbreak::io;
use outbreak::monitor::Monitor;
use outbreak::sim::{self, Scenario};
use outbreak::surrogate::{predict_threshold, SurrogateKind, SurrogateModel};
use outbreak::{Error, Matrix, MeanModel, NetworkSeries, StatisticKind, SurveillancePlan, Team, Threshold};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "outbreak", version, about = "Surveillance of team communication outbreaks in count networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a plan over a count series and report flags.
    Monitor(MonitorArgs),
    /// Generate a synthetic series from a scenario.
    Simulate(SimulateArgs),
    /// Average time to signal after the scenario's change point.
    Ats(AtsArgs),
    /// Find the threshold that gives a target in-control ATS.
    Calibrate(CalibrateArgs),
    /// Fit or query a threshold surrogate.
    Surrogate {
        #[command(subcommand)]
        action: SurrogateAction,
    },
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct MeansSource {
    /// Per-edge means CSV with header t,src,dst,lambda.
    #[arg(long)]
    means: Option<PathBuf>,
    /// One constant mean for every pair.
    #[arg(long)]
    lambda: Option<f64>,
    /// Distance-linear means `a,b`: lambda = a|i-j| + b.
    #[arg(long, allow_hyphen_values = true)]
    dist_linear: Option<String>,
}

#[derive(Args, Debug)]
struct MonitorArgs {
    /// Count series CSV with header t,src,dst,count.
    #[arg(long)]
    series: PathBuf,
    #[command(flatten)]
    means: MeansSource,
    /// Plan JSON; the flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    stat: Option<StatisticKind>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    /// Fixed threshold h.
    #[arg(long, conflicts_with = "surrogate")]
    threshold: Option<f64>,
    /// Surrogate document JSON for adaptive or surrogate-scaled plans.
    #[arg(long)]
    surrogate: Option<PathBuf>,
    /// Comparison value under a surrogate threshold.
    #[arg(long, default_value_t = 1.0)]
    adjustment: f64,
    /// Comma-separated 1-based team members.
    #[arg(long)]
    team: Option<String>,
    /// 1-based dominant leader.
    #[arg(long)]
    leader: Option<usize>,
    /// Run the upper and lower team charts together.
    #[arg(long)]
    two_sided: bool,
    /// Threshold of the lower chart; defaults to --threshold.
    #[arg(long)]
    lower_threshold: Option<f64>,
    #[arg(long)]
    out_flags: Option<PathBuf>,
    /// SVG chart of the two-sided statistics (needs --two-sided).
    #[arg(long, requires = "two_sided")]
    out_chart: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output series CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AtsArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    /// Defaults to the plan's target ATS.
    #[arg(long)]
    target_ats: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    tol: f64,
    #[arg(long, default_value_t = calibration::DEFAULT_REPS)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Censoring horizon; defaults to 20 times the target.
    #[arg(long)]
    horizon: Option<u32>,
    /// Writes the plan with its calibrated threshold.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum SurrogateAction {
    /// Calibrate a grid and fit a surrogate to it.
    Fit {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        kind: SurrogateKind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict the threshold at (lambda, n).
    Predict {
        #[arg(long)]
        surrogate: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        n: usize,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("{}: {e}", path.display()),
    })
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("values serialise"));
}

/// Accepts a surrogate document or a bare model.
fn read_surrogate(path: &Path) -> Result<SurrogateModel, Error> {
    let value: serde_json::Value = read_json(path)?;
    if value.get("basis").is_some() {
        Ok(serde_json::from_value::<SurrogateDocument>(value)?.model())
    } else {
        Ok(serde_json::from_value(value)?)
    }
}

fn parse_team(text: &str) -> Result<Vec<usize>, Error> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| match s.parse::<usize>() {
            Ok(label) if label >= 1 => Ok(label - 1),
            _ => Err(Error::InvalidConfig(format!("invalid team member {s:?}; labels are 1-based"))),
        })
        .collect()
}

fn means_model(src: &MeansSource, series: &NetworkSeries) -> Result<MeanModel, Error> {
    if let Some(lambda) = src.lambda {
        Ok(MeanModel::Homogeneous { lambda })
    } else if let Some(text) = &src.dist_linear {
        io::parse_dist_linear(text)
    } else {
        let path = src.means.as_ref().expect("clap requires one source");
        io::parse_means(path, series.n())
    }
}

fn build_plan(args: &MonitorArgs) -> Result<SurveillancePlan, Error> {
    let mut plan = match &args.config {
        Some(path) => read_json::<SurveillancePlan>(path)?,
        None => SurveillancePlan::new(
            args.stat.unwrap_or(StatisticKind::Gewma),
            Threshold::Fixed(args.threshold.unwrap_or(0.0)),
        ),
    };
    if let Some(stat) = args.stat {
        plan.statistic = stat;
    }
    if let Some(alpha) = args.alpha {
        plan.alpha = alpha;
    }
    if args.k.is_some() {
        plan.k = args.k;
    }
    if let Some(h) = args.threshold {
        plan.threshold = Threshold::Fixed(h);
    }
    if let Some(path) = &args.surrogate {
        plan.threshold = Threshold::Surrogate {
            model: read_surrogate(path)?,
            adjustment: args.adjustment,
        };
    }
    let members = args.team.as_deref().map(parse_team).transpose()?;
    match (args.leader, members) {
        (Some(label), members) => {
            let leader = label
                .checked_sub(1)
                .ok_or_else(|| Error::InvalidConfig("leader labels are 1-based".into()))?;
            plan.team = Some(Team::with_leader(leader, members.unwrap_or_default())?);
        }
        (None, Some(members)) => plan.team = Some(Team::new(members)),
        (None, None) => {}
    }
    plan.validate()?;
    Ok(plan)
}

fn monitor(args: MonitorArgs) -> Result<(), Error> {
    let series = io::parse_series(&args.series)?;
    let means = means_model(&args.means, &series)?;
    outbreak::types::validate_series(&series, &means)?;
    let plan = build_plan(&args)?;

    let mut upper = Monitor::new(plan.clone())?;
    let mut lower = if args.two_sided {
        if !matches!(plan.statistic, StatisticKind::Gewma | StatisticKind::LGewma) {
            return Err(Error::InvalidConfig("--two-sided pairs GEWMA with L-GEWMA on a known team".into()));
        }
        let h_lower = args.lower_threshold.unwrap_or(plan.threshold.value());
        let mut lower_plan = plan.clone();
        lower_plan.statistic = StatisticKind::LGewma;
        lower_plan.threshold = Threshold::Fixed(h_lower);
        let mut upper_plan = plan.clone();
        upper_plan.statistic = StatisticKind::Gewma;
        upper = Monitor::new(upper_plan)?;
        Some(Monitor::new(lower_plan)?)
    } else {
        None
    };

    let mut events = Vec::new();
    let mut chart = Vec::new();
    let mut flagged_steps = Vec::new();
    let mut lambda = Matrix::filled(series.n(), 0.0);
    for snap in series.snapshots() {
        means.fill(snap.t, &mut lambda);
        let up = upper.observe(snap, &lambda)?;
        let mut any = up.flagged;
        events.extend(up.events);
        if let Some(low) = lower.as_mut() {
            let obs = low.observe(snap, &lambda)?;
            any |= obs.flagged;
            events.extend(obs.events);
            let (u, l) = (upper.statistic(), low.statistic());
            chart.push(ChartPoint::from_rules(
                snap.t,
                u.value,
                l.value,
                u.mu,
                upper.plan().threshold.value(),
                low.plan().threshold.value(),
            ));
        }
        if any {
            flagged_steps.push(snap.t);
        }
    }
    if let Some(path) = &args.out_flags {
        io::write_flags(&events, path)?;
    }
    if let Some(path) = &args.out_chart {
        render_chart(&chart, path)?;
    }
    print_json(&json!({
        "statistic": plan.statistic.name(),
        "steps": series.len(),
        "flagged_steps": flagged_steps.len(),
        "first_flag": flagged_steps.first(),
        "events": events.len(),
        "flagged_events": events.iter().filter(|e| e.flagged).count(),
    }));
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), Error> {
    let mut scenario: Scenario = read_json(&args.scenario)?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let series = sim::simulate_series(&scenario)?;
    match &args.out {
        Some(path) => io::write_series(&series, path),
        None => io::write_series_to(&series, std::io::stdout().lock()),
    }
}

fn ats(args: AtsArgs) -> Result<(), Error> {
    let scenario: Scenario = read_json(&args.scenario)?;
    let plan: SurveillancePlan = read_json(&args.plan)?;
    let report = sim::run_ats_experiment(&scenario, &plan, args.reps, args.seed)?;
    print_json(&serde_json::to_value(report)?);
    Ok(())
}

fn calibrate(args: CalibrateArgs) -> Result<(), Error> {
    let scenario: Scenario = read_json(&args.scenario)?;
    let plan: SurveillancePlan = read_json(&args.plan)?;
    let opts = CalibrationOptions {
        target_ats: args.target_ats.unwrap_or(plan.target_ats),
        tol_frac: args.tol,
        reps: args.reps,
        horizon: args.horizon,
        seed: args.seed,
    };
    let cal = calibration::calibrate(&plan, &scenario, &opts)?;
    if let Some(path) = &args.out {
        let mut tuned = plan.clone().with_threshold_value(cal.threshold);
        tuned.target_ats = opts.target_ats;
        write_json(&tuned, path)?;
    }
    print_json(&serde_json::to_value(&cal)?);
    Ok(())
}

fn surrogate(action: SurrogateAction) -> Result<(), Error> {
    match action {
        SurrogateAction::Fit { grid, kind, out } => {
            let grid: CalibrationGrid = read_json(&grid)?;
            let (doc, points) = calibration::fit_grid(&grid, kind)?;
            if let Some(path) = &out {
                write_json(&doc, path)?;
            }
            print_json(&json!({
                "kind": doc.kind,
                "diagnostics": doc.diagnostics,
                "points": points,
            }));
        }
        SurrogateAction::Predict { surrogate, lambda, n } => {
            let model = read_surrogate(&surrogate)?;
            let h = predict_threshold(&model, lambda, n)?;
            if !model.contains(lambda, n) {
                eprintln!("warning: (lambda={lambda}, n={n}) lies outside the fitted range");
            }
            print_json(&json!({ "lambda": lambda, "n": n, "threshold": h }));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Monitor(args) => monitor(args),
        Command::Simulate(args) => simulate(args),
        Command::Ats(args) => ats(args),
        Command::Calibrate(args) => calibrate(args),
        Command::Surrogate { action } => surrogate(action),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn team_labels_are_one_based() {
        assert_eq!(parse_team("1, 3,2").unwrap(), vec![0, 2, 1]);
        assert!(parse_team("0,1").is_err());
        assert!(parse_team("a").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
