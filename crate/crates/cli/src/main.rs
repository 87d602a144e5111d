use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use nosmc::gains::{design_gains, predict_switch_errors, validate_conditions};
use nosmc::plant::uav::CHANNELS;
use nosmc::scenario::{find, registry, ControllerKind, RunOutput, ScenarioSpec, System};
use nosmc::sim::{metrics_report, write_events, write_trace, MetricsReport, Trace};
use nosmc::sliding::ErrorState;
use nosmc::sweep::{monte_carlo, run_sweep, MonteCarloConfig, SweepParam, DEFAULT_MAX_CELLS, SWEEP_PARAMS};

#[derive(Parser)]
#[command(name = "nosmc", version, about = "Non-overshooting sliding mode control simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in scenarios.
    List,
    /// Run the gain pipeline on a scenario's initial errors and print every step.
    Gains(GainsArgs),
    /// Simulate a scenario and write trace, events and metrics.
    Simulate(SimulateArgs),
    /// Run a parameter grid, or the randomized non-overshoot suite.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Controller {
    Ideal,
    Smooth,
    Pid,
    Pi,
}

impl From<Controller> for ControllerKind {
    fn from(c: Controller) -> Self {
        match c {
            Controller::Ideal => ControllerKind::Ideal,
            Controller::Smooth => ControllerKind::Smooth,
            Controller::Pid => ControllerKind::Pid,
            Controller::Pi => ControllerKind::Pi,
        }
    }
}

#[derive(Args)]
struct ScenarioArgs {
    /// Registry name (see `list`).
    #[arg(value_name = "NAME")]
    name: Option<String>,
    #[arg(long, conflicts_with = "name")]
    scenario: Option<String>,
    /// Scenario file in TOML; flags override its values.
    #[arg(long, conflicts_with_all = ["name", "scenario"])]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long, value_enum)]
    controller: Option<Controller>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<ScenarioSpec> {
        let mut spec = match (&self.config, self.name.as_ref().or(self.scenario.as_ref())) {
            (Some(path), _) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                ScenarioSpec::from_toml(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            (None, Some(name)) => find(name)?,
            (None, None) => bail!("give a scenario name, --scenario or --config"),
        };
        if let Some(s) = self.seed {
            spec.sim.seed = s;
        }
        if let Some(dt) = self.dt {
            spec.sim.dt = dt;
        }
        if let Some(t) = self.t_end {
            spec.sim.t_end = t;
        }
        if let Some(c) = self.controller {
            spec.controller = c.into();
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args)]
struct GainsArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Initial e1; defaults to the scenario's.
    #[arg(long, allow_hyphen_values = true)]
    e1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    e2: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Output directory; defaults to `out/<scenario>`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Exit with status 2 if any overshoot verdict fires.
    #[arg(long)]
    assert_no_overshoot: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// `name=v1,v2,...`; repeat for a Cartesian grid.
    #[arg(long = "param", value_name = "NAME=VALUES")]
    params: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_MAX_CELLS)]
    max_cells: usize,
    /// Run the randomized non-overshoot suite instead of a grid.
    #[arg(long, conflicts_with = "params")]
    monte_carlo: bool,
    /// Runs per controller mode in the randomized suite.
    #[arg(long, default_value_t = 200)]
    runs: usize,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    assert_no_overshoot: bool,
}

enum Outcome {
    Ok,
    AssertionFailed(String),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::List => list(),
        Command::Gains(a) => gains(&a),
        Command::Simulate(a) => simulate(&a),
        Command::Sweep(a) => sweep(&a),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::AssertionFailed(msg)) => {
            eprintln!("assertion failed: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn list() -> Result<Outcome> {
    for s in registry() {
        println!("{:<16} {:<7} {}", s.name, format!("{:?}", s.controller).to_lowercase(), s.description);
    }
    Ok(Outcome::Ok)
}

fn gains(a: &GainsArgs) -> Result<Outcome> {
    let spec = a.scenario.load()?;
    let System::DoubleIntegrator(sys) = &spec.system else {
        bail!("`gains` needs a double-integrator scenario");
    };
    let sl = sys.sliding.as_ref().context("scenario has no sliding controller")?;
    let r0 = sys.reference.eval(0.0);
    let e1 = a.e1.unwrap_or(r0[0] - sys.x0[0]);
    let e2 = a.e2.unwrap_or(r0[1] - sys.x0[1]);
    let smoothing = spec.controller.smoothing().unwrap_or(nosmc::control::Smoothing::Tanh);
    let ctrl = sl.build(ErrorState::new(e1, e2), smoothing)?;
    let reach = ctrl.reach;
    let cfg = sl.config;
    println!("scenario        {}", spec.name);
    println!("initial errors  e1 = {e1}, e2 = {e2}");
    println!("config          Ld = {}, k2M = {}, rho_c0 = {}, rho0 = {}", cfg.ld, cfg.k2_max, cfg.rho_c0, cfg.rho0);
    println!("reaching        e1c = {}, e2c = {}, kc = {}, rho_c = {:.4}", reach.e1c, reach.e2c, reach.kc, reach.rho_c);
    let sw = predict_switch_errors(e1, e2, &reach);
    println!("switch errors   e1 = {}, e2 = {}", sw.e1, sw.e2);
    let d = design_gains(sw, &reach, &cfg)?;
    println!("zone            {}", d.zone);
    println!("k1              {:.4} (before floor {:.4})", d.gains.k1, d.k1_raw);
    println!("k2              {:.4}", d.gains.k2);
    println!("e2max           {:.4}", d.e2max);
    println!("rho             {:.4}", d.gains.rho);
    let rep = validate_conditions(&d.gains, sw, &cfg);
    println!("conditions");
    for c in &rep.conditions {
        println!(
            "  {:<34} {:<9} slack {:>12.4e}  {}",
            c.name,
            format!("{:?}", c.group),
            c.slack,
            if c.pass { "ok" } else { "FAIL" }
        );
    }
    if !rep.all_pass() {
        bail!("gains violate the design conditions");
    }
    Ok(Outcome::Ok)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn out_dir(given: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    let dir = given.clone().unwrap_or_else(|| Path::new("out").join(name));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write_channel(dir: &Path, stem: &str, tr: &Trace, extended: bool) -> Result<()> {
    write_trace(tr, create(&dir.join(format!("{stem}.csv")))?, extended)?;
    let events = if stem == "trace" { "events.csv".to_string() } else { format!("{stem}_events.csv") };
    write_events(tr, create(&dir.join(events))?)?;
    Ok(())
}

#[derive(Serialize)]
struct ChannelSummary<'a> {
    channel: &'a str,
    #[serde(flatten)]
    metrics: MetricsReport,
}

fn simulate(a: &SimulateArgs) -> Result<Outcome> {
    let spec = a.scenario.load()?;
    let dir = out_dir(&a.out_dir, &spec.name)?;
    let tol = spec.sim.event_tolerance;
    let header = json!({
        "scenario": spec.name,
        "controller": spec.controller,
        "seed": spec.sim.seed,
        "dt": spec.sim.dt,
        "t_end": spec.sim.t_end,
        "overshoot_tolerance": tol,
    });
    let (summary, overshoots) = match spec.run()? {
        RunOutput::Scalar(tr) => {
            write_channel(&dir, "trace", &tr, false)?;
            let m = metrics_report(&tr, tol);
            let os: Vec<String> =
                m.overshoot.iter().map(|o| format!("e1 overshoot {:.4e} at t = {}", o.magnitude, o.t)).collect();
            let mut v = header;
            v["metrics"] = serde_json::to_value(m)?;
            v["gain_updates"] = serde_json::to_value(&tr.gain_log)?;
            (v, os)
        }
        RunOutput::Uav(tr) => {
            let mut channels = Vec::new();
            let mut os = Vec::new();
            for c in CHANNELS {
                let ch = tr.channel(c);
                write_channel(&dir, c.name(), ch, true)?;
                let m = metrics_report(ch, tol);
                if let (true, Some(o)) = (c.is_position(), m.overshoot) {
                    os.push(format!("{} overshoot {:.4e} at t = {}", c.name(), o.magnitude, o.t));
                }
                channels.push(ChannelSummary { channel: c.name(), metrics: m });
            }
            let mut v = header;
            v["channels"] = serde_json::to_value(channels)?;
            v["infeasible_thrust_steps"] = tr.infeasible_thrust_steps.into();
            v["min_rotor_force"] = tr.min_rotor_force.into();
            v["max_rotor_force"] = tr.max_rotor_force.into();
            (v, os)
        }
    };
    serde_json::to_writer_pretty(create(&dir.join("metrics.json"))?, &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    eprintln!("wrote {}", dir.display());
    if a.assert_no_overshoot && !overshoots.is_empty() {
        return Ok(Outcome::AssertionFailed(overshoots.join("; ")));
    }
    Ok(Outcome::Ok)
}

fn parse_param(text: &str) -> Result<SweepParam> {
    let (name, values) = text.split_once('=').with_context(|| format!("`{text}` is not NAME=VALUES"))?;
    let name = name.trim();
    if !SWEEP_PARAMS.contains(&name) {
        bail!("unknown sweep parameter `{name}`; known: {}", SWEEP_PARAMS.join(", "));
    }
    let values = values
        .split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad value `{v}` for {name}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepParam { name: name.to_string(), values })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn sweep(a: &SweepArgs) -> Result<Outcome> {
    if a.monte_carlo {
        return sweep_monte_carlo(a);
    }
    let spec = a.scenario.load()?;
    let params = a.params.iter().map(|p| parse_param(p)).collect::<Result<Vec<_>>>()?;
    if params.is_empty() {
        bail!("give at least one --param NAME=VALUES");
    }
    let rows = run_sweep(&spec, &params, a.max_cells)?;
    let dir = out_dir(&a.out_dir, &format!("{}-sweep", spec.name))?;
    let path = dir.join("sweep.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    let mut header: Vec<String> = params.iter().map(|p| p.name.clone()).collect();
    header.extend(
        [
            "overshoot",
            "overshoot_magnitude",
            "tc",
            "surface_hit",
            "settling_time",
            "sse1",
            "sse2",
            "chattering",
            "error",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    let mut failures = Vec::new();
    for r in &rows {
        let mut rec: Vec<String> = r.values.iter().map(|v| v.to_string()).collect();
        match (&r.metrics, &r.error) {
            (Some(m), _) => {
                if m.overshoot.is_some() {
                    failures.push(format!("{:?}", r.values));
                }
                rec.extend([
                    m.overshoot.is_some().to_string(),
                    opt(m.overshoot.map(|o| o.magnitude)),
                    opt(m.tc),
                    opt(m.surface_hit),
                    opt(m.settling_time_measured),
                    m.sse1.to_string(),
                    m.sse2.to_string(),
                    m.chattering_index.to_string(),
                    String::new(),
                ]);
            }
            (None, err) => {
                rec.extend(std::iter::repeat_n(String::new(), 8));
                rec.push(err.clone().unwrap_or_default());
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    let errors = rows.iter().filter(|r| r.error.is_some()).count();
    println!("{} cells, {} with overshoot, {errors} failed; wrote {}", rows.len(), failures.len(), path.display());
    if a.assert_no_overshoot && !failures.is_empty() {
        return Ok(Outcome::AssertionFailed(format!("overshoot in cells {}", failures.join(", "))));
    }
    Ok(Outcome::Ok)
}

fn sweep_monte_carlo(a: &SweepArgs) -> Result<Outcome> {
    let modes: Vec<ControllerKind> = match a.scenario.controller {
        None => vec![ControllerKind::Ideal, ControllerKind::Smooth],
        Some(c @ (Controller::Ideal | Controller::Smooth)) => vec![c.into()],
        Some(_) => bail!("the randomized suite runs the sliding controllers only"),
    };
    let dir = out_dir(&a.out_dir, "monte-carlo")?;
    let path = dir.join("monte_carlo.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record([
        "mode",
        "index",
        "e1_0",
        "e2_0",
        "kc",
        "dt",
        "t_end",
        "overshoot",
        "overshoot_magnitude",
        "final_e1",
        "error",
        "pass",
    ])?;
    let mut failed = Vec::new();
    for mode in modes {
        let mut cfg = MonteCarloConfig::nominal(mode.smoothing().unwrap());
        cfg.runs = a.runs;
        if let Some(s) = a.scenario.seed {
            cfg.seed = s;
        }
        if let Some(dt) = a.scenario.dt {
            cfg.dt = dt;
        }
        let runs = monte_carlo(&cfg);
        let name = format!("{mode:?}").to_lowercase();
        let mut pass = 0;
        for r in &runs {
            pass += r.passed() as usize;
            if !r.passed() {
                failed.push(format!("{name}#{}", r.index));
            }
            w.write_record([
                name.clone(),
                r.index.to_string(),
                r.e1_0.to_string(),
                r.e2_0.to_string(),
                r.kc.to_string(),
                r.dt.to_string(),
                r.t_end.to_string(),
                r.overshoot.is_some().to_string(),
                opt(r.overshoot.map(|o| o.magnitude)),
                r.final_e1.to_string(),
                r.error.clone().unwrap_or_default(),
                r.passed().to_string(),
            ])?;
        }
        println!("{name}: {pass}/{} runs without overshoot", runs.len());
    }
    w.flush()?;
    println!("wrote {}", path.display());
    if a.assert_no_overshoot && !failed.is_empty() {
        return Ok(Outcome::AssertionFailed(format!("failing runs {}", failed.join(", "))));
    }
    Ok(Outcome::Ok)
}
