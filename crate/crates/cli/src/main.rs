use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fused_gait::pose_spaces::{
    abstract_to_inverse, abstract_to_joint, inverse_to_abstract, inverse_to_joint, joint_to_abstract, joint_to_inverse,
    PoseValues,
};
use fused_gait::sim_harness::run_scenario;
use fused_gait::tuning::{simulate_closed_loop, tune};
use fused_gait::{AbstractPose, Error, InversePose, JointPose, KinematicConfig, SimConfig};

#[derive(Parser)]
#[command(name = "fused-gait", version, about = "Fused angle gait control: scenarios, LQR tuning and pose conversion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a closed loop scenario and write its per-tick CSV log.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute LQR state feedback and the equivalent PD gains for the
    /// sagittal model of the `[tuning]` section.
    Tune {
        #[arg(long)]
        config: PathBuf,
        /// Optional CSV of the closed loop response to a pitch disturbance.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Size of the simulated pitch disturbance (rad).
        #[arg(long, default_value_t = 0.1)]
        disturbance: f64,
    },
    /// Convert poses between spaces. Reads a CSV with a header row from
    /// `--input` or stdin and writes CSV to stdout.
    Pose {
        #[arg(long, value_enum)]
        from: Space,
        #[arg(long, value_enum)]
        to: Space,
        /// Config file whose `[kinematics]` section sets the link lengths.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Space {
    Joint,
    Abstract,
    Inverse,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Parameter(_) | Error::Io(_) => 2,
        Error::Numeric(_) | Error::Unreachable { .. } | Error::State(_) | Error::Model(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, out } => simulate(&config, &out),
        Command::Tune { config, out, disturbance } => tune_cmd(&config, out.as_deref(), disturbance),
        Command::Pose { from, to, config, input } => pose(from, to, config.as_deref(), input.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn simulate(config: &Path, out: &Path) -> Result<(), Error> {
    let cfg = SimConfig::from_file(config)?;
    let log = run_scenario(&cfg)?;
    log.write_csv(create(out)?)?;
    let fall = log.fall_time.map_or("no".to_string(), |t| format!("at t = {t:.3} s"));
    println!("scenario `{}`: {} rows written to {}, fall {fall}", cfg.scenario.name, log.rows.len(), out.display());
    Ok(())
}

fn tune_cmd(config: &Path, out: Option<&Path>, disturbance: f64) -> Result<(), Error> {
    let cfg = SimConfig::from_file(config)?;
    let report = tune(&cfg.tuning)?;
    println!("Q = diag({:.6e}, {:.6e}), R = {:.6e}", report.weights.q[0][0], report.weights.q[1][1], report.weights.r);
    println!("K = [{:.9e}, {:.9e}]", report.lqr.k[0], report.lqr.k[1]);
    println!("K_p = {:.9e}, K_d = {:.9e}", report.kp, report.kd);
    let poles = |p: &[fused_gait::tuning::Complex<f64>; 2]| p.iter().map(|c| format!("{:.6}{:+.6}i", c.re, c.im)).collect::<Vec<_>>().join(", ");
    println!("open loop poles: {}", poles(&report.open_loop_poles));
    println!("closed loop poles: {}", poles(&report.lqr.closed_loop_poles));
    println!("CARE residual: {:.3e}", report.lqr.residual);

    if let Some(path) = out {
        let m = &cfg.tuning.model;
        let n2 = m.c[0] * m.c[0] + m.c[1] * m.c[1];
        if n2 == 0.0 {
            return Err(Error::Numeric("output matrix is zero; no pitch disturbance direction".into()));
        }
        let x0 = [disturbance * m.c[0] / n2, disturbance * m.c[1] / n2];
        let dt = 0.001;
        let states = simulate_closed_loop(m, &report.lqr.k, x0, dt, 2000)?;
        let mut w = csv::Writer::from_writer(create(path)?);
        w.write_record(["time", "x1", "x2", "y", "u"]).map_err(Error::from)?;
        for (i, x) in states.iter().enumerate() {
            let y = m.c[0] * x[0] + m.c[1] * x[1];
            let u = -(report.lqr.k[0] * x[0] + report.lqr.k[1] * x[1]);
            w.write_record([i as f64 * dt, x[0], x[1], y, u].map(|v| format!("{v:.8e}"))).map_err(Error::from)?;
        }
        w.flush()?;
    }
    Ok(())
}

enum AnyPose {
    Joint(JointPose),
    Abstract(AbstractPose),
    Inverse(InversePose),
}

fn columns(space: Space) -> Vec<String> {
    match space {
        Space::Joint => JointPose::columns(),
        Space::Abstract => AbstractPose::columns(),
        Space::Inverse => InversePose::columns(),
    }
}

fn convert(p: AnyPose, to: Space, k: &KinematicConfig) -> Result<AnyPose, Error> {
    Ok(match (p, to) {
        (AnyPose::Joint(q), Space::Joint) => AnyPose::Joint(q),
        (AnyPose::Joint(q), Space::Abstract) => AnyPose::Abstract(joint_to_abstract(&q)),
        (AnyPose::Joint(q), Space::Inverse) => AnyPose::Inverse(joint_to_inverse(&q, k)),
        (AnyPose::Abstract(a), Space::Joint) => AnyPose::Joint(abstract_to_joint(&a)?),
        (AnyPose::Abstract(a), Space::Abstract) => AnyPose::Abstract(a),
        (AnyPose::Abstract(a), Space::Inverse) => AnyPose::Inverse(abstract_to_inverse(&a, k)?),
        (AnyPose::Inverse(p), Space::Joint) => AnyPose::Joint(inverse_to_joint(&p, k)?),
        (AnyPose::Inverse(p), Space::Abstract) => AnyPose::Abstract(inverse_to_abstract(&p, k)?),
        (AnyPose::Inverse(p), Space::Inverse) => AnyPose::Inverse(p),
    })
}

fn pose(from: Space, to: Space, config: Option<&Path>, input: Option<&Path>) -> Result<(), Error> {
    let kin = match config {
        Some(path) => SimConfig::from_file(path)?.kinematics,
        None => KinematicConfig::default(),
    };
    let mut text = String::new();
    match input {
        Some(path) => File::open(path).and_then(|mut f| f.read_to_string(&mut text)),
        None => io::stdin().read_to_string(&mut text),
    }
    .map_err(|e| Error::Io(e.to_string()))?;

    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().map_err(Error::from)?.iter().map(String::from).collect();
    let expected = columns(from);
    if header != expected {
        return Err(Error::Config { line: Some(1), message: format!("header must be: {}", expected.join(",")) });
    }
    let stdout = io::stdout();
    let mut w = csv::Writer::from_writer(stdout.lock());
    w.write_record(columns(to)).map_err(Error::from)?;
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(Error::from)?;
        let values = record
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| Error::Config { line: Some(line), message: format!("`{s}`: {e}") }))
            .collect::<Result<Vec<_>, _>>()?;
        let parsed = match from {
            Space::Joint => JointPose::from_values(&values).map(AnyPose::Joint),
            Space::Abstract => AbstractPose::from_values(&values).map(AnyPose::Abstract),
            Space::Inverse => InversePose::from_values(&values).map(AnyPose::Inverse),
        }
        .map_err(|e| Error::Config { line: Some(line), message: e.to_string() })?;
        let out = match convert(parsed, to, &kin)? {
            AnyPose::Joint(p) => p.to_values(),
            AnyPose::Abstract(p) => p.to_values(),
            AnyPose::Inverse(p) => p.to_values(),
        };
        w.write_record(out.iter().map(|v| format!("{v:.8e}"))).map_err(Error::from)?;
    }
    w.flush()?;
    io::stdout().flush()?;
    Ok(())
}
