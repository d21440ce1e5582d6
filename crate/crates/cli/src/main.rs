//! `quitpath` command-line front end.
//!
//! Exit codes: 0 on success, 1 on unreadable or malformed input, 2 when a
//! check fails (Q counterexample, uncertified path, synthesis failure). Errors
//! are reported on stderr as one JSON object.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use quitpath::discretize::{discretize_with, verify_bound, GridMode};
use quitpath::io;
use quitpath::lcp::{principal_minors_q, QConfig, QStatus};
use quitpath::path::{certify, to_csv, AbsorptionPath, CertReport};
use quitpath::scalar::{format_rational, parse_rational};
use quitpath::strategy::{self, BehaviorProfile};
use quitpath::synthesis::{synthesize, SynthesisConfig, SynthesisResult};
use quitpath::{QuittingGame, Rational, Scalar};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;

const SEED_VAR: &str = "QUITPATH_SEED";

#[derive(Parser)]
#[command(name = "quitpath", version, about = "Absorption paths and continuous equilibria of quitting games")]
struct Cli {
    /// JSON run configuration: {"seed": .., "tolerances": {name: value}}.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for sampled checks and simulation (QUITPATH_SEED takes precedence).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sampled Q-matrix test of every principal minor of the quit matrix.
    Analyze {
        #[arg(long)]
        game: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Build a certified continuous equilibrium path.
    Synthesize {
        #[arg(long)]
        game: PathBuf,
        /// Terminal payoff of the backward construction, e.g. "0,1,0" or "0,47/8,0".
        #[arg(long)]
        start: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check sequential epsilon-perfectness of a path or a profile.
    Certify {
        #[arg(long)]
        game: PathBuf,
        #[command(flatten)]
        input: Subject,
        #[arg(long, default_value = "0")]
        eps: String,
    },
    /// Turn a path into a behavior profile on the 1/k grid.
    Discretize {
        #[arg(long)]
        path: PathBuf,
        #[arg(short = 'k', long)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
        /// Print the distance bound report.
        #[arg(long)]
        report: bool,
        /// Equal steps inside each block instead of the inductive grid.
        #[arg(long)]
        aligned: bool,
    },
    /// Monte Carlo play of a profile next to its exact payoff.
    Simulate {
        #[arg(long)]
        game: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        runs: usize,
        #[arg(long, default_value_t = 100_000)]
        max_stages: usize,
    },
    /// Expected payoff of a profile, or the payoff path of a path at `t`.
    Payoff {
        #[arg(long)]
        game: PathBuf,
        #[command(flatten)]
        input: Subject,
        #[arg(long, default_value = "0")]
        t: String,
    },
    /// CSV of pi_t and gamma_t on an even grid of [0, 1).
    Export {
        #[arg(long)]
        path: PathBuf,
        /// Adds the payoff path columns.
        #[arg(long)]
        game: Option<PathBuf>,
        #[arg(long, default_value_t = 512)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Subject {
    #[arg(long)]
    path: Option<PathBuf>,
    #[arg(long)]
    profile: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    seed: Option<u64>,
    #[serde(default)]
    tolerances: BTreeMap<String, f64>,
}

/// Settings shared by all subcommands.
#[derive(Debug)]
struct RunConfig {
    seed: u64,
    /// `cert` (synthesis certification slack) and `equilibrium` (best-response slack).
    tolerances: BTreeMap<String, f64>,
}

impl RunConfig {
    fn load(cli: &Cli) -> Result<Self, Failure> {
        let file: ConfigFile = match &cli.config {
            Some(p) => serde_json::from_str(&read(p)?).map_err(|e| Failure::input(format!("{}: {e}", p.display())))?,
            None => ConfigFile::default(),
        };
        let env_seed = match std::env::var(SEED_VAR) {
            Ok(v) => Some(v.trim().parse::<u64>().map_err(|_| Failure::input(format!("{SEED_VAR} is not an integer")))?),
            Err(_) => None,
        };
        let mut tolerances = BTreeMap::from([("cert".to_string(), 1e-9), ("equilibrium".to_string(), 1e-12)]);
        for (name, v) in file.tolerances {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Failure::input(format!("tolerance {name} must be positive")));
            }
            tolerances.insert(name, v);
        }
        Ok(RunConfig { seed: env_seed.or(cli.seed).or(file.seed).unwrap_or(0), tolerances })
    }

    fn tol(&self, name: &str) -> f64 {
        self.tolerances[name]
    }
}

#[derive(Debug)]
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure { code: 1, kind: "input", message: message.into() }
    }

    fn check(message: impl Into<String>) -> Self {
        Failure { code: 2, kind: "check_failed", message: message.into() }
    }
}

impl From<quitpath::Error> for Failure {
    fn from(e: quitpath::Error) -> Self {
        use quitpath::Error::*;
        let (code, kind) = match &e {
            Format(_) | InvalidGame(_) | InvalidPath(_) | InvalidProfile(_) => (1, "input"),
            _ => (2, "computation"),
        };
        Failure { code, kind, message: e.to_string() }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure { code: 1, kind: "io", message: format!("{}: {e}", path.display()) })
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure { code: 1, kind: "io", message: format!("{}: {e}", path.display()) })
}

fn load_game<S: Scalar>(path: &Path) -> Result<QuittingGame<S>, Failure> {
    Ok(io::game_from_json(&read(path)?)?)
}

fn load_path(path: &Path) -> Result<AbsorptionPath<Rational>, Failure> {
    Ok(io::path_from_json(&read(path)?)?)
}

fn load_profile(path: &Path) -> Result<BehaviorProfile, Failure> {
    Ok(io::profile_from_json(&read(path)?)?)
}

fn rational_arg(text: &str, what: &str) -> Result<Rational, Failure> {
    parse_rational(text).ok_or_else(|| Failure::input(format!("{what}: cannot parse {text:?}")))
}

fn fmt_vec(v: &[Rational]) -> String {
    v.iter().map(format_rational).collect::<Vec<_>>().join(", ")
}

fn cert_lines<S: Scalar>(report: &CertReport<S>) -> String {
    let mut out = String::new();
    for p in &report.players {
        let worst = match (&p.worst_t, p.worst_condition) {
            (Some(t), Some(c)) => format!("t = {t} ({})", serde_json::to_value(c).unwrap().as_str().unwrap()),
            _ => "-".into(),
        };
        let verdict = if p.perfect { "ok" } else { "FAIL" };
        let _ = writeln!(out, "player {}  {verdict}  required_eps {}  worst {worst}", p.player + 1, p.required_eps);
    }
    let worst = report.players.iter().fold(&report.players[0], |w, p| if p.required_eps > w.required_eps { p } else { w });
    let _ = writeln!(out, "eps {}  required {}  worst player {}", report.eps, report.required_eps(), worst.player + 1);
    out
}

fn synthesis_summary(res: &SynthesisResult) -> String {
    let mut out = format!("start ({})\n", fmt_vec(&res.start));
    let blocks = res.summary();
    for (label, in_cycle) in [("prefix", false), ("cycle", true)] {
        let items: Vec<String> = blocks
            .iter()
            .filter(|b| b.in_cycle == in_cycle)
            .map(|b| {
                let players = b.players.iter().map(usize::to_string).collect::<Vec<_>>().join("+");
                format!("({players}, {})", b.rho_exact)
            })
            .collect();
        if !items.is_empty() {
            let _ = writeln!(out, "{label}: {}", items.join(" "));
        }
    }
    if let Some(c) = &res.certificate {
        let _ = writeln!(out, "cycle payoff ({})  exact {}  residual {:e}", fmt_vec(&c.gamma), c.exact, c.residual);
    }
    let _ = writeln!(out, "events {}  backtracks {}", res.events, res.backtracks);
    out + &cert_lines(&res.report)
}

fn run(cli: Cli) -> Result<String, Failure> {
    let cfg = RunConfig::load(&cli)?;
    match cli.command {
        Command::Analyze { game, samples } => {
            let g = load_game::<Rational>(&game)?.normalize();
            let qcfg = QConfig { seed: cfg.seed, samples };
            let mut out = String::from("minor\tverdict\tsamples\n");
            let mut counterexamples = Vec::new();
            for (idx, verdict) in principal_minors_q(&g.quit_matrix(), &qcfg) {
                let set = idx.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(",");
                match &verdict.status {
                    QStatus::NoCounterexampleFound { samples } => {
                        let _ = writeln!(out, "{{{set}}}\tpass\t{samples}");
                    }
                    QStatus::Counterexample { q } => {
                        let _ = writeln!(out, "{{{set}}}\tcounterexample\t-");
                        counterexamples.push(json!({ "minor": idx.iter().map(|i| i + 1).collect::<Vec<_>>(), "q": q }));
                    }
                }
            }
            for c in &counterexamples {
                let _ = writeln!(out, "{c}");
            }
            if counterexamples.is_empty() {
                Ok(out)
            } else {
                print!("{out}");
                Err(Failure::check(format!("{} principal minors are not Q-matrices", counterexamples.len())))
            }
        }
        Command::Synthesize { game, start, out } => {
            let g = load_game::<Rational>(&game)?;
            let g = if g.is_normalized() { g } else { g.normalize() };
            let start = start
                .map(|s| s.split(',').map(|v| rational_arg(v, "start")).collect::<Result<Vec<_>, _>>())
                .transpose()?;
            let scfg = SynthesisConfig { cert_tol: cfg.tol("cert"), q_check: Some(QConfig { seed: cfg.seed, samples: 1000 }), ..SynthesisConfig::default() };
            let res = synthesize(&g, start.as_deref(), &scfg)?;
            write(&out, &io::path_to_json(&res.path))?;
            Ok(synthesis_summary(&res))
        }
        Command::Certify { game, input, eps } => {
            if let Some(p) = input.path {
                let g = load_game::<Rational>(&game)?;
                let report = certify(&g, &load_path(&p)?, &rational_arg(&eps, "eps")?)?;
                let text = cert_lines(&report);
                if report.perfect() {
                    Ok(text)
                } else {
                    print!("{text}");
                    Err(Failure::check(format!("not sequentially {eps}-perfect")))
                }
            } else {
                let g = load_game::<f64>(&game)?;
                let x = load_profile(input.profile.as_deref().expect("clap enforces one input"))?;
                let eps = rational_arg(&eps, "eps")?.to_f64();
                let mut out = String::new();
                let mut perfect = true;
                for i in 0..g.n() {
                    let v = strategy::is_seq_eps_perfect_profile(&g, &x, i, eps);
                    perfect &= v.perfect;
                    let verdict = if v.perfect { "ok" } else { "FAIL" };
                    let _ = writeln!(out, "player {}  {verdict}  required_eps {:e}  worst stage {}", i + 1, v.required_eps, v.worst_stage);
                }
                let eq = strategy::is_eps_equilibrium(&g, &x, eps, cfg.tol("equilibrium"));
                let _ = writeln!(out, "equilibrium gains {:?}  required eps {:e}", eq.gains, eq.required_eps());
                if perfect {
                    Ok(out)
                } else {
                    print!("{out}");
                    Err(Failure::check(format!("profile is not sequentially {eps}-perfect")))
                }
            }
        }
        Command::Discretize { path, k, out, report, aligned } => {
            let p = load_path(&path)?;
            let mode = if aligned { GridMode::Aligned } else { GridMode::Inductive };
            let d = discretize_with(&p, k, mode)?;
            write(&out, &io::profile_to_json(&d.profile))?;
            let mut text = format!("k {}  stages {}  k_threshold {}\n", k, d.grid.len(), d.k_threshold);
            if report {
                let b = verify_bound(&p, k, &d.profile)?;
                text += &serde_json::to_string_pretty(&b).expect("plain data");
                text.push('\n');
            }
            Ok(text)
        }
        Command::Simulate { game, profile, runs, max_stages } => {
            let g = load_game::<f64>(&game)?;
            let x = load_profile(&profile)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let sim = strategy::simulate(&g, &x, runs, max_stages, &mut rng);
            let exact = strategy::payoff(&g, &x).value;
            let mut text = serde_json::to_string_pretty(&json!({ "seed": cfg.seed, "simulation": sim, "exact_payoff": exact })).expect("plain data");
            text.push('\n');
            Ok(text)
        }
        Command::Payoff { game, input, t } => {
            if let Some(p) = input.path {
                let g = load_game::<Rational>(&game)?;
                let gamma = load_path(&p)?.payoff_path(&g, &rational_arg(&t, "t")?)?;
                Ok(format!("({})\n", fmt_vec(&gamma)))
            } else {
                let g = load_game::<f64>(&game)?;
                let x = load_profile(input.profile.as_deref().expect("clap enforces one input"))?;
                Ok(format!("{:?}\n", strategy::payoff(&g, &x).value))
            }
        }
        Command::Export { path, game, grid, out } => {
            if grid == 0 {
                return Err(Failure::input("--grid must be positive"));
            }
            let p = load_path(&path)?;
            let g = game.map(|f| load_game::<Rational>(&f)).transpose()?;
            let ts: Vec<Rational> = (0..grid).map(|i| Rational::from_ratio(i as i64, grid as i64)).collect();
            let csv = to_csv(g.as_ref(), &p, &ts);
            match out {
                Some(f) => write(&f, &csv).map(|_| String::new()),
                None => Ok(csv),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", json!({ "error": f.kind, "message": f.message }));
            ExitCode::from(f.code)
        }
    }
}
