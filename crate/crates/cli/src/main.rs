use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use railplan_core::instance::{generate_synthetic, load_instance, save_instance, validate_instance, Instance, InstanceError, Severity};
use railplan_core::lighttravel::{LtMethod, LtOptions, DEFAULT_FULL_CAP, DEFAULT_THRESHOLD, DEFAULT_WINDOW_MINUTES};
use railplan_core::model::{Extension, ExtensionConfig, ModelOptions, DEFAULT_THETA};
use railplan_core::pipeline::{build_plan_model, PipelineError, PlanConfig};
use railplan_core::report::{compute_kpis, kpi_rows};
use railplan_core::solver::mps::write_mps;
use railplan_core::solver::{solve_bb, Solution, SolveBudget, Status};
use railplan_core::sweep::{default_factors, default_ladder, run_extension_ladder, run_sweep, LadderConfig, SweepConfig, SweepParam};
use railplan_core::table::{render, Format};

const EXIT_INVALID: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_NO_INCUMBENT: u8 = 4;

/// Weekly locomotive planning: build, solve and analyse assignment models.
#[derive(Parser)]
#[command(name = "railplan", version)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random instance as JSON.
    Generate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        terminals: usize,
        #[arg(long, default_value_t = 6)]
        trains: usize,
        #[arg(long, default_value_t = 2)]
        max_legs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check an instance; exits with 2 if it has errors.
    Validate {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Build the model and write it in MPS format.
    Build {
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve and write the solution as JSON.
    Solve {
        #[command(flatten)]
        plan: PlanArgs,
        #[command(flatten)]
        budget: BudgetArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scale one cost parameter and solve once per factor.
    ///
    /// Columns: parameter, factor, status, objective, lower_bound,
    /// fleet_size, work_events, dh_minutes, lt_minutes, light_trains, nodes,
    /// wall_time, error.
    Sweep {
        #[command(flatten)]
        plan: PlanArgs,
        #[command(flatten)]
        budget: BudgetArgs,
        /// q (ownership), e (light-train charge), c (work events) or g (relocation).
        #[arg(long, default_value = "q")]
        parameter: SweepParam,
        /// Comma-separated factors; default 0.1..1.0 by 0.1 then 2..10.
        #[arg(long, value_delimiter = ',')]
        factors: Option<Vec<f64>>,
        #[arg(long, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Solve factors in parallel.
        #[arg(long)]
        parallel: bool,
    },
    /// Solve V1p and then each extension over its budget grid.
    ///
    /// Columns: version, budget, status, objective, lower_bound,
    /// improvement_pct, fleet_size, work_events, active_terminals,
    /// active_terminal_days, warm_started, nodes, wall_time, error.
    Ladder {
        #[command(flatten)]
        plan: PlanArgs,
        #[command(flatten)]
        budget: BudgetArgs,
        /// Versions to run (default V1,V2,V3,V4,V5).
        #[arg(long, value_delimiter = ',')]
        versions: Option<Vec<Extension>>,
        /// Start each cell from the previous solution of the same version.
        #[arg(long)]
        warm_chain: bool,
        #[arg(long, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plan statistics for a solution (solves first if none is given).
    ///
    /// Columns: metric, value. The heatmap file has terminal, day, events.
    Report {
        #[command(flatten)]
        plan: PlanArgs,
        #[command(flatten)]
        budget: BudgetArgs,
        /// Solution JSON written by `solve` with the same model options.
        #[arg(long)]
        solution: Option<PathBuf>,
        /// Also write work events per terminal and day as CSV.
        #[arg(long)]
        heatmap: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    instance: PathBuf,
    /// exact, mcf or full.
    #[arg(long, default_value = "exact")]
    lt_method: LtMethod,
    #[arg(long, default_value_t = DEFAULT_WINDOW_MINUTES)]
    mcf_window: i64,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    mcf_threshold: i64,
    /// Cost band base for the flow heuristic; default from transit frequencies.
    #[arg(long)]
    mcf_alpha: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_FULL_CAP)]
    full_cap: usize,
    /// V0, V1, V1p, V2, V3, V4 or V5.
    #[arg(long, default_value = "V0")]
    extension: Extension,
    #[arg(long)]
    lambda: Option<u32>,
    /// Daily work-event cap per terminal; 0 removes the cap.
    #[arg(long, default_value_t = DEFAULT_THETA)]
    theta: u32,
    /// Activation budget of V2..V5.
    #[arg(long)]
    alpha: Option<u32>,
    /// Drop the pick-up/set-out exclusion at stops.
    #[arg(long)]
    no_mutex: bool,
}

impl PlanArgs {
    fn theta(&self) -> Option<u32> {
        (self.theta > 0).then_some(self.theta)
    }

    fn lt(&self) -> LtOptions {
        LtOptions {
            method: self.lt_method,
            full_cap: self.full_cap,
            mcf_window: self.mcf_window,
            mcf_threshold: self.mcf_threshold,
            mcf_alpha: self.mcf_alpha,
        }
    }

    fn config(&self, budget: SolveBudget) -> PlanConfig {
        let mut ext = ExtensionConfig::new(self.extension).with_theta(self.theta());
        ext.lambda = self.lambda;
        if let Some(a) = self.alpha {
            ext = ext.with_budget(a);
        }
        PlanConfig {
            lt: self.lt(),
            extension: ext,
            model: ModelOptions {
                mutual_exclusion: !self.no_mutex,
            },
            budget,
        }
    }
}

#[derive(Args)]
struct BudgetArgs {
    #[arg(long, default_value_t = 60.0)]
    budget_seconds: f64,
    #[arg(long, default_value_t = 2_000_000)]
    budget_nodes: u64,
    /// Relative optimality gap at which to stop.
    #[arg(long, default_value_t = 1e-9)]
    gap: f64,
}

impl BudgetArgs {
    fn budget(&self) -> SolveBudget {
        SolveBudget {
            max_seconds: self.budget_seconds,
            max_nodes: self.budget_nodes,
            gap: self.gap,
        }
    }
}

fn write_out(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn load(path: &Path) -> Result<Instance> {
    load_instance(path).with_context(|| format!("loading {}", path.display()))
}

fn status_code(s: &Solution) -> u8 {
    match s.status {
        Status::Infeasible => EXIT_INFEASIBLE,
        Status::BudgetExceeded if !s.has_incumbent() => EXIT_NO_INCUMBENT,
        _ => 0,
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Generate {
            seed,
            terminals,
            trains,
            max_legs,
            out,
        } => {
            let inst = generate_synthetic(seed, terminals, trains, max_legs)?;
            match out {
                Some(p) => save_instance(&inst, &p)?,
                None => println!("{}", railplan_core::instance::instance_to_json(&inst)),
            }
            Ok(0)
        }
        Command::Validate { instance } => {
            let text = std::fs::read_to_string(&instance).with_context(|| format!("reading {}", instance.display()))?;
            let inst = match railplan_core::instance::parse_instance(&text) {
                Ok(i) => i,
                Err(e) => {
                    eprintln!("error: {e}");
                    return Ok(EXIT_INVALID);
                }
            };
            let found = validate_instance(&inst);
            for v in &found {
                println!("{:?} {}: {}", v.severity, v.code, v.message);
            }
            let errors = found.iter().filter(|v| v.severity == Severity::Error).count();
            if errors > 0 {
                eprintln!("{errors} error(s)");
                return Ok(EXIT_INVALID);
            }
            eprintln!("ok ({} warning(s))", found.len());
            Ok(0)
        }
        Command::Build { plan, out } => {
            let inst = load(&plan.instance)?;
            let (net, m) = build_plan_model(&inst, &plan.config(SolveBudget::default()))?;
            eprintln!(
                "{} nodes, {} arcs, {} variables, {} constraints",
                net.nodes.len(),
                net.arcs.len(),
                m.num_vars(),
                m.constraints.len()
            );
            write_out(out.as_deref(), write_mps(&m).as_bytes())?;
            Ok(0)
        }
        Command::Solve { plan, budget, out } => {
            let inst = load(&plan.instance)?;
            let (_, m) = build_plan_model(&inst, &plan.config(budget.budget()))?;
            let sol = solve_bb(&m, &budget.budget())?;
            eprintln!(
                "{} objective {:?} after {} nodes in {:.2}s",
                sol.status, sol.objective, sol.node_count, sol.wall_time
            );
            write_out(out.as_deref(), format!("{}\n", sol.to_json()).as_bytes())?;
            Ok(status_code(&sol))
        }
        Command::Sweep {
            plan,
            budget,
            parameter,
            factors,
            format,
            out,
            parallel,
        } => {
            let inst = load(&plan.instance)?;
            let mut factors = factors.unwrap_or_else(default_factors);
            if factors.iter().any(|&f| !(f > 0.0)) {
                bail!("factors must be positive");
            }
            factors.sort_by(f64::total_cmp);
            let cfg = SweepConfig {
                parameter,
                factors,
                lt: plan.lt(),
                budget: budget.budget(),
                parallel,
            };
            let rows = run_sweep(&inst, &cfg);
            write_out(out.as_deref(), &render(&rows, format)?)?;
            Ok(0)
        }
        Command::Ladder {
            plan,
            budget,
            versions,
            warm_chain,
            format,
            out,
        } => {
            let inst = load(&plan.instance)?;
            let mut steps = default_ladder(&inst);
            if let Some(vs) = versions {
                let mut chosen = Vec::new();
                for v in vs {
                    match steps.iter().find(|(e, _)| *e == v) {
                        Some(s) => chosen.push(s.clone()),
                        None => chosen.push((v, Vec::new())),
                    }
                }
                steps = chosen;
            }
            let cfg = LadderConfig {
                steps,
                theta: plan.theta(),
                warm_chain,
                lt: plan.lt(),
                budget: budget.budget(),
            };
            let rows = run_extension_ladder(&inst, &cfg);
            write_out(out.as_deref(), &render(&rows, format)?)?;
            Ok(0)
        }
        Command::Report {
            plan,
            budget,
            solution,
            heatmap,
            format,
            out,
        } => {
            let inst = load(&plan.instance)?;
            let (net, m) = build_plan_model(&inst, &plan.config(budget.budget()))?;
            let sol: Solution = match solution {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
                }
                None => solve_bb(&m, &budget.budget())?,
            };
            let code = status_code(&sol);
            if code != 0 {
                eprintln!("no plan to report ({})", sol.status);
                return Ok(code);
            }
            let kpis = compute_kpis(&net, &m, &sol)?;
            if let Some(p) = heatmap {
                std::fs::write(&p, render(&kpis.heatmap, Format::Csv)?).with_context(|| format!("writing {}", p.display()))?;
            }
            write_out(out.as_deref(), &render(&kpi_rows(&kpis), format)?)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let invalid = matches!(
                e.downcast_ref::<InstanceError>(),
                Some(InstanceError::Invalid(_) | InstanceError::Parse { .. })
            ) || matches!(e.downcast_ref::<PipelineError>(), Some(PipelineError::Invalid(_)));
            if invalid {
                ExitCode::from(EXIT_INVALID)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
