use std::path::PathBuf;
use std::process::ExitCode;

use bianchi_core::commands::{
    cmd_homology, cmd_polyhedron, cmd_table, CommandError, RunConfig, DB_ENV,
};
use bianchi_core::homology::TableRow;
use bianchi_core::swan::PruneRule;
use clap::{Parser, Subcommand, ValueEnum};

/// Cell complexes and homology of Bianchi groups PSL_2(O_{-m}).
#[derive(Parser, Debug)]
#[command(name = "bianchi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PruneArg {
    ThreeVertex,
    Nonempty,
}

impl From<PruneArg> for PruneRule {
    fn from(p: PruneArg) -> Self {
        match p {
            PruneArg::ThreeVertex => PruneRule::ThreeVertex,
            PruneArg::Nonempty => PruneRule::Nonempty,
        }
    }
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Database directory.
    #[arg(long, env = DB_ENV, default_value = "bianchi-db")]
    db: PathBuf,
    /// Which hemispheres the polyhedron computation erases.
    #[arg(long, value_enum, default_value = "three-vertex")]
    prune_rule: PruneArg,
    /// Ignore stored artifacts and recompute.
    #[arg(long)]
    fresh: bool,
}

impl Common {
    fn config(&self) -> RunConfig {
        RunConfig {
            prune: self.prune_rule.into(),
            resume: !self.fresh,
            ..RunConfig::new(&self.db)
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute the fundamental polyhedron for one m.
    Polyhedron {
        #[arg(long, allow_negative_numbers = true)]
        m: i64,
        /// Re-verify the termination criterion from scratch.
        #[arg(long)]
        audit: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Compute the table row for one m.
    Homology {
        #[arg(long, allow_negative_numbers = true)]
        m: i64,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Compute every row with |disc| <= dmax.
    Table {
        #[arg(long, allow_negative_numbers = true)]
        dmax: i64,
        #[arg(long)]
        json: bool,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        common: Common,
    },
}

/// Exit code of a batch whose table was printed but had failing rows.
const ROW_FAILURE: u8 = 3;

fn run(cli: Cli) -> Result<ExitCode, CommandError> {
    match cli.command {
        Command::Polyhedron { m, audit, common } => {
            let config = RunConfig {
                audit,
                ..common.config()
            };
            let out = cmd_polyhedron(m, &config)?;
            let p = &out.polyhedron;
            println!("{}", out.path.display());
            println!(
                "hemispheres {}  vertices {}  max N(mu) {}  zeta^2 {}",
                p.list.len(),
                p.vertices.vertices.len(),
                p.list.max_norm(),
                p.zeta_sq
            );
        }
        Command::Homology { m, json, common } => {
            let out = cmd_homology(m, &common.config())?;
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&out.row).expect("row serializes")
                );
            } else {
                println!("{}", TableRow::header());
                println!("{}", out.row.render());
            }
        }
        Command::Table {
            dmax,
            json,
            jobs,
            common,
        } => {
            let config = RunConfig {
                jobs,
                ..common.config()
            };
            let table = cmd_table(dmax, &config)?;
            if json {
                print!("{}", table.render_json());
            } else {
                print!("{}", table.render_text());
            }
            if table.failures() > 0 {
                eprintln!("{} of {} rows failed", table.failures(), table.lines.len());
                return Ok(ExitCode::from(ROW_FAILURE));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
