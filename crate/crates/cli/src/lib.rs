//! Batch commands over `lexsub-core`: train, eval, expand, classify and
//! project. Each `cmd_*` returns a process exit code (0 success, 1 usage or
//! configuration error, 2 runtime failure), reports errors on standard
//! error and writes a `manifest.json` next to its outputs.

pub mod args;
mod classify;
mod common;
pub mod error;
mod eval;
mod expand;
mod project;
mod train;

use args::{ClassifyArgs, CommandArgs, EvalArgs, ExpandArgs, ProjectArgs, TrainArgs};
pub use args::{Cli, Command};
use error::{CliError, CliResult, EXIT_OK};

/// Resolves the config file, then runs `body` on a pool of `--workers`
/// threads (the global pool when unset).
fn execute<A: CommandArgs + Sync>(args: A, body: fn(&A) -> CliResult<()>) -> i32 {
    let result = args.resolve().and_then(|args| match args.run_args().workers {
        Some(0) => Err(CliError::usage("--workers must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(CliError::runtime)?
            .install(|| body(&args)),
        None => body(&args),
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn cmd_train(args: TrainArgs) -> i32 {
    execute(args, train::run)
}

pub fn cmd_eval(args: EvalArgs) -> i32 {
    execute(args, eval::run)
}

pub fn cmd_expand(args: ExpandArgs) -> i32 {
    execute(args, expand::run)
}

pub fn cmd_classify(args: ClassifyArgs) -> i32 {
    execute(args, classify::run)
}

pub fn cmd_project(args: ProjectArgs) -> i32 {
    execute(args, project::run)
}

pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Expand(a) => cmd_expand(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Project(a) => cmd_project(a),
    }
}
