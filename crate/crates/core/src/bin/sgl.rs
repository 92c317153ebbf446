use std::process::ExitCode;

use clap::Parser;
use sgl_core::cli::{cmd_bench, cmd_gen_data, cmd_path, cmd_solve, emit_json, Cli, Command};

fn run(cli: Cli) -> sgl_core::Result<bool> {
    match cli.command {
        Command::GenData(args) => {
            for path in cmd_gen_data(&args)? {
                println!("{}", path.display());
            }
            Ok(true)
        }
        Command::Solve(args) => {
            let rec = cmd_solve(&args)?;
            emit_json(&rec, args.solver.out.as_deref())?;
            Ok(rec.all_converged() || !args.solver.strict)
        }
        Command::Path(args) => {
            let rec = cmd_path(&args)?;
            emit_json(&rec, args.solver.out.as_deref())?;
            Ok(rec.all_converged() || !args.solver.strict)
        }
        Command::Bench(args) => {
            let rec = cmd_bench(&args)?;
            emit_json(&rec, args.solver.out.as_deref())?;
            eprint!("{}", rec.table());
            Ok(rec.all_converged() || !args.solver.strict)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: at least one solve did not reach the requested duality gap");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
