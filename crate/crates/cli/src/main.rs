//! `omission`: run protocols under message adversaries, synthesize
//! non-deciding executions, check consensus properties, compose model
//! simulations and validate traces.

mod args;
mod attack;
mod check;
mod exit;
mod flags;
mod out;
mod run;
mod simulate;
mod validate;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::exit::Code;

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { Code::Usage as i32 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::Run(a) => run::cmd_run(a),
        Command::Attack(a) => attack::cmd_attack(a),
        Command::Check(a) => check::cmd_check(a),
        Command::Simulate(a) => simulate::cmd_simulate(a),
        Command::Validate(a) => validate::cmd_validate(a),
    };
    let code = match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    };
    std::process::exit(code as i32);
}
