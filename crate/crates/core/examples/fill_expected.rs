//! Fills `expected_stdout` of every test in a suite with the output of the
//! reference program.
//!
//! ```text
//! cargo run -p causal-fl --example fill_expected -- corpus/<name>/program.mil corpus/<name>/suite.json
//! ```

use std::process::ExitCode;

use causal_fl::lang::{execute, ExecOptions, ExecStatus, NoHook};
use causal_fl::parse;
use causal_fl::profile::TestSuite;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [program, suite] = args.as_slice() else {
        eprintln!("usage: fill_expected <program.mil> <suite.json>");
        return ExitCode::from(1);
    };
    let src = std::fs::read_to_string(program).expect("read program");
    let p = match parse(&src) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{program}: {e}");
            return ExitCode::from(2);
        }
    };
    let mut s = TestSuite::from_json(&std::fs::read_to_string(suite).expect("read suite")).expect("parse suite");
    for t in &mut s.tests {
        let r = execute(&p, &t.args, &mut NoHook, ExecOptions::default()).expect("test arguments match main");
        if r.status != ExecStatus::Completed {
            eprintln!("{}: reference run did not complete ({:?})", t.id, r.status);
            return ExitCode::from(2);
        }
        t.expected_stdout = Some(r.stdout);
    }
    std::fs::write(suite, s.to_json() + "\n").expect("write suite");
    ExitCode::SUCCESS
}
