mod config;
mod run;

use std::process::ExitCode;

use config::ParseOutcome;
use fcast_core::Error;

fn main() -> ExitCode {
    let cfg = match config::parse_config(std::env::args_os()) {
        Ok(cfg) => cfg,
        Err(ParseOutcome::Clap(e)) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
        Err(ParseOutcome::Usage(e)) => {
            eprintln!("fcast: error: {e}");
            return ExitCode::from(2);
        }
    };
    if cfg.print_config {
        println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
        return ExitCode::SUCCESS;
    }
    if let Some(n) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("fcast: error: cannot start {n} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    let out = match run::execute(&cfg) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("fcast: error: {e}");
            return ExitCode::from(if matches!(e, Error::InvalidParameter { .. }) { 2 } else { 1 });
        }
    };
    let dest = run::destination(&cfg);
    if let Err(e) = run::write_output(dest.as_deref(), &out.content) {
        eprintln!("fcast: error: writing output: {e}");
        return ExitCode::from(1);
    }
    let target = dest.map(|p| p.display().to_string()).unwrap_or_else(|| "stdout".into());
    eprintln!("fcast {}: seed={} cells={} output={}", cfg.command_name, cfg.seed, out.cells, target);
    ExitCode::SUCCESS
}
