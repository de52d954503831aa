use clap::Parser;

use bumpforge::cli;

fn main() {
    let cli = match cli::Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // usage errors share the configuration-error exit code; --help
            // and --version land here too but exit cleanly
            let code = if err.use_stderr() { 64 } else { 0 };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    match cli::run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}
