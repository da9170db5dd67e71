use clap::Parser;
use shgcint_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
        }
        Err(e) => {
            eprintln!("shgcint: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
