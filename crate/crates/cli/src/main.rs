use clap::Parser;
use deltagas_cli::{execute, Args};

fn main() {
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("deltagas: thread pool: {e}");
            std::process::exit(2);
        }
    }
    if let Err(e) = execute(&args) {
        eprintln!("deltagas: {e}");
        std::process::exit(e.exit_code());
    }
}
