use clap::Parser;
use pantograph_cg::cli::Cli;

fn main() {
    // PANTOGRAPH_CG_THREADS caps internal parallelism (0 or unset = auto).
    if let Ok(value) = std::env::var("PANTOGRAPH_CG_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
            }
        }
    }
    let cli = Cli::parse();
    std::process::exit(cli.execute());
}
