use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = cellfree::cli::Args::parse();
    std::process::exit(cellfree::cli::run(&args));
}
