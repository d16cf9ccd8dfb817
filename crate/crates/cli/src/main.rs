use clap::Parser;
use delayres_cli::{configure_threads, run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| run(&cli.command));
    match result {
        Ok(manifest) => {
            for a in &manifest.artifacts {
                log::info!("wrote {} ({} bytes)", a.path, a.bytes);
            }
        }
        Err(e) => {
            eprintln!("delayres {}: error: {e}", cli.command.name());
            std::process::exit(e.exit_code());
        }
    }
}
