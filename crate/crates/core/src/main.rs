use clap::error::ErrorKind;
use clap::Parser;

use emoedit::cli::{run, Cli};
use emoedit::Error;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let err = Error::Usage(e.to_string().trim().to_string());
            eprintln!("{}", serde_json::to_string(&err.report()).expect("report serializes"));
            std::process::exit(2);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("{}", serde_json::to_string(&e.report()).expect("report serializes"));
        std::process::exit(1);
    }
}
