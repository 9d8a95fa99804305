use std::io::Write;

fn main() {
    let args: Vec<std::ffi::OsString> = std::env::args_os().collect();
    env_logger::Builder::new()
        .filter_level(divkit::cli::requested_log_level(args.iter().cloned()))
        .target(env_logger::Target::Stderr)
        .init();
    let outcome = divkit::cli::dispatch(args);
    let _ = std::io::stdout().write_all(outcome.stdout.as_bytes());
    let _ = std::io::stderr().write_all(outcome.stderr.as_bytes());
    std::process::exit(outcome.code);
}
