fn main() {
    // GAPWELD_LOG controls verbosity only.
    env_logger::Builder::from_env(env_logger::Env::new().filter("GAPWELD_LOG")).init();
    std::process::exit(gapweld::cli::run(std::env::args()));
}
