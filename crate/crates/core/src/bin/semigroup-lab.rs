fn main() {
    env_logger::init();
    std::process::exit(semigroup_lab::cli::run());
}
