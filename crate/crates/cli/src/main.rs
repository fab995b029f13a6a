use dirlab_cli::{main_with, SEED_ENV};

fn main() {
    let env_seed = std::env::var(SEED_ENV).ok();
    std::process::exit(main_with(std::env::args_os(), env_seed.as_deref()));
}
