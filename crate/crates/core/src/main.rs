fn main() {
    std::process::exit(spatial_templates::cli::run(std::env::args_os()));
}
