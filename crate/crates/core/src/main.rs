fn main() {
    std::process::exit(hsi_bench::cli::run(std::env::args_os()));
}
