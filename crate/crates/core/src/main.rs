fn main() {
    std::process::exit(hnc_icl::experiment::cli::cli_main(std::env::args_os()));
}
