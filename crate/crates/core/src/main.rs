fn main() {
    std::process::exit(dta_core::cli::main(std::env::args_os()));
}
