fn main() {
    std::process::exit(migrate_core::cli::main(std::env::args_os()));
}
