fn main() {
    std::process::exit(matconc::app::run(std::env::args_os()));
}
