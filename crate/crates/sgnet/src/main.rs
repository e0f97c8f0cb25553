fn main() {
    std::process::exit(sgnet::run(std::env::args_os()));
}
