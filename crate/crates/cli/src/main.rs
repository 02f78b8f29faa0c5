fn main() {
    std::process::exit(em_enclosure::run(std::env::args_os()));
}
