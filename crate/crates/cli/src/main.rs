fn main() {
    std::process::exit(lcpfilter::run(std::env::args_os()));
}
