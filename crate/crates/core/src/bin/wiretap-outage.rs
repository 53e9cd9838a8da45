fn main() {
    std::process::exit(wiretap_outage::cli::main_entry());
}
