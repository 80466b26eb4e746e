fn main() -> std::process::ExitCode {
    geope::analysis::main_entry()
}
