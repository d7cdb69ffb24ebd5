use std::io::Write;

fn main() {
    let out = t2m_cli::run_args(std::env::args_os());
    // Write failures (e.g. a closed pipe) must not change the exit code.
    let _ = std::io::stdout().write_all(out.stdout.as_bytes());
    let _ = std::io::stderr().write_all(out.stderr.as_bytes());
    std::process::exit(out.exit);
}
