fn main() {
    // Die quietly when stdout closes early (e.g. `aic-repair ... | head`).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    std::process::exit(aic_repair::cli::main_entry(std::env::args_os()));
}
