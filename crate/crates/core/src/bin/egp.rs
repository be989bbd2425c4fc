use std::process::ExitCode;

fn main() -> ExitCode {
    if let Some(n) = std::env::var("EGP_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    ExitCode::from(empirical_gp::cli::run(std::env::args_os().collect()))
}
