use std::process::ExitCode;
use std::sync::Arc;

use mcda_mss_service::{router, Config, Service};

#[tokio::main]
async fn main() -> ExitCode {
    let config = match Config::from_env() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(2);
        }
    };
    let (tax, db, warnings) = match config.load_data() {
        Ok(x) => x,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::FAILURE;
        }
    };
    for w in &warnings {
        eprintln!("{w}");
    }
    let service = match Service::new(Arc::new(tax), Arc::new(db), &config.data_dir) {
        Ok(s) => Arc::new(s),
        Err(e) => {
            eprintln!("{}: {}", config.data_dir.display(), e.message);
            return ExitCode::FAILURE;
        }
    };
    let listener = match tokio::net::TcpListener::bind(config.listen).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("cannot listen on {}: {e}", config.listen);
            return ExitCode::FAILURE;
        }
    };
    eprintln!("listening on http://{} (sessions in {})", config.listen, config.data_dir.display());
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    if let Err(e) = axum::serve(listener, router(service)).with_graceful_shutdown(shutdown).await {
        eprintln!("server error: {e}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
