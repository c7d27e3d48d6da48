use std::net::SocketAddr;
use std::path::PathBuf;

use mcda_mss::{load_closed_db, parse_taxonomy, seed, Diagnostic, MethodDb, Taxonomy};

pub const DATA_DIR_VAR: &str = "MCDA_MSS_DATA_DIR";
pub const TAXONOMY_VAR: &str = "MCDA_MSS_TAXONOMY";
pub const DB_VAR: &str = "MCDA_MSS_DB";
pub const LISTEN_VAR: &str = "MCDA_MSS_LISTEN";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Config {
    /// Directory holding one `<id>.session` file per session.
    pub data_dir: PathBuf,
    /// `None` means the embedded seed taxonomy.
    pub taxonomy_path: Option<PathBuf>,
    /// `None` means the embedded seed db.
    pub db_path: Option<PathBuf>,
    pub listen: SocketAddr,
}

impl Config {
    pub fn from_env() -> Result<Self, String> {
        Self::from_vars(|k| std::env::var(k).ok())
    }

    pub fn from_vars(get: impl Fn(&str) -> Option<String>) -> Result<Self, String> {
        let listen = get(LISTEN_VAR).unwrap_or_else(|| "127.0.0.1:8080".into());
        let listen = listen.parse().map_err(|e| format!("{LISTEN_VAR}={listen}: {e}"))?;
        Ok(Config {
            data_dir: get(DATA_DIR_VAR).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("sessions")),
            taxonomy_path: get(TAXONOMY_VAR).map(PathBuf::from),
            db_path: get(DB_VAR).map(PathBuf::from),
            listen,
        })
    }

    /// Loads the taxonomy and the closed db once; warnings are returned for logging.
    pub fn load_data(&self) -> Result<(Taxonomy, MethodDb, Vec<Diagnostic>), String> {
        let read = |p: &PathBuf| std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()));
        let tax_text = match &self.taxonomy_path {
            Some(p) => read(p)?,
            None => seed::TAXONOMY.to_string(),
        };
        let db_text = match &self.db_path {
            Some(p) => read(p)?,
            None => seed::METHODS.to_string(),
        };
        let tax = parse_taxonomy(&tax_text).map_err(|d| render("taxonomy", &d))?;
        let (db, warnings) = load_closed_db(&tax, &db_text).map_err(|d| render("db", &d))?;
        Ok((tax, db, warnings))
    }
}

fn render(what: &str, diags: &[Diagnostic]) -> String {
    let lines: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
    format!("{what} failed to load:\n{}", lines.join("\n"))
}
