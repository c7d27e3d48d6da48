//! `mcda-mss`: batch front end over the method selection engine.
//!
//! Exit status 0 on success, 1 on data or validation failures, 2 on usage
//! errors. Results go to stdout, diagnostics to stderr.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "mcda-mss", version, about = "Select MCDA methods from a feature taxonomy and method database")]
pub struct Cli {
    /// Taxonomy schema file. Defaults to the shipped taxonomy.
    #[arg(long, global = true, value_name = "PATH")]
    taxonomy: Option<PathBuf>,
    /// Sparse method database. Defaults to the shipped database.
    #[arg(long, global = true, value_name = "PATH")]
    db: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Load, close and validate the taxonomy and database.
    Validate {
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Complete matches for a session, or near matches under a binding.
    Recommend {
        #[arg(long, value_name = "PATH")]
        session: PathBuf,
        /// Features that every listed method must support, comma separated.
        /// Switches the output to a near-match table.
        #[arg(long, value_name = "FEATURES", value_delimiter = ',', num_args = 0..)]
        binding: Option<Vec<String>>,
        #[arg(long, default_value_t = 10)]
        limit: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Unanswered questions ranked by worst-case remaining methods.
    Selective {
        #[arg(long, value_name = "PATH")]
        session: PathBuf,
        #[arg(long, default_value_t = 5)]
        top: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Audit one case file or every `*.case` file in a directory.
    #[command(group(ArgGroup::new("input").required(true).args(["case", "corpus"])))]
    Audit {
        #[arg(long, value_name = "PATH")]
        case: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        corpus: Option<PathBuf>,
        /// Where corpus mode writes `<case>.report` and `summary.txt`.
        /// Defaults to the corpus directory.
        #[arg(long, value_name = "DIR", requires = "corpus")]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Convert a dense 0/1 CSV matrix into a sparse database file.
    Import {
        #[arg(long, value_name = "PATH")]
        matrix: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(errors) => {
            for e in errors {
                eprintln!("{e}");
            }
            ExitCode::from(1)
        }
    }
}
