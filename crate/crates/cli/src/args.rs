use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "hoare2ri", version, about = "Proof tableaux for while programs, checked by rewriting induction")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// External SMT-LIB2 solver command, e.g. "z3 -in". Defaults to
    /// $HOARE2RI_SOLVER, then `z3` on the PATH.
    #[arg(long, global = true, value_name = "CMD")]
    pub solver_cmd: Option<String>,
    /// Use only the internal decision procedures.
    #[arg(long, global = true)]
    pub builtin: bool,
    /// Per-query timeout of the external solver.
    #[arg(long, global = true, value_name = "MS")]
    pub timeout_ms: Option<u64>,
    /// Seed for randomized sampling.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Variable order of the state symbols, comma separated.
    #[arg(long, global = true, value_delimiter = ',', value_name = "VARS")]
    pub vars: Vec<String>,
    /// Step budget for interpretation and rewriting.
    #[arg(long, global = true, default_value_t = 10_000)]
    pub fuel: u64,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Parse a program and print it with line numbers.
    Parse {
        file: PathBuf,
        /// Print the syntax tree as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run a program from an initial valuation.
    Interpret {
        file: PathBuf,
        /// Initial values, e.g. x=3,i=0,z=0. Missing variables start at 0.
        #[arg(long, value_delimiter = ',', value_name = "VAR=N")]
        input: Vec<String>,
    },
    /// Translate a program into constrained rewrite rules.
    Convert {
        file: PathBuf,
        /// Print the full textual rewrite system including the signature.
        #[arg(long)]
        emit_lctrs: bool,
        /// Also add the check rules built from the last assertion.
        #[arg(long)]
        with_check: bool,
    },
    /// Discharge the obligations of a proof tableau.
    CheckTableau {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Turn a proof tableau into a rewriting-induction derivation.
    Transform {
        file: PathBuf,
        #[command(flatten)]
        proof: ProofOpts,
        /// Replay a recorded trace against the tableau instead.
        #[arg(long, value_name = "TRACE")]
        replay: Option<PathBuf>,
    },
    /// Prove total correctness of a proof tableau.
    Prove {
        file: PathBuf,
        #[command(flatten)]
        proof: ProofOpts,
        /// Ranking function for a loop: [LINE=]EXPR, or [LINE=]E1;E2 for a lexicographic pair.
        #[arg(long, value_name = "[LINE=]EXPR")]
        rank: Vec<String>,
        /// Print the full report as JSON.
        #[arg(long)]
        json: bool,
        /// Write the JSON report to a file.
        #[arg(long, value_name = "PATH")]
        report: Option<PathBuf>,
    },
    /// Rewrite a term leftmost-innermost to normal form.
    Rewrite {
        /// A `.lctrs` rewrite system or a `.whl` program to convert.
        file: PathBuf,
        #[arg(long)]
        term: String,
    },
}

#[derive(Debug, Args)]
pub struct ProofOpts {
    /// Write the proof trace as JSON ("-" for stdout).
    #[arg(long, value_name = "PATH")]
    pub emit_proof: Option<PathBuf>,
    /// Print a step-by-step transcript of the derivation.
    #[arg(long)]
    pub narrate: bool,
}
