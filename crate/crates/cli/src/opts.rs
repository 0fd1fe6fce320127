//! Command-line surface.

use std::path::PathBuf;

use chrono::{DateTime, NaiveDate, TimeZone, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "canopy",
    version,
    about = "Resolve npm-style dependency trees from a local registry snapshot \
             and analyze how security advisories land on them"
)]
pub struct Cli {
    /// Store directory. Overrides the CANOPY_STORE variable and the config
    /// file.
    #[arg(long, global = true, value_name = "DIR")]
    pub store: Option<PathBuf>,

    /// Config file (TOML). Defaults to ./canopy.toml when that exists.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
pub enum Command {
    /// Load packument and advisory JSON files into the store.
    ///
    /// Packuments are applied before advisories regardless of argument
    /// order, so a library and its advisories can be ingested in one
    /// batch. Exits 0 when every file loads, 2 when only some do, 1 when
    /// none do.
    Ingest(IngestArgs),

    /// Resolve the dependency tree for a package or a local manifest.
    Resolve(ResolveArgs),

    /// Resolve a tree and report the advisories that land on it.
    ///
    /// Exits 3 when the tree contains at least one vulnerable package.
    Audit(AuditArgs),

    /// Replay registry history and show how the tree evolved.
    Timeline(TimelineArgs),

    /// Replay registry history and measure how long each advisory stayed
    /// in the tree, and what became of each vulnerable path.
    ///
    /// Exits 3 when at least one advisory is still present at the end of
    /// the window.
    Lifecycle(LifecycleArgs),

    /// Search for an install plan with fewer vulnerable packages than the
    /// installer's default.
    ///
    /// Exits 3 when even the best plan still contains vulnerabilities.
    Remediate(RemediateArgs),

    /// Compare the trees described by two lockfiles.
    Compare(CompareArgs),

    /// Show node and edge counts for the whole store.
    Stats,
}

#[derive(Args)]
pub struct IngestArgs {
    /// JSON files to ingest.
    #[arg(required = true, value_name = "FILE")]
    pub files: Vec<PathBuf>,

    /// Force how files are interpreted instead of sniffing each one.
    #[arg(long, value_enum, default_value_t = IngestKind::Auto)]
    pub kind: IngestKind,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IngestKind {
    /// Objects with an `affected_range` field are advisories; everything
    /// else is a packument.
    Auto,
    Packument,
    Advisory,
}

/// What to resolve and under which rules; shared by every tree command.
#[derive(Args)]
pub struct TargetArgs {
    /// Resolve a published package.
    #[arg(long, value_name = "NAME@VERSION", conflicts_with = "manifest")]
    pub package: Option<String>,

    /// Resolve a local manifest file (package.json shape: name, version,
    /// dependencies).
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,

    /// Resolve as if running at this instant: only versions released
    /// strictly before it exist. RFC 3339 or YYYY-MM-DD.
    #[arg(long, value_name = "TIME", value_parser = parse_time)]
    pub as_of: Option<DateTime<Utc>>,

    /// Include the root's devDependencies.
    #[arg(long)]
    pub include_dev: bool,

    /// Include peerDependencies of every package.
    #[arg(long)]
    pub include_peer: bool,

    /// Include optionalDependencies of every package.
    #[arg(long)]
    pub include_optional: bool,

    /// Fail on the first unresolvable dependency instead of recording it
    /// and moving on.
    #[arg(long)]
    pub fail_fast: bool,

    /// Upper bound on processed dependency links (cycle brake).
    #[arg(long, value_name = "N", default_value_t = 1_000_000)]
    pub expansion_budget: usize,
}

#[derive(Args)]
pub struct ResolveArgs {
    #[command(flatten)]
    pub target: TargetArgs,

    /// `install` mimics the installer (hoisting and reuse); `reach`
    /// expands every constraint independently to its highest satisfying
    /// version.
    #[arg(long, value_enum, default_value_t = ResolveMode::Install)]
    pub mode: ResolveMode,

    /// Also write the resolved tree as a v3 lockfile.
    #[arg(long, value_name = "FILE")]
    pub out_lockfile: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ResolveMode {
    Install,
    Reach,
}

#[derive(Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub target: TargetArgs,

    /// Stop enumerating vulnerable paths beyond this many.
    #[arg(long, value_name = "N", default_value_t = 1_000)]
    pub path_cap: usize,
}

#[derive(Args)]
pub struct TimelineArgs {
    #[command(flatten)]
    pub target: TargetArgs,

    /// Start of the window (RFC 3339 or YYYY-MM-DD).
    #[arg(long, value_name = "TIME", value_parser = parse_time)]
    pub from: DateTime<Utc>,

    /// End of the window, inclusive.
    #[arg(long, value_name = "TIME", value_parser = parse_time)]
    pub to: DateTime<Utc>,

    /// `every-change` records each instant the tree changed; `monthly`
    /// samples month ends.
    #[arg(long, value_enum, default_value_t = SamplingMode::EveryChange)]
    pub mode: SamplingMode,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplingMode {
    EveryChange,
    Monthly,
}

#[derive(Args)]
pub struct LifecycleArgs {
    #[command(flatten)]
    pub target: TargetArgs,

    /// Start of the window (RFC 3339 or YYYY-MM-DD).
    #[arg(long, value_name = "TIME", value_parser = parse_time)]
    pub from: DateTime<Utc>,

    /// End of the window, inclusive.
    #[arg(long, value_name = "TIME", value_parser = parse_time)]
    pub to: DateTime<Utc>,

    /// Stop enumerating vulnerable paths beyond this many per snapshot.
    #[arg(long, value_name = "N", default_value_t = 1_000)]
    pub path_cap: usize,

    /// Also write the presence intervals as CSV.
    #[arg(long, value_name = "FILE")]
    pub records_csv: Option<PathBuf>,

    /// Also write the per-path fates as CSV.
    #[arg(long, value_name = "FILE")]
    pub fates_csv: Option<PathBuf>,
}

#[derive(Args)]
pub struct RemediateArgs {
    #[command(flatten)]
    pub target: TargetArgs,

    /// Upper bound on explored branch decisions.
    #[arg(long, value_name = "N", default_value_t = 100_000)]
    pub branch_budget: usize,

    /// Stop enumerating vulnerable paths beyond this many when scoring a
    /// candidate tree.
    #[arg(long, value_name = "N", default_value_t = 10_000)]
    pub path_cap: usize,

    /// Write the best tree as a v3 lockfile.
    #[arg(long, value_name = "FILE")]
    pub out_lockfile: Option<PathBuf>,
}

#[derive(Args)]
pub struct CompareArgs {
    /// First lockfile.
    #[arg(value_name = "LOCKFILE_A")]
    pub a: PathBuf,

    /// Second lockfile.
    #[arg(value_name = "LOCKFILE_B")]
    pub b: PathBuf,
}

pub fn parse_time(text: &str) -> Result<DateTime<Utc>, String> {
    if let Ok(t) = text.parse::<DateTime<Utc>>() {
        return Ok(t);
    }
    if let Ok(d) = text.parse::<NaiveDate>() {
        let midnight = d.and_hms_opt(0, 0, 0).expect("midnight exists");
        return Ok(Utc.from_utc_datetime(&midnight));
    }
    Err(format!(
        "`{text}` is not a timestamp (expected RFC 3339 like 2021-06-01T00:00:00Z, or YYYY-MM-DD)"
    ))
}
