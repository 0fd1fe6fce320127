//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use serde_json::json;

use canopy::audit::{audit_tree, find_vulnerable_points};
use canopy::evolution::{classify_paths, lifecycle, timeline, TimelineMode};
use canopy::graph::{Advisory, DepGraph, SelectionPolicy, Store};
use canopy::lockfile::{emit_lockfile, lockfile_bytes, read_lockfile, tree_from_lockfile};
use canopy::remediation::{remediate, RemediationConfig};
use canopy::resolver::{
    resolve_reach_target, resolve_target, ResolveConfig, RootManifest, RootTarget,
};
use canopy::semver::Version;
use canopy::tree::{compare_trees, DependencyTree, PackageId};

use crate::opts::{
    AuditArgs, Cli, Command, CompareArgs, Format, IngestArgs, IngestKind, LifecycleArgs,
    RemediateArgs, ResolveArgs, ResolveMode, SamplingMode, TargetArgs, TimelineArgs,
};
use crate::output;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_VULNERABLE: i32 = 3;

pub fn dispatch(cli: Cli) -> Result<i32> {
    match &cli.command {
        Command::Ingest(args) => cmd_ingest(&cli, args),
        Command::Resolve(args) => cmd_resolve(&cli, args),
        Command::Audit(args) => cmd_audit(&cli, args),
        Command::Timeline(args) => cmd_timeline(&cli, args),
        Command::Lifecycle(args) => cmd_lifecycle(&cli, args),
        Command::Remediate(args) => cmd_remediate(&cli, args),
        Command::Compare(args) => cmd_compare(&cli, args),
        Command::Stats => cmd_stats(&cli),
    }
}

#[derive(Default, Deserialize)]
struct ConfigFile {
    store: Option<PathBuf>,
}

/// The store directory: `--store` beats `CANOPY_STORE`, which beats the
/// config file, which beats the `canopy-store` default.
fn store_dir(cli: &Cli) -> Result<PathBuf> {
    if let Some(dir) = &cli.store {
        return Ok(dir.clone());
    }
    if let Ok(dir) = std::env::var("CANOPY_STORE") {
        if !dir.is_empty() {
            return Ok(PathBuf::from(dir));
        }
    }
    let config_path = cli.config.clone().or_else(|| {
        let default = PathBuf::from("canopy.toml");
        default.exists().then_some(default)
    });
    if let Some(path) = config_path {
        let text = fs::read_to_string(&path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let config: ConfigFile = toml::from_str(&text)
            .with_context(|| format!("cannot parse config file {}", path.display()))?;
        if let Some(dir) = config.store {
            return Ok(dir);
        }
    }
    Ok(PathBuf::from("canopy-store"))
}

fn open_graph(cli: &Cli) -> Result<DepGraph> {
    let (_store, graph) = Store::open(store_dir(cli)?)?;
    Ok(graph)
}

fn build_config(target: &TargetArgs) -> ResolveConfig {
    ResolveConfig {
        policy: SelectionPolicy {
            as_of: target.as_of,
            ..SelectionPolicy::default()
        },
        include_dev: target.include_dev,
        include_peer: target.include_peer,
        include_optional: target.include_optional,
        fail_fast: target.fail_fast,
        expansion_budget: target.expansion_budget,
    }
}

fn build_target(target: &TargetArgs) -> Result<RootTarget> {
    match (&target.package, &target.manifest) {
        (Some(spec), _) => Ok(RootTarget::Package(parse_package_spec(spec)?)),
        (None, Some(path)) => read_manifest(path).map(RootTarget::Manifest),
        (None, None) => bail!("specify what to resolve: --package NAME@VERSION or --manifest FILE"),
    }
}

fn parse_package_spec(spec: &str) -> Result<PackageId> {
    // The last `@` separates name and version, so scoped names
    // (`@scope/pkg@1.0.0`) work too.
    let Some(i) = spec.rfind('@').filter(|&i| i > 0) else {
        bail!("`{spec}` is not NAME@VERSION");
    };
    let version = Version::parse(&spec[i + 1..])
        .with_context(|| format!("bad version in `{spec}`"))?;
    Ok(PackageId::new(&spec[..i], version))
}

/// package.json subset for `--manifest`.
#[derive(Deserialize)]
struct ManifestFile {
    name: Option<String>,
    version: Option<String>,
    #[serde(default)]
    dependencies: BTreeMap<String, String>,
}

fn read_manifest(path: &Path) -> Result<RootManifest> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read manifest {}", path.display()))?;
    let manifest: ManifestFile = serde_json::from_str(&text)
        .with_context(|| format!("cannot parse manifest {}", path.display()))?;
    let version = manifest
        .version
        .as_deref()
        .map(Version::parse)
        .transpose()
        .with_context(|| format!("bad version in manifest {}", path.display()))?
        .unwrap_or_else(|| Version::new(0, 0, 0));
    Ok(RootManifest {
        name: manifest.name.unwrap_or_else(|| "root".to_string()),
        version,
        dependencies: manifest.dependencies,
    })
}

fn write_lockfile(graph: &DepGraph, tree: &DependencyTree, path: &Path) -> Result<()> {
    let bytes = lockfile_bytes(&emit_lockfile(graph, tree));
    fs::write(path, bytes).with_context(|| format!("cannot write lockfile {}", path.display()))
}

fn cmd_ingest(cli: &Cli, args: &IngestArgs) -> Result<i32> {
    let (store, mut graph) = Store::open(store_dir(cli)?)?;

    struct Outcome {
        file: String,
        kind: &'static str,
        result: Result<String, String>,
    }
    let mut outcomes: Vec<Outcome> = Vec::new();
    let mut packuments: Vec<(usize, serde_json::Value)> = Vec::new();
    let mut advisories: Vec<(usize, Advisory)> = Vec::new();

    for file in &args.files {
        let slot = outcomes.len();
        let mut outcome = Outcome {
            file: file.display().to_string(),
            kind: "unknown",
            result: Err(String::new()),
        };
        let parsed: Result<serde_json::Value> = (|| {
            let text = fs::read_to_string(file)?;
            Ok(serde_json::from_str(&text)?)
        })();
        match parsed {
            Err(e) => outcome.result = Err(format!("{e:#}")),
            Ok(value) => {
                let is_advisory = match args.kind {
                    IngestKind::Packument => false,
                    IngestKind::Advisory => true,
                    IngestKind::Auto => value.get("affected_range").is_some(),
                };
                if is_advisory {
                    outcome.kind = "advisory";
                    match serde_json::from_value::<Advisory>(value) {
                        Ok(advisory) => advisories.push((slot, advisory)),
                        Err(e) => outcome.result = Err(format!("not an advisory: {e}")),
                    }
                } else {
                    outcome.kind = "packument";
                    packuments.push((slot, value));
                }
            }
        }
        outcomes.push(outcome);
    }

    // Apply packuments first so advisories in the same batch find their
    // library.
    for (slot, value) in packuments {
        outcomes[slot].result = match store.ingest_packument(&mut graph, value) {
            Ok(report) => Ok(format!(
                "library {}: {} versions added, {} skipped, {} rejected",
                report.library,
                report.versions_added,
                report.versions_skipped,
                report.versions_rejected
            )),
            Err(e) => Err(format!("{e}")),
        };
    }
    for (slot, advisory) in advisories {
        outcomes[slot].result = match store.ingest_advisory(&mut graph, advisory) {
            Ok(report) => Ok(format!(
                "{} affects {} version(s) of {}{}",
                report.id,
                report.affected_versions,
                report.library,
                if report.duplicate { " (duplicate)" } else { "" }
            )),
            Err(e) => Err(format!("{e}")),
        };
    }

    let loaded = outcomes.iter().filter(|o| o.result.is_ok()).count();
    let failed = outcomes.len() - loaded;
    let defaults = if loaded > 0 {
        let report = graph.recompute_defaults(None);
        store.save_index(&graph)?;
        Some(report)
    } else {
        None
    };

    match cli.format {
        Format::Json => {
            let files: Vec<serde_json::Value> = outcomes
                .iter()
                .map(|o| match &o.result {
                    Ok(summary) => json!({
                        "file": o.file, "kind": o.kind, "ok": true, "summary": summary
                    }),
                    Err(reason) => json!({
                        "file": o.file, "kind": o.kind, "ok": false, "error": reason
                    }),
                })
                .collect();
            output::json(
                "ingest",
                json!({
                    "files": files,
                    "loaded": loaded,
                    "failed": failed,
                    "defaults": defaults,
                }),
            );
        }
        Format::Text => {
            for o in &outcomes {
                match &o.result {
                    Ok(summary) => println!("{}: ok ({} — {})", o.file, o.kind, summary),
                    Err(reason) => println!("{}: FAILED ({})", o.file, reason),
                }
            }
            println!("loaded {loaded}/{} documents", outcomes.len());
            if let Some(d) = &defaults {
                println!(
                    "default links refreshed: {} examined, {} resolved, {} changed",
                    d.examined, d.resolved, d.changed
                );
            }
        }
    }

    Ok(if failed == 0 {
        EXIT_OK
    } else if loaded == 0 {
        EXIT_ERROR
    } else {
        EXIT_PARTIAL
    })
}

fn cmd_resolve(cli: &Cli, args: &ResolveArgs) -> Result<i32> {
    let graph = open_graph(cli)?;
    let target = build_target(&args.target)?;
    let config = build_config(&args.target);
    let tree = match args.mode {
        ResolveMode::Install => resolve_target(&graph, &target, &config)?,
        ResolveMode::Reach => resolve_reach_target(&graph, &target, &config)?,
    };
    if let Some(path) = &args.out_lockfile {
        write_lockfile(&graph, &tree, path)?;
    }
    match cli.format {
        Format::Json => output::json("resolve", json!({ "tree": tree })),
        Format::Text => output::tree_text(&tree),
    }
    Ok(EXIT_OK)
}

fn cmd_audit(cli: &Cli, args: &AuditArgs) -> Result<i32> {
    let graph = open_graph(cli)?;
    let target = build_target(&args.target)?;
    let config = build_config(&args.target);
    let tree = resolve_target(&graph, &target, &config)?;
    let report = audit_tree(&graph, &tree, args.path_cap);

    match cli.format {
        Format::Json => output::json("audit", json!({ "report": report })),
        Format::Text => output::audit_text(&report, &tree),
    }
    Ok(if report.is_clean() {
        EXIT_OK
    } else {
        EXIT_VULNERABLE
    })
}

fn cmd_timeline(cli: &Cli, args: &TimelineArgs) -> Result<i32> {
    let graph = open_graph(cli)?;
    let target = build_target(&args.target)?;
    let config = build_config(&args.target);
    let mode = match args.mode {
        SamplingMode::EveryChange => TimelineMode::EveryChange,
        SamplingMode::Monthly => TimelineMode::Monthly,
    };
    let entries = timeline(&graph, &target, args.from, args.to, mode, &config)?;

    match cli.format {
        Format::Json => output::json(
            "timeline",
            json!({ "from": args.from, "to": args.to, "entries": entries }),
        ),
        Format::Text => {
            println!(
                "{} snapshot(s) between {} and {}",
                entries.len(),
                args.from.to_rfc3339(),
                args.to.to_rfc3339()
            );
            let mut previous: Option<&DependencyTree> = None;
            for entry in &entries {
                let vulnerable = find_vulnerable_points(&graph, &entry.tree).len();
                let drift = previous
                    .map(|p| {
                        let diff = compare_trees(p, &entry.tree);
                        format!(
                            "  (+{} / -{} packages)",
                            diff.nodes_only_in_b.len(),
                            diff.nodes_only_in_a.len()
                        )
                    })
                    .unwrap_or_default();
                println!(
                    "{}  {} packages, {} vulnerable{}",
                    entry.time.to_rfc3339(),
                    entry.tree.nodes.len(),
                    vulnerable,
                    drift
                );
                previous = Some(&entry.tree);
            }
        }
    }
    Ok(EXIT_OK)
}

fn cmd_lifecycle(cli: &Cli, args: &LifecycleArgs) -> Result<i32> {
    let graph = open_graph(cli)?;
    let target = build_target(&args.target)?;
    let config = build_config(&args.target);
    let report = lifecycle(&graph, &target, args.from, args.to, &config)?;
    let fates = classify_paths(&graph, &target, args.from, args.to, &config, args.path_cap)?;

    if let Some(path) = &args.records_csv {
        output::write_records_csv(path, &report.records)
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    if let Some(path) = &args.fates_csv {
        output::write_fates_csv(path, &fates.fates)
            .with_context(|| format!("cannot write {}", path.display()))?;
    }

    let still_present = report.summary.iter().any(|s| s.present_at_end);
    match cli.format {
        Format::Json => output::json(
            "lifecycle",
            json!({
                "from": args.from,
                "to": args.to,
                "records": report.records,
                "summary": report.summary,
                "fates": fates.fates,
                "fates_truncated": fates.truncated,
            }),
        ),
        Format::Text => output::lifecycle_text(&report, &fates),
    }
    Ok(if still_present {
        EXIT_VULNERABLE
    } else {
        EXIT_OK
    })
}

fn cmd_remediate(cli: &Cli, args: &RemediateArgs) -> Result<i32> {
    let graph = open_graph(cli)?;
    let target = build_target(&args.target)?;
    let config = RemediationConfig {
        resolve: build_config(&args.target),
        branch_budget: args.branch_budget,
        path_cap: args.path_cap,
    };
    let outcome = remediate(&graph, &target, &config)?;
    if let Some(path) = &args.out_lockfile {
        write_lockfile(&graph, &outcome.tree, path)?;
    }

    match cli.format {
        Format::Json => output::json(
            "remediate",
            json!({
                "default_points": outcome.default_points,
                "default_paths": outcome.default_paths,
                "residual_points": outcome.residual_points,
                "residual_paths": outcome.residual_paths,
                "improved": outcome.improved(),
                "expansions": outcome.expansions,
                "budget_exhausted": outcome.budget_exhausted,
                "tree": outcome.tree,
            }),
        ),
        Format::Text => {
            println!(
                "default tree: {} vulnerable package(s), {} path(s)",
                outcome.default_points, outcome.default_paths
            );
            println!(
                "best tree:    {} vulnerable package(s), {} path(s){}",
                outcome.residual_points,
                outcome.residual_paths,
                if outcome.improved() {
                    ""
                } else {
                    "  (no better plan exists)"
                }
            );
            println!("explored {} branch decision(s)", outcome.expansions);
            if outcome.budget_exhausted {
                println!("branch budget exhausted — the search was cut short");
            }
            if let Some(path) = &args.out_lockfile {
                println!("lockfile written to {}", path.display());
            }
        }
    }
    Ok(if outcome.residual_points == 0 {
        EXIT_OK
    } else {
        EXIT_VULNERABLE
    })
}

fn cmd_compare(cli: &Cli, args: &CompareArgs) -> Result<i32> {
    let read = |path: &Path| -> Result<DependencyTree> {
        let bytes =
            fs::read(path).with_context(|| format!("cannot read lockfile {}", path.display()))?;
        let lockfile = read_lockfile(&bytes)
            .with_context(|| format!("cannot parse lockfile {}", path.display()))?;
        Ok(tree_from_lockfile(&lockfile)?)
    };
    let a = read(&args.a)?;
    let b = read(&args.b)?;
    let diff = compare_trees(&a, &b);

    match cli.format {
        Format::Json => output::json(
            "compare",
            json!({
                "a": args.a.display().to_string(),
                "b": args.b.display().to_string(),
                "diff": diff,
            }),
        ),
        Format::Text => output::diff_text(&args.a, &args.b, &diff),
    }
    Ok(EXIT_OK)
}

fn cmd_stats(cli: &Cli) -> Result<i32> {
    let graph = open_graph(cli)?;
    let stats = graph.stats();
    match cli.format {
        Format::Json => output::json("stats", json!({ "stats": stats })),
        Format::Text => output::stats_text(&stats),
    }
    Ok(EXIT_OK)
}
