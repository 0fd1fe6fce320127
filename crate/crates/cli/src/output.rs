//! Rendering for the two report formats and the CSV exports.

use std::path::Path;

use anyhow::Result;
use serde_json::json;

use canopy::audit::AuditReport;
use canopy::evolution::{FateReport, LifecycleReport, PathFate};
use canopy::graph::GraphStats;
use canopy::tree::{DependencyTree, TreeDiff};

/// All JSON reports share an envelope: a schema version and the
/// subcommand that produced them.
pub fn json(kind: &str, payload: serde_json::Value) {
    let mut envelope = json!({ "schema_version": 1, "kind": kind });
    if let (Some(out), serde_json::Value::Object(extra)) =
        (envelope.as_object_mut(), payload)
    {
        out.extend(extra);
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&envelope).expect("reports serialize")
    );
}

pub fn tree_text(tree: &DependencyTree) {
    println!(
        "{} — {} package(s), resolved {}",
        tree.root,
        tree.nodes.len(),
        tree.resolved_at
            .map(|t| format!("as of {}", t.to_rfc3339()))
            .unwrap_or_else(|| "against the full registry".to_string())
    );
    for node in &tree.nodes {
        let location = if node.path.is_root() {
            ".".to_string()
        } else {
            node.path.render()
        };
        println!("  {:<56} {}@{}", location, node.name, node.version);
    }
    if !tree.diagnostics.is_empty() {
        println!("{} dependency link(s) could not be resolved:", tree.diagnostics.len());
        for d in &tree.diagnostics {
            let at = if d.at.is_root() {
                ".".to_string()
            } else {
                d.at.render()
            };
            println!("  {} -> {} `{}`: {}", at, d.library, d.constraint, d.reason);
        }
    }
}

pub fn audit_text(report: &AuditReport, tree: &DependencyTree) {
    if report.is_clean() {
        println!("{}: no known advisories land on this tree", report.root);
        return;
    }
    println!(
        "{}: {} vulnerable package(s), {} path(s){}",
        report.root,
        report.metrics.point_count,
        report.metrics.path_count,
        if report.truncated {
            " (path list capped)"
        } else {
            ""
        }
    );
    for point in &report.points {
        let ids: Vec<&str> = point.vuln_ids.iter().map(String::as_str).collect();
        let locations = tree.paths_of(&point.id).join(", ");
        println!(
            "  {} [{}] — {}",
            point.id,
            if locations.is_empty() { "." } else { &locations },
            ids.join(", ")
        );
    }
    for path in &report.paths {
        println!("  via {}", path.render());
    }
    println!(
        "  paths per package {:.2}; length min {} / mean {:.2} / max {}; {} direct dependency entry point(s)",
        report.metrics.paths_per_point,
        report.metrics.min_path_len,
        report.metrics.mean_path_len,
        report.metrics.max_path_len,
        report.metrics.distinct_direct_deps
    );
}

pub fn lifecycle_text(report: &LifecycleReport, fates: &FateReport) {
    if report.records.is_empty() {
        println!(
            "no advisories were present between {} and {}",
            report.from.to_rfc3339(),
            report.to.to_rfc3339()
        );
    }
    for record in &report.records {
        let end = match record.eliminated_at {
            Some(t) => format!(
                "eliminated {} ({:.1} days exposed)",
                t.to_rfc3339(),
                record.living_ms.unwrap_or(0) as f64 / 86_400_000.0
            ),
            None => "still present at window end".to_string(),
        };
        println!(
            "{}: entered {} ({} the advisory went public), {}",
            record.advisory,
            record.introduced_at.to_rfc3339(),
            if record.introduced_before_publish {
                "before"
            } else {
                "after"
            },
            end
        );
    }
    for summary in &report.summary {
        println!(
            "{}: {} interval(s), {}",
            summary.advisory,
            summary.intervals,
            if summary.present_at_end {
                "present at window end"
            } else {
                "gone by window end"
            }
        );
    }
    if !fates.fates.is_empty() {
        let removed = fates.fates.iter().filter(|f| f.removed).count();
        let dead_ends = fates
            .fates
            .iter()
            .filter(|f| f.vulnerable_latest_version)
            .count();
        let pinned = fates
            .fates
            .iter()
            .filter(|f| f.fixed_version_constraints > 0)
            .count();
        println!(
            "vulnerable paths: {} tracked, {} removed by registry history, {} pinned by exact constraints, {} whose newest in-range version is still vulnerable{}",
            fates.fates.len(),
            removed,
            pinned,
            dead_ends,
            if fates.truncated { " (capped)" } else { "" }
        );
    }
}

pub fn diff_text(a: &Path, b: &Path, diff: &TreeDiff) {
    if diff.exact_match {
        println!(
            "{} and {} describe the same tree",
            a.display(),
            b.display()
        );
        return;
    }
    println!("{} and {} differ:", a.display(), b.display());
    if diff.roots_differ {
        println!("  the root packages differ");
    }
    for node in &diff.nodes_only_in_a {
        println!("  only in {}: {}", a.display(), node);
    }
    for node in &diff.nodes_only_in_b {
        println!("  only in {}: {}", b.display(), node);
    }
    for moved in &diff.moved {
        println!(
            "  {} moved: {} -> {}",
            moved.id,
            moved.paths_a.join(", "),
            moved.paths_b.join(", ")
        );
    }
    for edge in &diff.edges_only_in_a {
        println!("  edge only in {}: {}", a.display(), edge);
    }
    for edge in &diff.edges_only_in_b {
        println!("  edge only in {}: {}", b.display(), edge);
    }
}

pub fn stats_text(stats: &GraphStats) {
    println!("libraries        {:>8}", stats.libraries);
    println!("versions         {:>8}", stats.versions);
    println!("advisories       {:>8}", stats.advisories);
    println!("has edges        {:>8}", stats.has_edges);
    println!("upper edges      {:>8}", stats.upper_edges);
    println!("lower edges      {:>8}", stats.lower_edges);
    println!("depends edges    {:>8}", stats.depends_edges);
    println!("default edges    {:>8}", stats.default_edges);
    println!("libdeps edges    {:>8}", stats.libdeps_edges);
    println!("affects edges    {:>8}", stats.affects_edges);
    println!("libaffects edges {:>8}", stats.libaffects_edges);
}

pub fn write_records_csv(
    path: &Path,
    records: &[canopy::evolution::LifecycleRecord],
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "advisory",
        "introduced_at",
        "eliminated_at",
        "living_ms",
        "introduced_before_publish",
        "eliminated_before_publish",
    ])?;
    for r in records {
        writer.write_record([
            r.advisory.clone(),
            r.introduced_at.to_rfc3339(),
            r.eliminated_at.map(|t| t.to_rfc3339()).unwrap_or_default(),
            r.living_ms.map(|ms| ms.to_string()).unwrap_or_default(),
            r.introduced_before_publish.to_string(),
            r.eliminated_before_publish
                .map(|b| b.to_string())
                .unwrap_or_default(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_fates_csv(path: &Path, fates: &[PathFate]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "path",
        "advisories",
        "constraints",
        "first_seen",
        "last_seen",
        "removed",
        "vulnerable_latest_version",
        "fixed_version_constraints",
    ])?;
    for f in fates {
        let path_text = f
            .nodes
            .iter()
            .map(|id| id.to_string())
            .collect::<Vec<_>>()
            .join(" -> ");
        let advisories = f.vuln_ids.iter().cloned().collect::<Vec<_>>().join("; ");
        writer.write_record([
            path_text,
            advisories,
            f.constraints.join("; "),
            f.first_seen.to_rfc3339(),
            f.last_seen.to_rfc3339(),
            f.removed.to_string(),
            f.vulnerable_latest_version.to_string(),
            f.fixed_version_constraints.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
