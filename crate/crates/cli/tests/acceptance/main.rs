//! Acceptance gate: eight end-to-end checks, one verdict line each.
//!
//! Every check compares the shipped implementation against an independent
//! oracle (hand-rolled comparator evaluation, a naive installer simulator,
//! exhaustive path and assignment enumeration) or against a golden fixture
//! with hand-derived expected output. The target runs without the libtest
//! harness so the lines always print; any failure exits non-zero.

mod paths_oracle;
mod semver_oracle;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration as StdDuration, Instant};

use canopy::audit::find_vulnerable_paths;
use canopy::evolution::{
    classify_paths, lifecycle, next_change, timeline, TimelineMode,
};
use canopy::graph::{Advisory, DepGraph, PackumentDoc, ParsedConstraint};
use canopy::lockfile::{emit_lockfile, lockfile_bytes, read_lockfile, tree_from_lockfile};
use canopy::remediation::{remediate, RemediationConfig};
use canopy::resolver::{resolve, resolve_reach, ResolveConfig, RootTarget};
use canopy::semver::{Constraint, Version};
use canopy::tree::{DependencyTree, PackageId};
use chrono::{DateTime, Duration, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let criteria: [(u32, &str, fn() -> String); 8] = [
        (1, "golden differential resolve", c1_golden_differential),
        (2, "semver conformance vs comparator oracle", c2_semver_oracle),
        (3, "resolver vs naive installer simulator", c3_resolver_oracle),
        (4, "determinism and release-time soundness", c4_determinism),
        (5, "vulnerable paths vs exhaustive enumeration", c5_paths_oracle),
        (6, "evolution fixture", c6_evolution_fixture),
        (7, "remediation vs exhaustive assignments", c7_remediation_oracle),
        (8, "ingest idempotence and graph invariants", c8_ingest_invariants),
    ];

    // The verdict line carries the reason; the default hook would just
    // repeat it with a backtrace banner.
    panic::set_hook(Box::new(|_| {}));

    let mut failures = 0;
    for (number, name, run) in criteria {
        match panic::catch_unwind(AssertUnwindSafe(run)) {
            Ok(detail) => println!("[PASS] criterion {number} — {name}: {detail}"),
            Err(payload) => {
                failures += 1;
                let reason = payload
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panicked without a message".to_string());
                let reason = reason.replace('\n', " | ");
                println!("[FAIL] criterion {number} — {name}: {reason}");
            }
        }
    }

    let _ = panic::take_hook();
    if failures > 0 {
        eprintln!("acceptance: {failures} criterion(s) failed");
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- helpers

fn graph_from_packuments(docs: &[serde_json::Value]) -> DepGraph {
    let mut graph = DepGraph::new();
    for json in docs {
        let doc = PackumentDoc::from_value(json.clone()).expect("fixture packuments parse");
        graph.ingest_packument(&doc).expect("fixture packuments ingest");
    }
    graph.recompute_defaults(None);
    graph
}

fn ts(text: &str) -> DateTime<Utc> {
    text.parse().expect("fixture timestamps parse")
}

fn ver(text: &str) -> Version {
    Version::parse(text).expect("fixture versions parse")
}

/// (path -> name@version, {(from, to, constraint)}, {(at, library)}) — the
/// shape both the simulator and the golden expectations use.
type TreeView = (
    BTreeMap<String, String>,
    BTreeSet<(String, String, String)>,
    BTreeSet<(String, String)>,
);

fn view(tree: &DependencyTree) -> TreeView {
    (
        tree.nodes
            .iter()
            .map(|n| (n.path.render(), format!("{}@{}", n.name, n.version)))
            .collect(),
        tree.edges
            .iter()
            .map(|e| (e.from.render(), e.to.render(), e.constraint.clone()))
            .collect(),
        tree.diagnostics
            .iter()
            .map(|d| (d.at.render(), d.library.clone()))
            .collect(),
    )
}

// ---------------------------------------------------------- criterion 1

/// The five-package diamond where hoisting makes the installer's tree and
/// the flat over-approximation visibly different, run through the actual
/// binary: the install tree reuses d@1.1.0 while the reach tree also pulls
/// d@1.2.0 and its dependency e.
fn c1_golden_differential() -> String {
    let dir = tempfile::tempdir().expect("tempdir");
    let store = dir.path().join("store");

    let fixtures = [
        serde_json::json!({
            "name": "a",
            "dist-tags": { "latest": "1.0.0" },
            "versions": { "1.0.0": { "dependencies": { "b": "^1.0.0", "c": "^1.0.0" } } }
        }),
        serde_json::json!({
            "name": "b",
            "dist-tags": { "latest": "1.0.0" },
            "versions": { "1.0.0": { "dependencies": { "d": "~1.1.0" } } }
        }),
        serde_json::json!({
            "name": "c",
            "dist-tags": { "latest": "1.0.0" },
            "versions": { "1.0.0": { "dependencies": { "d": "^1.1.0" } } }
        }),
        serde_json::json!({
            "name": "d",
            "dist-tags": { "latest": "1.2.0" },
            "versions": {
                "1.0.0": {},
                "1.1.0": {},
                "1.2.0": { "dependencies": { "e": "^1.0.0" } }
            }
        }),
        serde_json::json!({
            "name": "e",
            "dist-tags": { "latest": "1.0.0" },
            "versions": { "1.0.0": {} }
        }),
    ];
    let mut files = Vec::new();
    for doc in &fixtures {
        let path = dir.path().join(format!("{}.json", doc["name"].as_str().unwrap()));
        std::fs::write(&path, serde_json::to_vec_pretty(doc).unwrap()).unwrap();
        files.push(path);
    }

    let ingest = Command::new(env!("CARGO_BIN_EXE_canopy"))
        .arg("--store")
        .arg(&store)
        .arg("ingest")
        .args(&files)
        .output()
        .expect("run canopy ingest");
    assert_eq!(
        ingest.status.code(),
        Some(0),
        "ingest failed: {}",
        String::from_utf8_lossy(&ingest.stdout)
    );

    let resolve_via_cli = |mode: &str| -> (BTreeMap<String, String>, BTreeSet<(String, String, String)>) {
        let output = Command::new(env!("CARGO_BIN_EXE_canopy"))
            .arg("--store")
            .arg(&store)
            .args(["--format", "json", "resolve", "--package", "a@1.0.0", "--mode", mode])
            .output()
            .expect("run canopy resolve");
        assert_eq!(
            output.status.code(),
            Some(0),
            "resolve --mode {mode} failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
        let body: serde_json::Value = serde_json::from_slice(&output.stdout).expect("resolve JSON");
        assert_eq!(body["kind"], "resolve");
        let nodes = body["tree"]["nodes"]
            .as_array()
            .expect("nodes array")
            .iter()
            .map(|n| {
                (
                    n["path"].as_str().unwrap().to_string(),
                    format!("{}@{}", n["name"].as_str().unwrap(), n["version"].as_str().unwrap()),
                )
            })
            .collect();
        let edges = body["tree"]["edges"]
            .as_array()
            .expect("edges array")
            .iter()
            .map(|e| {
                (
                    e["from"].as_str().unwrap().to_string(),
                    e["to"].as_str().unwrap().to_string(),
                    e["constraint"].as_str().unwrap().to_string(),
                )
            })
            .collect();
        (nodes, edges)
    };

    let started = Instant::now();
    let (install_nodes, install_edges) = resolve_via_cli("install");
    let (reach_nodes, reach_edges) = resolve_via_cli("reach");
    let elapsed = started.elapsed();

    let pairs = |entries: &[(&str, &str)]| -> BTreeMap<String, String> {
        entries.iter().map(|(p, id)| (p.to_string(), id.to_string())).collect()
    };
    let triples = |entries: &[(&str, &str, &str)]| -> BTreeSet<(String, String, String)> {
        entries
            .iter()
            .map(|(f, t, c)| (f.to_string(), t.to_string(), c.to_string()))
            .collect()
    };

    assert_eq!(
        install_nodes,
        pairs(&[
            ("", "a@1.0.0"),
            ("node_modules/b", "b@1.0.0"),
            ("node_modules/c", "c@1.0.0"),
            ("node_modules/d", "d@1.1.0"),
        ]),
        "install-mode nodes diverge from the golden tree"
    );
    assert_eq!(
        install_edges,
        triples(&[
            ("", "node_modules/b", "^1.0.0"),
            ("", "node_modules/c", "^1.0.0"),
            ("node_modules/b", "node_modules/d", "~1.1.0"),
            ("node_modules/c", "node_modules/d", "^1.1.0"),
        ]),
        "install-mode edges diverge from the golden tree"
    );
    assert_eq!(
        reach_nodes,
        pairs(&[
            ("", "a@1.0.0"),
            ("node_modules/b", "b@1.0.0"),
            ("node_modules/c", "c@1.0.0"),
            ("node_modules/b/node_modules/d", "d@1.1.0"),
            ("node_modules/c/node_modules/d", "d@1.2.0"),
            ("node_modules/c/node_modules/d/node_modules/e", "e@1.0.0"),
        ]),
        "reach-mode nodes diverge from the golden tree"
    );
    assert_eq!(
        reach_edges,
        triples(&[
            ("", "node_modules/b", "^1.0.0"),
            ("", "node_modules/c", "^1.0.0"),
            ("node_modules/b", "node_modules/b/node_modules/d", "~1.1.0"),
            ("node_modules/c", "node_modules/c/node_modules/d", "^1.1.0"),
            (
                "node_modules/c/node_modules/d",
                "node_modules/c/node_modules/d/node_modules/e",
                "^1.0.0",
            ),
        ]),
        "reach-mode edges diverge from the golden tree"
    );
    assert!(
        elapsed < StdDuration::from_secs(1),
        "resolves took {elapsed:.2?}, limit 1s"
    );

    format!(
        "install reuses d@1.1.0 (4 nodes/4 edges), reach adds d@1.2.0 and e@1.0.0 \
         (6 nodes/5 edges); exact node and edge match via the CLI in {elapsed:.2?} (limit 1s)"
    )
}

// ---------------------------------------------------------- criterion 2

/// Random ranges rendered from a structural grammar, evaluated two ways:
/// by the production parser and by an oracle that desugars each primitive
/// to comparators itself and applies node's prerelease opt-in rule.
fn c2_semver_oracle() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0002);
    let started = Instant::now();

    let mut satisfaction_queries = 0usize;
    let mut max_queries = 0usize;
    while satisfaction_queries < 10_000 {
        let range = semver_oracle::gen_range(&mut rng);
        let text = range.render();
        let constraint =
            Constraint::parse(&text).unwrap_or_else(|e| panic!("range {text:?} failed to parse: {e}"));

        for _ in 0..8 {
            let probe = semver_oracle::gen_probe(&mut rng, &range);
            let rendered = probe.render();
            let version = Version::parse(&rendered)
                .unwrap_or_else(|e| panic!("probe {rendered:?} failed to parse: {e}"));
            let got = constraint
                .satisfies(&version)
                .unwrap_or_else(|e| panic!("satisfies({text:?}, {rendered:?}): {e}"));
            let expected = range.matches(&probe);
            assert_eq!(
                got, expected,
                "satisfaction disagrees on version {rendered:?} vs range {text:?}"
            );
            satisfaction_queries += 1;
        }

        let mut candidates: Vec<semver_oracle::OVersion> = (0..6)
            .map(|_| semver_oracle::gen_version(&mut rng, true))
            .collect();
        for _ in 0..6 {
            candidates.push(semver_oracle::gen_probe(&mut rng, &range));
        }
        let parsed: Vec<Version> = candidates
            .iter()
            .map(|c| Version::parse(&c.render()).unwrap())
            .collect();
        let expected = candidates
            .iter()
            .filter(|c| range.matches(c))
            .max_by(|a, b| semver_oracle::cmp_versions(a, b))
            .map(|c| c.render());
        let got = constraint.max_satisfying(parsed.iter()).map(|v| v.to_string());
        assert_eq!(
            got,
            expected,
            "max_satisfying disagrees for range {text:?} over {:?}",
            candidates.iter().map(|c| c.render()).collect::<Vec<_>>()
        );
        max_queries += 1;
    }

    let elapsed = started.elapsed();
    assert!(
        elapsed < StdDuration::from_secs(10),
        "queries took {elapsed:.2?}, limit 10s"
    );
    format!(
        "{satisfaction_queries} satisfaction and {max_queries} max-satisfying queries \
         agree with the comparator oracle (zero tolerance) in {elapsed:.2?} (limit 10s)"
    )
}

// ---------------------------------------------------------- criterion 3

/// 200 random registries resolved by the production BFS and by a separate
/// plain-loop simulator; node placements, edges and given-up links must
/// match exactly.
fn c3_resolver_oracle() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0003);
    let started = Instant::now();
    let day_ms = 24 * 3600 * 1000i64;

    for case in 0..200 {
        let registry = sim::gen_registry(&mut rng);
        let graph = graph_from_packuments(&registry.packuments());
        let (root_name, root_version) = registry.root();

        let as_of = if rng.gen_bool(0.3) {
            None
        } else {
            let root_release = registry.libs[&root_name].versions[&root_version].release;
            Some(root_release + Duration::milliseconds(1 + rng.gen_range(0..70 * day_ms)))
        };

        let mut config = ResolveConfig::default();
        config.policy.as_of = as_of;
        let tree = resolve(&graph, &root_name, &root_version, &config)
            .unwrap_or_else(|e| panic!("case {case}: resolve failed: {e}"));

        let expected = sim::simulate(&registry, &root_name, &root_version, as_of);
        let (nodes, edges, diags) = view(&tree);
        assert_eq!(
            (nodes, edges, diags),
            (expected.nodes, expected.edges, expected.diags),
            "case {case} diverged from the simulator (as_of {as_of:?})"
        );
    }

    let elapsed = started.elapsed();
    assert!(
        elapsed < StdDuration::from_secs(60),
        "comparison took {elapsed:.2?}, limit 60s"
    );
    format!(
        "200/200 random registries (≤8 libraries × ≤4 versions) match the naive \
         installer simulator exactly in {elapsed:.2?} (limit 60s)"
    )
}

// ---------------------------------------------------------- criterion 4

/// Resolving twice on one graph, and once more on a graph rebuilt from the
/// same documents, must give byte-identical JSON; under a cutoff no
/// admitted node may be released at or after it.
fn c4_determinism() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0004);
    let started = Instant::now();
    let day_ms = 24 * 3600 * 1000i64;
    let mut runs = 0usize;
    let mut time_checked = 0usize;
    let mut violations = 0usize;

    for case in 0..50 {
        let registry = sim::gen_registry(&mut rng);
        let docs = registry.packuments();
        let graph = graph_from_packuments(&docs);
        let rebuilt = graph_from_packuments(&docs);
        let (root_name, root_version) = registry.root();
        let root_release = registry.libs[&root_name].versions[&root_version].release;
        let as_of = root_release + Duration::milliseconds(1 + rng.gen_range(0..70 * day_ms));

        let mut config = ResolveConfig::default();
        config.policy.as_of = Some(as_of);

        type Resolver = fn(&DepGraph, &str, &Version, &ResolveConfig) -> Result<DependencyTree, canopy::resolver::ResolveError>;
        for run_resolve in [resolve as Resolver, resolve_reach as Resolver] {
            let first = run_resolve(&graph, &root_name, &root_version, &config)
                .unwrap_or_else(|e| panic!("case {case}: {e}"));
            let again = run_resolve(&graph, &root_name, &root_version, &config).unwrap();
            let other = run_resolve(&rebuilt, &root_name, &root_version, &config).unwrap();
            let bytes = serde_json::to_vec(&first).unwrap();
            assert_eq!(
                bytes,
                serde_json::to_vec(&again).unwrap(),
                "case {case}: second run differs"
            );
            assert_eq!(
                bytes,
                serde_json::to_vec(&other).unwrap(),
                "case {case}: rebuilt-graph run differs"
            );
            runs += 1;

            for node in &first.nodes {
                time_checked += 1;
                match graph.version(&node.name, &node.version).and_then(|n| n.release_time) {
                    Some(t) if t < as_of => {}
                    _ => violations += 1,
                }
            }
        }
    }

    assert_eq!(violations, 0, "{violations} node(s) violated release_time < as_of");
    let elapsed = started.elapsed();
    format!(
        "{runs} install/reach resolutions byte-identical across re-runs and rebuilt \
         graphs; {time_checked} placed nodes all satisfy release_time < cutoff \
         (0 violations) in {elapsed:.2?}"
    )
}

// ---------------------------------------------------------- criterion 5

/// Reverse-DFS path enumeration vs exhaustive forward enumeration of all
/// simple root-to-point chains, on 200 random trees.
fn c5_paths_oracle() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0005);
    let started = Instant::now();
    let mut paths_compared = 0usize;
    let mut cap_checks = 0usize;

    for case in 0..200 {
        let tree = paths_oracle::gen_tree(&mut rng);
        let points = paths_oracle::gen_points(&mut rng, &tree);

        let search = find_vulnerable_paths(&tree, &points, usize::MAX);
        assert!(!search.truncated, "case {case}: uncapped search truncated");
        let expected = paths_oracle::all_vulnerable_paths(&tree, &points);
        assert_eq!(
            search.paths, expected,
            "case {case}: path sets diverge ({} tree nodes, {} points)",
            tree.nodes.len(),
            points.len()
        );
        paths_compared += expected.len();

        if expected.len() > 3 {
            let capped = find_vulnerable_paths(&tree, &points, 3);
            assert!(capped.truncated, "case {case}: cap of 3 not flagged");
            assert_eq!(capped.paths.len(), 3, "case {case}: cap of 3 not honored");
            assert!(
                capped.paths.iter().all(|p| expected.contains(p)),
                "case {case}: capped enumeration invented a path"
            );
            cap_checks += 1;
        }
    }

    let elapsed = started.elapsed();
    assert!(
        elapsed < StdDuration::from_secs(60),
        "comparison took {elapsed:.2?}, limit 60s"
    );
    format!(
        "200/200 random trees (≤12 nodes) agree with exhaustive simple-path \
         enumeration ({paths_compared} paths compared, {cap_checks} cap checks) \
         in {elapsed:.2?} (limit 60s)"
    )
}

// ---------------------------------------------------------- criterion 6

/// A scripted history: libw@1.1.0 then libv@1.0.1 are released inside the
/// window, so the tree changes exactly twice; the second change evicts the
/// advisory after precisely 50 days; a sibling root that pins `=1.0.0`
/// keeps its vulnerable path to the end.
fn c6_evolution_fixture() -> String {
    let docs = [
        serde_json::json!({
            "name": "app",
            "time": { "1.0.0": "2021-01-05T00:00:00.000Z" },
            "versions": { "1.0.0": { "dependencies": { "libv": "^1.0.0", "libw": "^1.0.0" } } }
        }),
        serde_json::json!({
            "name": "app2",
            "time": { "1.0.0": "2021-01-05T00:00:00.000Z" },
            "versions": { "1.0.0": { "dependencies": { "libv": "=1.0.0" } } }
        }),
        serde_json::json!({
            "name": "libv",
            "time": {
                "1.0.0": "2021-01-01T00:00:00.000Z",
                "1.0.1": "2021-03-01T00:00:00.000Z"
            },
            "versions": { "1.0.0": {}, "1.0.1": {} }
        }),
        serde_json::json!({
            "name": "libw",
            "time": {
                "1.0.0": "2021-01-02T00:00:00.000Z",
                "1.1.0": "2021-02-01T00:00:00.000Z"
            },
            "versions": { "1.0.0": {}, "1.1.0": {} }
        }),
    ];
    let mut graph = graph_from_packuments(&docs);
    graph
        .ingest_advisory(&Advisory {
            id: "ADV-V".into(),
            library: "libv".into(),
            affected_range: "<1.0.1".into(),
            publish_time: ts("2021-01-15T00:00:00Z"),
            severity: Some("high".into()),
        })
        .expect("advisory ingests");

    let config = ResolveConfig::default();
    let app = RootTarget::Package(PackageId::new("app", ver("1.0.0")));
    let from = ts("2021-01-10T00:00:00Z");
    let to = ts("2021-04-01T00:00:00Z");

    // Exactly two change events, at the two scheduled release instants.
    let first = next_change(&graph, &app, from, &config)
        .unwrap()
        .expect("first change exists");
    assert_eq!(first.time, ts("2021-02-01T00:00:00Z"), "first change instant");
    assert_eq!(first.trigger.to_string(), "libw@1.1.0", "first trigger");
    let second = next_change(&graph, &app, first.time, &config)
        .unwrap()
        .expect("second change exists");
    assert_eq!(second.time, ts("2021-03-01T00:00:00Z"), "second change instant");
    assert_eq!(second.trigger.to_string(), "libv@1.0.1", "second trigger");
    assert!(
        next_change(&graph, &app, second.time, &config).unwrap().is_none(),
        "no third change"
    );
    let entries = timeline(&graph, &app, from, to, TimelineMode::EveryChange, &config).unwrap();
    assert_eq!(entries.len(), 3, "window start plus exactly 2 change entries");

    // The clean patch eliminates the advisory after exactly 50 days.
    let life = lifecycle(&graph, &app, from, to, &config).unwrap();
    assert_eq!(life.records.len(), 1, "one exposure interval");
    let record = &life.records[0];
    assert_eq!(record.advisory, "ADV-V");
    assert_eq!(record.introduced_at, from);
    assert_eq!(record.eliminated_at, Some(second.time));
    let expected_ms = (second.time - from).num_milliseconds();
    assert_eq!(expected_ms, 50 * 24 * 3600 * 1000, "fixture gap is 50 days");
    assert_eq!(record.living_ms, Some(expected_ms), "living time not exact");
    assert!(record.introduced_before_publish, "present before publication");
    assert_eq!(record.eliminated_before_publish, Some(false));
    assert!(!life.summary[0].present_at_end);

    // The ^-ranged path drifts away; the pinned one cannot.
    let moving = classify_paths(&graph, &app, from, to, &config, 1000).unwrap();
    assert_eq!(moving.fates.len(), 1);
    assert!(moving.fates[0].removed, "ranged path should be removed");
    assert_eq!(moving.fates[0].fixed_version_constraints, 0);
    assert!(!moving.fates[0].vulnerable_latest_version);

    let app2 = RootTarget::Package(PackageId::new("app2", ver("1.0.0")));
    let pinned = classify_paths(&graph, &app2, from, to, &config, 1000).unwrap();
    assert_eq!(pinned.fates.len(), 1);
    let fate = &pinned.fates[0];
    assert!(!fate.removed, "pinned path must survive the window");
    assert!(
        fate.fixed_version_constraints >= 1,
        "pin not counted: {:?}",
        fate.constraints
    );
    assert!(fate.vulnerable_latest_version, "pin admits only the vulnerable version");

    format!(
        "2 change events at the 2 scheduled releases; advisory lived \
         {expected_ms} ms (50 days, exact); pinned path kept with \
         {} exact constraint(s)",
        fate.fixed_version_constraints
    )
}

// ---------------------------------------------------------- criterion 7

/// Backtracking remediation vs brute force over every uniform version
/// assignment, on 50 fixtures whose constraints make the two notions of
/// "some clean plan exists" provably coincide.
fn c7_remediation_oracle() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0007);
    let started = Instant::now();
    let mut clean_fixtures = 0usize;
    let mut max_assignments = 0usize;

    for case in 0..50 {
        let fixture = remedy_oracle::gen_fixture(&mut rng);
        let assignments = remedy_oracle::assignment_count(&fixture);
        assert!(
            assignments <= 10_000,
            "case {case}: {assignments} assignments exceed the 10^4 bound"
        );
        max_assignments = max_assignments.max(assignments);

        let mut graph = graph_from_packuments(&fixture.packuments);
        for advisory in &fixture.advisories {
            let advisory: Advisory =
                serde_json::from_value(advisory.clone()).expect("advisory fixtures parse");
            graph.ingest_advisory(&advisory).expect("advisory fixtures ingest");
        }
        graph.recompute_defaults(None);

        let oracle_clean = remedy_oracle::some_assignment_is_clean(&graph, &fixture);

        let target = RootTarget::Package(PackageId::new("app", ver("1.0.0")));
        let config = RemediationConfig {
            branch_budget: usize::MAX,
            ..RemediationConfig::default()
        };
        let outcome = remediate(&graph, &target, &config)
            .unwrap_or_else(|e| panic!("case {case}: remediate failed: {e}"));
        assert!(!outcome.budget_exhausted, "case {case}: unlimited budget ran out");

        assert_eq!(
            outcome.residual_points == 0,
            oracle_clean,
            "case {case}: search says {} clean, {assignments}-assignment oracle says {}",
            outcome.residual_points,
            oracle_clean
        );
        if oracle_clean {
            clean_fixtures += 1;
        }
        assert!(
            outcome.residual_points <= outcome.default_points,
            "case {case}: remediation worsened the default ({} > {})",
            outcome.residual_points,
            outcome.default_points
        );

        // Every edge of the chosen tree must still satisfy its constraint.
        for edge in &outcome.tree.edges {
            let node = outcome
                .tree
                .node_at(&edge.to)
                .unwrap_or_else(|| panic!("case {case}: dangling edge target {}", edge.to));
            let holds = Constraint::parse(&edge.constraint)
                .unwrap()
                .satisfies(&node.version)
                .unwrap();
            assert!(
                holds,
                "case {case}: `{}` violated by {}@{}",
                edge.constraint, node.name, node.version
            );
        }

        // And the emitted lockfile survives a write/read cycle unchanged.
        let lockfile = emit_lockfile(&graph, &outcome.tree);
        let bytes = lockfile_bytes(&lockfile);
        let reread = read_lockfile(&bytes).unwrap_or_else(|e| panic!("case {case}: {e}"));
        assert_eq!(
            bytes,
            lockfile_bytes(&reread),
            "case {case}: lockfile bytes drifted through a round trip"
        );
        let rebuilt = tree_from_lockfile(&reread).unwrap();
        assert_eq!(
            outcome.tree.identities(),
            rebuilt.identities(),
            "case {case}: lockfile lost identities"
        );
    }

    let elapsed = started.elapsed();
    format!(
        "50/50 fixtures (≤{max_assignments} assignments each) agree with the \
         exhaustive oracle on cleanability ({clean_fixtures} cleanable); residual ≤ \
         default and all constraints hold everywhere; lockfiles round-trip \
         byte-identically; {elapsed:.2?}"
    )
}

// ---------------------------------------------------------- criterion 8

/// Ingesting every document twice must leave the graph byte-identical to
/// ingesting once, and the structural invariants must hold: versions
/// ascending, every default edge the plain maximum, affects edges exactly
/// where advisory ranges match.
fn c8_ingest_invariants() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0008);
    let started = Instant::now();
    let mut declarations = 0usize;
    let mut affect_checks = 0usize;

    for case in 0..50 {
        let registry = sim::gen_registry(&mut rng);
        let docs = registry.packuments();
        let advisories = gen_advisories(&mut rng, &registry);

        let build = |rounds: usize| -> DepGraph {
            let mut graph = DepGraph::new();
            for _ in 0..rounds {
                for json in &docs {
                    let doc = PackumentDoc::from_value(json.clone()).unwrap();
                    graph.ingest_packument(&doc).unwrap();
                }
                for advisory in &advisories {
                    graph.ingest_advisory(advisory).unwrap();
                }
                graph.recompute_defaults(None);
            }
            graph
        };
        let once = build(1);
        let twice = build(2);
        assert_eq!(
            serde_json::to_vec(&once).unwrap(),
            serde_json::to_vec(&twice).unwrap(),
            "case {case}: double ingestion changed the graph"
        );

        let (decls, affects) = check_graph_invariants(&once, case);
        declarations += decls;
        affect_checks += affects;
    }

    let elapsed = started.elapsed();
    format!(
        "50 registries byte-idempotent under double ingestion; version order, \
         {declarations} default edges and {affect_checks} affects checks all \
         consistent; {elapsed:.2?}"
    )
}

fn gen_advisories(rng: &mut impl Rng, registry: &sim::SimRegistry) -> Vec<Advisory> {
    let names: Vec<&String> = registry.libs.keys().collect();
    (0..rng.gen_range(1..=4))
        .map(|i| {
            let library = names[rng.gen_range(0..names.len())].clone();
            let pivot = sim::VERSION_POOL[rng.gen_range(0..sim::VERSION_POOL.len())];
            let affected_range = match rng.gen_range(0..5) {
                0 => "*".to_string(),
                1 => format!("={pivot}"),
                2 => format!("<={pivot}"),
                3 => format!("^{pivot}"),
                _ => format!("<{pivot}"),
            };
            Advisory {
                id: format!("ADV-{i}"),
                library,
                affected_range,
                publish_time: sim::base_time() + Duration::days(rng.gen_range(0..60)),
                severity: None,
            }
        })
        .collect()
}

/// Returns (dependency declarations examined, affects memberships checked).
fn check_graph_invariants(graph: &DepGraph, case: usize) -> (usize, usize) {
    let catalog: BTreeMap<String, Vec<Version>> = graph
        .libs()
        .map(|lib| (lib.name.clone(), lib.version_numbers().cloned().collect()))
        .collect();

    let mut declarations = 0usize;
    let mut affect_checks = 0usize;
    for lib in graph.libs() {
        // Upper-chain order: versions strictly ascending.
        for pair in lib.versions().windows(2) {
            assert!(
                pair[0].version < pair[1].version,
                "case {case}: {} versions out of order",
                lib.name
            );
        }

        for node in lib.versions() {
            // Default-edge maximality: exactly the plain max_satisfying.
            for decl in &node.dependencies {
                declarations += 1;
                let expected = match &decl.parsed {
                    ParsedConstraint::Valid(c) if c.is_testable() => catalog
                        .get(&decl.name)
                        .and_then(|versions| c.max_satisfying(versions.iter()))
                        .cloned(),
                    _ => None,
                };
                assert_eq!(
                    decl.default_target, expected,
                    "case {case}: default edge of {}@{} -> {} `{}` is not the plain maximum",
                    lib.name, node.version, decl.name, decl.raw
                );
            }

            // Affects consistency: membership exactly matches the range.
            for id in &node.vuln_ids {
                let vuln = graph
                    .vuln(id)
                    .unwrap_or_else(|| panic!("case {case}: dangling advisory id {id}"));
                assert_eq!(vuln.library, lib.name, "case {case}: advisory on wrong library");
                assert!(
                    lib.advisory_ids().contains(id),
                    "case {case}: library-level affects edge missing for {id}"
                );
            }
        }
    }

    for vuln in graph.vulns() {
        let lib = graph
            .lib(&vuln.library)
            .unwrap_or_else(|| panic!("case {case}: advisory {} targets unknown library", vuln.id));
        for node in lib.versions() {
            affect_checks += 1;
            let in_range = vuln.range.satisfies(&node.version).unwrap_or(false);
            assert_eq!(
                node.vuln_ids.contains(&vuln.id),
                in_range,
                "case {case}: affects edge for {} on {}@{} disagrees with its range",
                vuln.id,
                lib.name,
                node.version
            );
        }
    }

    // The full-scan statistics must agree with a recount from the nodes.
    let stats = graph.stats();
    let recount_affects: usize = graph
        .libs()
        .flat_map(|l| l.versions())
        .map(|n| n.vuln_ids.len())
        .sum();
    assert_eq!(stats.affects_edges, recount_affects, "case {case}: affects count");
    let recount_pairs: BTreeSet<(String, String)> = graph
        .libs()
        .flat_map(|l| {
            l.versions()
                .iter()
                .flat_map(move |n| n.vuln_ids.iter().map(move |id| (id.clone(), l.name.clone())))
        })
        .collect();
    assert_eq!(
        stats.libaffects_edges,
        recount_pairs.len(),
        "case {case}: library-level affects count"
    );

    (declarations, affect_checks)
}
