use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tauberian(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tauberian"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

#[test]
fn means_and_kernel_succeed() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["means", "kernel"] {
        let o = tauberian(&["run", name], dir.path());
        assert_eq!(o.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        let csv = fs::read_to_string(dir.path().join(format!("{name}.csv"))).unwrap();
        assert!(csv.lines().count() > 2);
        assert!(String::from_utf8_lossy(&o.stdout).contains(&format!("{name}.csv")));
    }
}

#[test]
fn unknown_name_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = tauberian(&["run", "nonsense"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("usage"));
    assert!(!dir.path().join("nonsense.csv").exists());
}

#[test]
fn bad_grid_and_preset_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(tauberian(&["run", "means", "--preset", "square"], dir.path()).status.code(), Some(1));
    assert_eq!(tauberian(&["run", "means", "--lambda-grid", "0.5,abc"], dir.path()).status.code(), Some(1));
    assert_eq!(tauberian(&["run", "kernel", "--lambda-grid", "-1"], dir.path()).status.code(), Some(1));
}

#[test]
fn output_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["run", "discrete", "--seed", "11", "--n-grid", "4,16,64", "--lambda-grid", "0.1,0.01"];
    assert_eq!(tauberian(&args, a.path()).status.code(), Some(0));
    assert_eq!(tauberian(&args, b.path()).status.code(), Some(0));
    let x = fs::read(a.path().join("discrete.csv")).unwrap();
    let y = fs::read(b.path().join("discrete.csv")).unwrap();
    assert_eq!(x, y);
}

#[test]
fn graph_file_drives_the_discrete_run() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.txt");
    fs::write(&graph, "# two loops\n1 1 1 2\n2 0 3\n3 1 2\n").unwrap();
    let o = tauberian(&["run", "discrete", "--graph", graph.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("discrete.csv")).unwrap();
    assert!(csv.contains("g.txt"));

    fs::write(&graph, "1 1 7\n").unwrap();
    let o = tauberian(&["run", "discrete", "--graph", graph.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn presets_change_the_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let mut seen = Vec::new();
    for p in ["square-wave", "dyadic", "constant"] {
        let o = tauberian(&["run", "means", "--preset", p], dir.path());
        assert_eq!(o.status.code(), Some(0), "{p}: {}", String::from_utf8_lossy(&o.stderr));
        let csv = fs::read_to_string(dir.path().join("means.csv")).unwrap();
        assert!(csv.contains(p));
        seen.push(csv);
    }
    assert_ne!(seen[0], seen[1]);
    assert_ne!(seen[1], seen[2]);
}
