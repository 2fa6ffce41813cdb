use std::path::Path;
use std::process::{Command, Output};

use mpcs_core::ensemble::combine_background;
use mpcs_core::output::read_csv;

fn mpcs(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpcs"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn column(header: &[String], rows: &[Vec<f64>], name: &str) -> Vec<f64> {
    let j = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[j]).collect()
}

#[test]
fn undriven_spectrum_is_dark() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("dark.toml");
    std::fs::write(&cfg, "amps = [0.0, 0.0, 0.0]\n").unwrap();
    let out = mpcs(&["spectrum", "--grid=-1:1:0.5", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("spectrum.csv")).unwrap();
    assert_eq!(rows.len(), 5);
    assert!(column(&header, &rows, "npcr").iter().all(|v| *v == 0.0));
    assert!(column(&header, &rows, "rho00").iter().all(|v| (v - 1.0).abs() < 1e-12));
}

#[test]
fn spectrum_header_carries_run_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = mpcs(&["spectrum", "--grid=-3.2:-3.1:0.05", "--q", "2"], dir.path());
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    for key in ["# g_f: 63", "# q: 2", "# q_max: 4", "# delta_grid: -3.2:-3.1:0.05", "# escalated_solves:"] {
        assert!(text.contains(key), "missing {key}");
    }
    assert!(text.lines().any(|l| l == "delta3_tilde,npcr,rho00,rho33pp"));
}

#[test]
fn output_does_not_depend_on_workers() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["spectrum", "--grid=-3.5:1.5:0.5"];
    assert!(mpcs(&[&args[..], &["--workers", "1"]].concat(), a.path()).status.success());
    assert!(mpcs(&[&args[..], &["--workers", "4"]].concat(), b.path()).status.success());
    let read = |d: &Path| std::fs::read(d.join("spectrum.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn background_columns_recombine() {
    let dir = tempfile::tempdir().unwrap();
    let out = mpcs(&["background", "--grid=-3.3:-3.0:0.1"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("background.csv")).unwrap();
    let col = |name: &str| column(&header, &rows, name);
    let names: Vec<&String> = header.iter().filter(|h| h.starts_with("npcr")).collect();
    assert_eq!(names.len(), 4, "{header:?}");
    let recombined = combine_background(&col(names[0]), &col(names[1]), &col(names[2]), &col(names[3]));
    let delta = col("delta3_npcr");
    // Each CSV value is rounded to 9 significant digits.
    let scale = names.iter().flat_map(|n| col(n)).fold(0.0f64, |m, v| m.max(v.abs()));
    for (x, y) in recombined.iter().zip(&delta) {
        assert!((x - y).abs() <= 3e-8 * scale, "{x} vs {y}");
    }
}

#[test]
fn bad_input_exits_with_configuration_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "bogus = 1\n").unwrap();
    for args in [
        vec!["spectrum", "--config", cfg.to_str().unwrap()],
        vec!["spectrum", "--grid=1:0:0.1"],
        vec!["spectrum", "--workers", "0"],
        vec!["spectrum", "--distribution", "lorentzian"],
    ] {
        let out = mpcs(&args, dir.path());
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn validate_passes_on_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = mpcs(&["validate"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(dir.path().join("validation.json").exists());
}
