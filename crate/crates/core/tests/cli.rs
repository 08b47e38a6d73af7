use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_enskog");

fn small_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("scenario.cfg");
    let text = format!(
        "geometry.length = 4\ngeometry.n_x = 4\nvelocity.n_v = 8\nvelocity.xi_max = 4.5\nsphere.order = 6\n\
         run.t_end = 0.1\nrun.output_stride = 1\nrun.threads = 1\n{body}"
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(BIN).args(args).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout).to_string() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap(), text)
}

#[test]
fn unknown_key_is_a_config_error_in_strict_mode() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "run.colour = red\n");
    let (code, text) = run(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 2, "{text}");
    assert!(text.contains("run.colour"));
}

#[test]
fn dense_van_der_waals_state_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "initial.kind = uniform\ninitial.rho = 0.574\n");
    let (code, text) = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2, "{text}");
    assert!(text.contains("initial.rho"));
}

#[test]
fn equilibrium_run_writes_artifacts_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "scenario = uniform-equilibrium\ninitial.kind = uniform\ninitial.rho = 0.1\n");
    let mut series = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let (code, text) = run(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code, 0, "{text}");
        for file in ["series.csv", "final.txt", "resolved.cfg", "frame_000000.csv"] {
            assert!(out.join(file).exists(), "missing {file}");
        }
        series.push(std::fs::read(out.join("series.csv")).unwrap());
    }
    assert_eq!(series[0], series[1]);
    let text = String::from_utf8(series.remove(0)).unwrap();
    assert!(text.starts_with("# schema_version=1\nt,mass,momentum_x,energy,h,h_k,h_c,f,f_tilde,max_production,min_slack\n"));
}

#[test]
fn resolved_config_reparses_to_the_same_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "initial.kind = uniform\ninitial.rho = 0.1\n");
    let out = dir.path().join("first");
    let (code, text) = run(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    let echo = out.join("resolved.cfg");
    let again = dir.path().join("second");
    let (code, text) = run(&["run", "--config", echo.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    assert_eq!(
        std::fs::read(out.join("series.csv")).unwrap(),
        std::fs::read(again.join("series.csv")).unwrap()
    );
}

#[test]
fn eos_scan_tracks_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "model.contact = cs\n");
    let (code, text) = run(&["eos-scan", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    let csv = std::fs::read_to_string(dir.path().join("eos.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 8);
}
