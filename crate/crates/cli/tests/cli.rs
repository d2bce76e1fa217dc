use std::path::Path;
use std::process::{Command, Output};

fn mmv2v(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmv2v"))
        .args(args)
        .env("MMV2V_OUT", out)
        .output()
        .expect("binary runs")
}

fn dirs(root: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(root)
        .map(|rd| rd.map(|e| e.unwrap().file_name().into_string().unwrap()).collect())
        .unwrap_or_default();
    v.sort();
    v
}

const SHORT: [&str; 4] = ["--set", "total_time_ms=200", "--set", "highway.segment_length_m=300"];

#[test]
fn run_writes_one_directory_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["run", "--method", "waf:360"];
    args.extend(SHORT);
    let o = mmv2v(&args, tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let d = dirs(tmp.path());
    assert_eq!(d, vec!["waf-360_d70_l0p5_p3200_ts100_s1"]);
    for f in ["config.toml", "summary.json", "cdf_rate.csv", "cdf_delay.csv", "scatter_delay_drop.csv", "table_joint_bounds.json"] {
        assert!(tmp.path().join(&d[0]).join(f).is_file(), "{f}");
    }
    let cfg = std::fs::read_to_string(tmp.path().join(&d[0]).join("config.toml")).unwrap();
    assert!(cfg.contains("fixed_beamwidth_deg = 360"), "{cfg}");
}

#[test]
fn sweep_covers_the_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["sweep", "--densities", "70,130", "--lambdas", "1/6,1/2", "--methods", "mind,asyn", "--seeds", "4"];
    args.extend(SHORT);
    let o = mmv2v(&args, tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let d = dirs(tmp.path());
    assert_eq!(d.len(), 8, "{d:?}");
    assert!(d.contains(&"asyn-5_d130_l0p166667_p3200_ts100_s4".to_string()), "{d:?}");
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().count(), 9, "{stdout}");
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mmv2v(&["run", "--set", "highway.not_a_key=3"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not_a_key"));
    assert!(dirs(tmp.path()).is_empty());
}

#[test]
fn validate_reports_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mmv2v(&["validate"], tmp.path());
    assert!(o.status.success());
    let o = mmv2v(&["validate", "--set", "scheduling_slot_ms=50"], tmp.path());
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("N = 25"));
}

#[test]
fn validate_rejects_unalignable_beams() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mmv2v(&["validate", "--set", "antenna.min_beamwidth_deg=1"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn config_file_is_read() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("c.toml");
    std::fs::write(&path, "seed = 9\nscheduling_slot_ms = 30\n").unwrap();
    let o = mmv2v(&["validate", "--config", path.to_str().unwrap()], tmp.path());
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("N = 15"));
    let missing = tmp.path().join("missing.toml");
    let o = mmv2v(&["run", "--config", missing.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}
