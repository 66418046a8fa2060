use std::fs;
use std::path::Path;

use serde_json::Value;
use sha2::{Digest, Sha256};
use snlw::cli::{main_with_args, Command, ExperimentConfig};
use snlw::diagnostics::{fit_regularity, AnnuliSpec, ModeMoment};

fn run(dir: &Path, args: &[&str]) -> i32 {
    let mut v = vec!["snlw".to_string()];
    v.extend(args.iter().map(|s| s.to_string()));
    v.push("--out".into());
    v.push(dir.to_string_lossy().into_owned());
    main_with_args(v)
}

fn rows(p: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(p).unwrap();
    r.records()
        .map(|x| x.unwrap().iter().map(str::to_string).collect())
        .collect()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn sha_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn sigma_table_is_nondecreasing_and_manifest_checksums_match() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("sigma");
    assert_eq!(run(&d, &["sigma", "--N", "4", "--steps", "10"]), 0);
    let r = rows(&d.join("sigma.csv"));
    assert_eq!(r.len(), 11);
    let vals: Vec<f64> = r.iter().map(|x| x[2].parse().unwrap()).collect();
    assert_eq!(vals[0], 0.0);
    assert!(vals.windows(2).all(|w| w[1] >= w[0]));

    let m = manifest(&d);
    assert_eq!(m["status"], "ok");
    let outs = m["outputs"].as_array().unwrap();
    let names: Vec<&str> = outs.iter().map(|o| o["file"].as_str().unwrap()).collect();
    assert_eq!(names, ["config.txt", "sigma.csv"]);
    for o in outs {
        let bytes = fs::read(d.join(o["file"].as_str().unwrap())).unwrap();
        assert_eq!(o["sha256"].as_str().unwrap(), sha_hex(&bytes));
        assert_eq!(o["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }
}

#[test]
fn converge_output_is_bitwise_stable_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let base = ["converge", "--levels", "2,4", "--replicas", "6", "--steps", "20", "--t-max", "0.2"];
    let mut outs = Vec::new();
    for (i, threads) in ["1", "3", "3"].iter().enumerate() {
        let d = tmp.path().join(format!("c{i}"));
        let mut a = base.to_vec();
        a.extend(["--threads", threads]);
        assert_eq!(run(&d, &a), 0);
        outs.push(fs::read(d.join("cauchy.csv")).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
    assert_eq!(outs[1], outs[2]);
}

#[test]
fn regularity_fit_is_reproducible_from_the_moment_table() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("reg");
    let args = [
        "regularity", "--object", "tree30", "--N", "8", "--replicas", "8", "--steps", "8",
        "--t-max", "0.5",
    ];
    assert_eq!(run(&d, &args), 0);
    let moments: Vec<ModeMoment> = rows(&d.join("moments.csv"))
        .iter()
        .map(|r| ModeMoment {
            n: [r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap()],
            mean: r[3].parse().unwrap(),
            stderr: r[4].parse().unwrap(),
        })
        .collect();
    let fit = fit_regularity(&moments, AnnuliSpec::default()).unwrap();
    let row = &rows(&d.join("fit.csv"))[0];
    assert_eq!(row[7].parse::<f64>().unwrap(), fit.slope);
    assert_eq!(row[9].parse::<f64>().unwrap(), fit.stderr);
    assert_eq!(rows(&d.join("annuli.csv")).len(), fit.annuli.len());
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |s: &str| tmp.path().join(s);

    assert_eq!(run(&p("a"), &["simulate", "--alpha=-1"]), 2);
    assert_eq!(run(&p("b"), &["simulate", "--window", "triangle"]), 2);
    assert_eq!(run(&p("c"), &["converge", "--levels", "4,2"]), 2);

    assert_eq!(run(&p("d"), &["counting", "--ladder", "1,2", "--budget", "100"]), 4);
    let e: Value = serde_json::from_slice(&fs::read(p("d").join("error.json")).unwrap()).unwrap();
    assert_eq!(e["exit_code"], 4);
    assert_eq!(manifest(&p("d"))["status"], "budget-exceeded");

    let blow = [
        "simulate", "--N", "2", "--replicas", "2", "--steps", "10", "--amplitude", "1e6",
        "--h1-ceiling", "10",
    ];
    assert_eq!(run(&p("e"), &blow), 3);
    let m = manifest(&p("e"));
    assert_eq!(m["partial"], true);
    let files: Vec<&str> = m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["file"].as_str().unwrap())
        .collect();
    assert!(files.contains(&"timeseries.csv") && files.contains(&"error.json"));
    assert!(!rows(&p("e").join("timeseries.csv")).is_empty());
}

#[test]
fn dumps_carry_the_documented_header() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("sim");
    let args = [
        "simulate", "--N", "2", "--replicas", "2", "--steps", "5", "--t-max", "0.05",
        "--amplitude", "0.1", "--dump",
    ];
    assert_eq!(run(&d, &args), 0);
    let b = fs::read(d.join("u_r0001.bin")).unwrap();
    assert_eq!(&b[..4], b"WWF1");
    let n = u32::from_le_bytes(b[4..8].try_into().unwrap()) as usize;
    let t = f64::from_le_bytes(b[12..20].try_into().unwrap());
    assert_eq!(n, 4);
    assert!((t - 0.05).abs() < 1e-12);
    let side = 2 * n + 1;
    assert_eq!(b.len(), 20 + side * side * side * 16);
}

#[test]
fn config_file_then_flags_then_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("run.cfg");
    fs::write(&cfg_path, "# sweep\nN = 4\nsteps = 10\nalpha = 0.5\n").unwrap();
    let d = tmp.path().join("s");
    let args = ["sigma", "--config", cfg_path.to_str().unwrap(), "--alpha", "0.125"];
    assert_eq!(run(&d, &args), 0);
    let text = fs::read_to_string(d.join("config.txt")).unwrap();
    assert!(text.starts_with("command = sigma\n"));
    assert!(text.contains("alpha = 0.125\n") && text.contains("N = 4\n"));

    let mut a = ExperimentConfig::defaults(Command::Sigma);
    a.apply_text("N = 4\nsteps = 10\nalpha = 0.125").unwrap();
    let mut b = a.clone();
    b.set("threads", "7").unwrap();
    assert_eq!(a.hash(), b.hash());
    assert_eq!(manifest(&d)["config_hash"], a.hash());
    b.set("seed", "1").unwrap();
    assert_ne!(a.hash(), b.hash());
}
