use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_doamp");
const PLUGIN: &str = env!("CARGO_BIN_EXE_doamp-refplugin");

fn doamp(args: &[&str]) -> (i32, String) {
    let out = Command::new(BIN).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
    )
}

#[test]
fn recover_writes_trace_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    let (code, _) = doamp(&[
        "recover",
        "--matrix",
        "partial-dct",
        "--rate",
        "0.5",
        "--algo",
        "doamp",
        "--denoiser",
        "let:1,2,3",
        "--iters",
        "10",
        "--sigma2",
        "1e-4",
        "--seed",
        "1",
        "--synthetic",
        "2048,0.1",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("t,sigma_hat2,v_hat2,residual_norm2,nmse\n"));
}

#[test]
fn invalid_arguments_exit_with_2() {
    for args in [
        vec!["recover", "--synthetic", "64,0.1", "--rate", "1.5"],
        vec!["recover", "--synthetic", "64,0.1", "--denoiser", "median"],
        vec!["recover", "--synthetic", "64"],
        vec!["recover"],
        vec!["frobnicate"],
    ] {
        assert_eq!(doamp(&args).0, 2, "{args:?}");
    }
}

#[test]
fn io_and_plugin_failures_exit_with_4() {
    assert_eq!(
        doamp(&["recover", "--input", "/nonexistent/image.pgm"]).0,
        4
    );
    let bad = format!("plugin:{PLUGIN} wrong-length");
    assert_eq!(
        doamp(&["recover", "--synthetic", "64,0.1", "--denoiser", &bad]).0,
        4
    );
}

#[test]
fn flagged_divergence_exits_with_3() {
    let amplify = format!("plugin:{PLUGIN} scale 3");
    let (code, _) = doamp(&[
        "recover",
        "--algo",
        "damp",
        "--synthetic",
        "256,0.1",
        "--denoiser",
        &amplify,
        "--iters",
        "30",
        "--stop-tol",
        "0",
    ]);
    assert_eq!(code, 3);
}

#[test]
fn gen_writes_raw_vector_usable_as_input() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("x.bin");
    let (code, _) = doamp(&[
        "gen",
        "--synthetic",
        "300,0.2",
        "--seed",
        "5",
        "--out",
        file.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(std::fs::metadata(&file).unwrap().len(), 300 * 8);
    let (code, stdout) = doamp(&[
        "se",
        "--input",
        file.to_str().unwrap(),
        "--iters",
        "3",
        "--samples",
        "2",
    ]);
    assert_eq!(code, 0);
    assert_eq!(stdout.lines().count(), 5);
    assert!(stdout.starts_with("t,v2,tau2,predicted_output_mse\n"));
}

#[test]
fn compare_prints_paired_columns() {
    let (code, stdout) = doamp(&[
        "compare",
        "--trials",
        "2",
        "--synthetic",
        "1024,0.1",
        "--iters",
        "4",
        "--samples",
        "2",
        "--snr-db",
        "40",
    ]);
    assert_eq!(code, 0);
    let mut lines = stdout.lines();
    assert_eq!(lines.next(), Some("t,sim_nmse,se_nmse"));
    assert_eq!(lines.count(), 4);
}
