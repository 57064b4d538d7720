//! End-to-end behavior of the command-line interface: flag validation, exit
//! codes, formats, and the documented column semantics.

use std::process::Command;

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_rdl"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn data_rows(csv: &str) -> Vec<String> {
    csv.trim_end().split('\n').skip(1).map(str::to_string).collect()
}

fn col(csv: &str, name: &str) -> usize {
    csv.split('\n')
        .next()
        .unwrap()
        .split(',')
        .position(|c| c == name)
        .unwrap_or_else(|| panic!("column {name}"))
}

fn field(csv: &str, row: usize, name: &str) -> String {
    let idx = col(csv, name);
    data_rows(csv)[row].split(',').nth(idx).unwrap().to_string()
}

fn numeric(csv: &str, row: usize, name: &str) -> f64 {
    field(csv, row, name).parse().unwrap()
}

#[test]
fn point_emits_expected_values() {
    let (code, csv, err) = run(&["point", "--k", "3", "--h", "0.5", "--sigma-x2", "1", "--sigma-q2", "6"]);
    assert_eq!(code, 0, "stderr: {err}");
    assert_eq!(data_rows(&csv).len(), 1);
    assert!((numeric(&csv, 0, "d_achievable") - 0.6655414900351417).abs() < 1e-9);
    assert!((numeric(&csv, 0, "r_sum_dist") - 0.5560756729827793).abs() < 1e-9);
    assert!((numeric(&csv, 0, "r_sum_ceo") - 0.7881204275415611).abs() < 1e-9);
    assert!((numeric(&csv, 0, "leakage_formula") - 0.2966665579769748).abs() < 1e-9);
    assert_eq!(field(&csv, 0, "units"), "bits");
}

#[test]
fn point_units_switch_only_rescales_information_columns() {
    let (_, bits, _) = run(&["point", "--k", "3", "--h", "0.5", "--sigma-x2", "1", "--sigma-q2", "6"]);
    let (_, nats, _) = run(&[
        "point", "--k", "3", "--h", "0.5", "--sigma-x2", "1", "--sigma-q2", "6", "--units", "nats",
    ]);
    let ln2 = std::f64::consts::LN_2;
    assert!(
        (numeric(&nats, 0, "r_sum_dist") - numeric(&bits, 0, "r_sum_dist") * ln2).abs() < 1e-12
    );
    assert_eq!(field(&nats, 0, "units"), "nats");
    // distortion columns carry variance units and must not change
    assert_eq!(field(&nats, 0, "d_achievable"), field(&bits, 0, "d_achievable"));
}

#[test]
fn point_validates_parameters_with_flag_names() {
    let (code, _, err) = run(&["point", "--k", "1", "--h", "0.5", "--sigma-x2", "1", "--sigma-q2", "6"]);
    assert_eq!(code, 1);
    assert!(err.contains("--k"), "stderr: {err}");
    let (code, _, err) = run(&["point", "--k", "3", "--h", "-1", "--sigma-x2", "1", "--sigma-q2", "6"]);
    assert_eq!(code, 1);
    assert!(err.contains("--h"));
    let (code, _, err) = run(&["point", "--k", "3", "--h", "0.5", "--sigma-x2", "1", "--sigma-q2", "-2"]);
    assert_eq!(code, 1);
    assert!(err.contains("--sigma-q2"));
    let (code, _, err) = run(&["point", "--k", "3", "--h", "0.5", "--sigma-x2", "1"]);
    assert_eq!(code, 1);
    assert!(err.contains("--sigma-q2") && err.contains("--distortion"));
}

#[test]
fn point_distortion_outside_range_is_infeasible() {
    let (code, _, err) = run(&[
        "point", "--k", "3", "--h", "0.25", "--sigma-x2", "1", "--distortion", "0.55",
    ]);
    assert_eq!(code, 2);
    assert!(err.contains("0.55"), "stderr: {err}");
}

#[test]
fn point_round_trips_distortion_and_noise() {
    let (_, csv, _) = run(&["point", "--k", "4", "--h", "0.5", "--sigma-x2", "1", "--sigma-q2", "6"]);
    let d = field(&csv, 0, "d_achievable");
    let (code, back, err) = run(&["point", "--k", "4", "--h", "0.5", "--sigma-x2", "1", "--distortion", &d]);
    assert_eq!(code, 0, "stderr: {err}");
    let sq2 = numeric(&back, 0, "sigma_q2");
    assert!(
        (sq2 - 6.0).abs() / 6.0 < 1e-8,
        "round-tripped noise {sq2} (expected 6 to 1e-8 relative)"
    );
}

#[test]
fn point_zero_noise_keeps_distortion_and_leakage_but_not_rates() {
    let (code, csv, _) = run(&["point", "--k", "3", "--h", "0.5", "--sigma-x2", "1", "--sigma-q2", "0"]);
    assert_eq!(code, 0);
    assert_eq!(field(&csv, 0, "r_sum_dist"), "NA");
    assert_eq!(field(&csv, 0, "r_per_user_limit"), "NA");
    assert!((numeric(&csv, 0, "d_achievable") - 0.6628098207627277).abs() < 1e-9);
    let leak = numeric(&csv, 0, "leakage_exact");
    assert!((leak - 0.2966665579769749).abs() < 1e-9);
}

#[test]
fn point_worst_case_distortion_target_uses_the_sentinel() {
    // at the degenerate configuration every noise level attains the target,
    // so the noise column is NA and rate columns are undefined
    let (code, csv, err) = run(&[
        "point", "--k", "3", "--h", "0.25", "--sigma-x2", "1", "--distortion", "0.6",
    ]);
    assert_eq!(code, 0, "stderr: {err}");
    assert_eq!(field(&csv, 0, "sigma_q2"), "NA");
    assert_eq!(field(&csv, 0, "r_sum_dist"), "NA");
    assert!((numeric(&csv, 0, "d_achievable") - 0.6).abs() < 1e-12);
}

#[test]
fn point_text_format_prints_key_value_lines() {
    let (code, text, _) = run(&[
        "point", "--k", "3", "--h", "0.5", "--sigma-x2", "1", "--sigma-q2", "6", "--format", "text",
    ]);
    assert_eq!(code, 0);
    assert!(text.lines().count() == 19);
    assert!(text.starts_with("k: 3\n"));
    assert!(text.contains("leakage_exact: "));
}

#[test]
fn sweep_emits_ascending_rows_with_protocol_ordering() {
    let (code, csv, err) = run(&[
        "sweep", "--k-min", "2", "--k-max", "10", "--k-step", "1", "--h", "0.5", "--sigma-x2", "1",
        "--sigma-q2", "6",
    ]);
    assert_eq!(code, 0, "stderr: {err}");
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 9);
    let limit = numeric(&csv, 0, "r_per_user_limit");
    let mut prev_dist = f64::INFINITY;
    for i in 0..rows.len() {
        assert_eq!(numeric(&csv, i, "k") as usize, i + 2);
        let dist = numeric(&csv, i, "r_per_user_dist");
        let ceo = numeric(&csv, i, "r_per_user_ceo");
        assert!(ceo > dist, "row {i}");
        assert!(dist > limit, "row {i}: per-user rate sits above its limit");
        // decreasing toward the limit once past the small-K hump (peak K = 5 here)
        if i >= 4 {
            assert!(dist < prev_dist, "row {i}: per-user rate decreasing");
        }
        prev_dist = dist;
    }
}

#[test]
fn sweep_accepts_k_list_and_rejects_bad_lists() {
    let (code, csv, _) = run(&[
        "sweep", "--k-list", "2,5,9", "--h", "0.5", "--sigma-x2", "1", "--sigma-q2", "6",
    ]);
    assert_eq!(code, 0);
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 3);
    assert_eq!(numeric(&csv, 2, "k") as usize, 9);
    let (code, _, err) = run(&[
        "sweep", "--k-list", "5,3", "--h", "0.5", "--sigma-x2", "1", "--sigma-q2", "6",
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("--k-list"));
    let (code, _, err) = run(&["sweep", "--h", "0.5", "--sigma-x2", "1", "--sigma-q2", "6"]);
    assert_eq!(code, 1);
    assert!(err.contains("--k-min") || err.contains("--k-list"));
}

#[test]
fn sweep_skip_flags_blank_optional_columns() {
    let (code, csv, _) = run(&[
        "sweep", "--k-list", "12,14", "--h", "0.1", "--sigma-x2", "2", "--sigma-q2", "100",
        "--skip-outer", "--skip-exact-leakage",
    ]);
    assert_eq!(code, 0);
    assert_eq!(field(&csv, 0, "r1_outer"), "NA");
    assert_eq!(field(&csv, 0, "leakage_exact"), "NA");
    // without the skip, these configurations have feasible calibrations
    let (_, full, _) = run(&[
        "sweep", "--k-list", "12,14", "--h", "0.1", "--sigma-x2", "2", "--sigma-q2", "100",
    ]);
    assert!(field(&full, 0, "r1_outer") != "NA");
    assert!(field(&full, 0, "leakage_exact") != "NA");
}

#[test]
fn sweep_writes_to_file_with_lf_endings() {
    let dir = std::env::temp_dir().join("rdl-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("sweep.csv");
    let path_s = path.to_str().unwrap();
    let (code, _, err) = run(&[
        "sweep", "--k-min", "2", "--k-max", "4", "--h", "1", "--sigma-x2", "1", "--sigma-q2", "1",
        "--output", path_s,
    ]);
    assert_eq!(code, 0, "stderr: {err}");
    let contents = std::fs::read_to_string(&path).unwrap();
    assert!(!contents.contains('\r'));
    assert_eq!(contents.trim_end().split('\n').count(), 4);
    std::fs::remove_file(&path).unwrap();
}

#[test]
fn figure1_requires_output_for_plot_script() {
    let (code, _, err) = run(&["figure1", "--emit-plot-script"]);
    assert_eq!(code, 1);
    assert!(err.contains("--output"));
}

#[test]
fn figure1_closed_form_leakage_tracks_best_case_information() {
    let (code, csv, _) = run(&["figure1", "--k-max", "30"]);
    assert_eq!(code, 0);
    for i in 0..29 {
        let formula = numeric(&csv, i, "leakage_formula");
        let sx2 = numeric(&csv, i, "sigma_x2");
        let d_min = numeric(&csv, i, "d_min");
        let reference = 0.5 * (sx2 / d_min).ln() / std::f64::consts::LN_2;
        assert!((formula - reference).abs() < 1e-6, "row {i}");
    }
}

#[test]
fn validate_small_grid_passes() {
    let (code, out, err) = run(&["validate", "--grid", "small", "--mc-samples", "20000"]);
    assert_eq!(code, 0, "stdout: {out}\nstderr: {err}");
    assert_eq!(out.matches("suite ").count(), 9);
    assert!(out.contains("validation: 9/9 suites passed"));
}

#[test]
fn validate_reports_failures_with_exit_code_4() {
    // an impossible tolerance forces the suite to fail and be named
    let (code, out, err) = run(&[
        "validate", "--grid", "small", "--mc-samples", "20000", "--tolerance",
        "closed-form-distortion=1e-30",
    ]);
    assert_eq!(code, 4, "stdout: {out}");
    assert!(err.contains("closed-form-distortion"));
    let (code, _, err) = run(&["validate", "--tolerance", "no-such-suite=1"]);
    assert_eq!(code, 1);
    assert!(err.contains("--tolerance"));
}

#[test]
fn help_and_version_succeed() {
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("point") && out.contains("sweep"));
    let (code, _, _) = run(&["--version"]);
    assert_eq!(code, 0);
}

#[test]
fn unknown_flags_exit_with_invalid_parameter() {
    let (code, _, _) = run(&["point", "--nope", "3"]);
    assert_eq!(code, 1);
}
