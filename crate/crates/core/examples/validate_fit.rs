//! The command-line pipeline as library calls: generate Matérn II training
//! pairs, fit θ0 and σ, and validate the fit against fresh Matérn samples.
//!
//! cargo run --release --example validate_fit -- [output-dir]

use std::path::PathBuf;

use detthin::cli::{cmd_fit, cmd_generate, cmd_validate, CaseKind, CaseParams, FitArgs, GenerateArgs, ValidateArgs};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Without an output directory everything goes to a temporary one.
    let scratch = tempfile::tempdir()?;
    let kept = std::env::args().nth(1).map(PathBuf::from);
    let dir = kept.clone().unwrap_or_else(|| scratch.path().to_path_buf());
    std::fs::create_dir_all(&dir)?;
    let params = CaseParams { lambda: Some(10.0), rm: Some(0.253), rt: None, retain: 1.0, window: Some("disk:1".into()) };

    let training = dir.join("train.jsonl");
    cmd_generate(&GenerateArgs {
        kind: CaseKind::Matern2,
        params: params.clone(),
        model: None,
        margin: 0.0,
        count: 100,
        seed: 1,
        out: training.clone(),
        config: None,
    })?;

    let model = dir.join("model.json");
    cmd_fit(&FitArgs {
        training,
        sigma_grid: None,
        mask: vec!["theta0".into(), "sigma".into()],
        init_theta: None,
        max_iters: 200,
        grad_tol: 1e-7,
        out: model.clone(),
        config: None,
    })?;

    let report = cmd_validate(&ValidateArgs {
        model,
        case: CaseKind::Matern2,
        params,
        n: 2000,
        seed: 2,
        threshold: 0.05,
        grid_points: 64,
        margin: 0.0,
        out: dir.join("report.json"),
        config: None,
    })?;
    println!("all checked curves within {}: {}", report.threshold, report.pass);
    if let Some(dir) = kept {
        println!("training set, model, report and manifests in {}", dir.display());
    }
    Ok(())
}
