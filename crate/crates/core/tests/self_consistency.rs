//! A model fitted to its own samples recovers its parameters, and the
//! validation report separates a matching reference from a wrong one.

use detthin::cli::{cmd_fit, cmd_generate, cmd_validate, CaseKind, CaseParams, FitArgs, GenerateArgs, ValidateArgs};
use detthin::estimators::underlying_pattern;
use detthin::fitting::{fit, FitConfig, TrainingPair};
use detthin::geometry::{PoissonModel, Window};
use detthin::io::{self, ModelFile};
use detthin::model::{thin, ThinningModel};
use detthin::seeds::replicate_rng;

#[test]
fn fit_recovers_generating_parameters() {
    let theta = [0.3, 1.5, 0.0, -0.5];
    let sigma = 0.2;
    let truth = ThinningModel::gaussian(theta, sigma, PoissonModel::new(10.0, Window::unit_disk()).unwrap()).unwrap();
    let data: Vec<TrainingPair> = (0..500)
        .map(|t| {
            let mut rng = replicate_rng(17, "recovery", t);
            let full = underlying_pattern(&truth, 0.0, &mut rng).unwrap();
            let kept = thin(&truth, &full, &mut rng).unwrap();
            TrainingPair::new(full, kept).unwrap()
        })
        .collect();
    let result = fit(&data, &FitConfig { sigma_grid: Some(vec![sigma]), ..FitConfig::default() }).unwrap();
    assert!(result.converged);
    for k in 0..4 {
        let se = result.std_errors[k].unwrap();
        let z = (result.theta_star[k] - theta[k]) / se;
        assert!(z.abs() <= 3.0, "θ{k}: {} vs {} (se {se})", result.theta_star[k], theta[k]);
    }
}

fn matern() -> CaseParams {
    CaseParams { lambda: Some(10.0), rm: Some(0.253), rt: None, retain: 1.0, window: Some("disk:1".into()) }
}

fn validate(model: &std::path::Path, case: CaseKind, out: std::path::PathBuf) -> detthin::cli::ValidationReport {
    cmd_validate(&ValidateArgs {
        model: model.to_path_buf(),
        case,
        params: matern(),
        n: 3000,
        seed: 4,
        threshold: 0.05,
        grid_points: 64,
        margin: 0.0,
        out,
        config: None,
    })
    .unwrap()
}

#[test]
fn validation_accepts_own_samples_and_rejects_triangle_fit_on_matern() {
    let dir = tempfile::tempdir().unwrap();
    let training = dir.path().join("triangle.jsonl");
    cmd_generate(&GenerateArgs {
        kind: CaseKind::Triangle,
        params: CaseParams { rt: Some(0.6325), ..matern() },
        model: None,
        margin: 0.0,
        count: 100,
        seed: 8,
        out: training.clone(),
        config: None,
    })
    .unwrap();
    let model = dir.path().join("triangle-model.json");
    cmd_fit(&FitArgs {
        training,
        sigma_grid: None,
        mask: ["theta0", "theta1", "theta2", "theta3", "sigma"].map(String::from).to_vec(),
        init_theta: None,
        max_iters: 200,
        grad_tol: 1e-7,
        out: model.clone(),
        config: None,
    })
    .unwrap();

    let own = validate(&model, CaseKind::Model, dir.path().join("own.json"));
    assert!(own.pass, "{:?}", own.comparisons.iter().map(|c| c.sup_distance).collect::<Vec<_>>());

    let wrong = validate(&model, CaseKind::Matern2, dir.path().join("wrong.json"));
    let g = wrong.comparisons.iter().find(|c| c.name == "G").unwrap();
    assert_eq!(g.pass, Some(false), "G sup {}", g.sup_distance);
    assert!(!wrong.pass);
    let file: ModelFile = io::read_json(&model).unwrap();
    assert!(file.fit.is_some());
}
