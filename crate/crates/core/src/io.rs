//! File formats: point CSV with a window sidecar, model JSON, training JSON
//! lines and curve CSV. Every writer replaces its target atomically.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::estimators::EstimateCurve;
use crate::fitting::{FitResult, TrainingPair};
use crate::geometry::{Point, PointPattern, PoissonModel, Window};
use crate::kernels::SubsetIndex;
use crate::model::{ModelError, QualityParams, SimilarityParams, ThinningModel, DEFAULT_AMPLITUDE, FEATURE_DIM, FEATURE_SPEC};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}, line {line}: {reason}")]
    Malformed { path: PathBuf, line: usize, reason: String },
    #[error("{path}: {reason}")]
    Invalid { path: PathBuf, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

/// Writes `bytes` to a temporary file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| IoError::Io { path: path.to_path_buf(), source: e.error })?;
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String, IoError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Shortest decimal that parses back to the same `f64`.
fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Sidecar path holding the window of a point CSV: `pts.csv` → `pts.window.json`.
pub fn window_sidecar(path: &Path) -> PathBuf {
    path.with_extension("window.json")
}

/// Point CSV (`x,y` header) plus the window sidecar.
pub fn write_points(path: &Path, p: &PointPattern) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "y"]).expect("in-memory write");
    for q in p.points() {
        w.write_record([fmt_f64(q.x), fmt_f64(q.y)]).expect("in-memory write");
    }
    let bytes = w.into_inner().expect("in-memory write");
    write_atomic(path, &bytes)?;
    let window = serde_json::to_vec(p.window()).expect("window serializes");
    write_atomic(&window_sidecar(path), &window)
}

pub fn read_points(path: &Path) -> Result<PointPattern, IoError> {
    let sidecar = window_sidecar(path);
    let window: Window = serde_json::from_slice(&fs::read(&sidecar).map_err(io_err(&sidecar))?)
        .map_err(|e| IoError::Invalid { path: sidecar.clone(), reason: e.to_string() })?;
    let mut reader = csv::Reader::from_path(path).map_err(|e| IoError::Invalid { path: path.into(), reason: e.to_string() })?;
    let headers = reader.headers().map_err(|e| IoError::Malformed { path: path.into(), line: 1, reason: e.to_string() })?;
    if headers.iter().collect::<Vec<_>>() != ["x", "y"] {
        return Err(IoError::Malformed { path: path.into(), line: 1, reason: "header must be x,y".into() });
    }
    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let malformed = |reason: String| IoError::Malformed { path: path.into(), line, reason };
        let record = record.map_err(|e| malformed(e.to_string()))?;
        let coords: Vec<f64> = record
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| malformed(format!("{s:?}: {e}"))))
            .collect::<Result<_, _>>()?;
        match coords[..] {
            [x, y] => points.push(Point::new(x, y)),
            _ => return Err(malformed("expected two columns".into())),
        }
    }
    PointPattern::new(points, window).map_err(|e| IoError::Invalid { path: path.into(), reason: e.to_string() })
}

/// One JSON line of a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingRecord {
    pub full: Vec<[f64; 2]>,
    pub retained_idx: Vec<usize>,
    pub window: Window,
}

impl TrainingRecord {
    pub fn from_pair(pair: &TrainingPair) -> Self {
        Self {
            full: pair.full().points().iter().map(|&p| p.into()).collect(),
            retained_idx: pair.retained().indices().to_vec(),
            window: *pair.full().window(),
        }
    }

    pub fn to_pair(&self) -> Result<TrainingPair, String> {
        let full = PointPattern::new(self.full.iter().map(|&p| p.into()).collect(), self.window)
            .map_err(|e| e.to_string())?;
        let retained = SubsetIndex::new(self.retained_idx.clone()).map_err(|e| e.to_string())?;
        TrainingPair::new(full, retained).map_err(|e| e.to_string())
    }
}

pub fn training_to_jsonl(pairs: &[TrainingPair]) -> String {
    pairs
        .iter()
        .map(|p| serde_json::to_string(&TrainingRecord::from_pair(p)).expect("record serializes") + "\n")
        .collect()
}

pub fn write_training(path: &Path, pairs: &[TrainingPair]) -> Result<(), IoError> {
    write_atomic(path, training_to_jsonl(pairs).as_bytes())
}

/// Reads a JSON-lines training set; blank lines are skipped and errors name the line.
pub fn read_training(path: &Path) -> Result<Vec<TrainingPair>, IoError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut pairs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let text = line.map_err(io_err(path))?;
        if text.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| IoError::Malformed { path: path.into(), line: line_no, reason };
        let record: TrainingRecord = serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))?;
        pairs.push(record.to_pair().map_err(malformed)?);
    }
    Ok(pairs)
}

/// Model file: parameters, the Poisson intensity and window, and optionally the fit that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub theta: [f64; FEATURE_DIM],
    pub sigma: f64,
    #[serde(rename = "C")]
    pub amplitude: f64,
    pub lambda: f64,
    pub window: Window,
    pub feature_spec: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitResult>,
}

impl ModelFile {
    pub fn from_model(m: &ThinningModel) -> Result<Self, ModelError> {
        let (sigma, amplitude) = match m.similarity {
            SimilarityParams::Gaussian { sigma, amplitude } => (sigma, amplitude),
            SimilarityParams::Identity => (0.0, DEFAULT_AMPLITUDE),
            SimilarityParams::Gram { .. } => {
                return Err(ModelError::InvalidParameter("Gram similarities have no file format".into()))
            }
        };
        Ok(Self {
            theta: m.quality.theta,
            sigma,
            amplitude,
            lambda: m.poisson.intensity,
            window: m.poisson.window,
            feature_spec: FEATURE_SPEC.to_string(),
            fit: None,
        })
    }

    pub fn to_model(&self) -> Result<ThinningModel, ModelError> {
        if self.feature_spec != FEATURE_SPEC {
            return Err(ModelError::InvalidParameter(format!(
                "feature_spec {:?} is not supported (expected {FEATURE_SPEC:?})",
                self.feature_spec
            )));
        }
        ThinningModel::new(
            QualityParams::new(self.theta),
            SimilarityParams::Gaussian { sigma: self.sigma, amplitude: self.amplitude },
            PoissonModel::new(self.lambda, self.window)?,
        )
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("value serializes");
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|e| IoError::Malformed {
        path: path.into(),
        line: e.line(),
        reason: e.to_string(),
    })
}

pub fn read_model(path: &Path) -> Result<(ModelFile, ThinningModel), IoError> {
    let file: ModelFile = read_json(path)?;
    let model = file.to_model().map_err(|e| IoError::Invalid { path: path.into(), reason: e.to_string() })?;
    Ok((file, model))
}

/// Curve CSV with header `r,value,se,n`.
pub fn curve_to_csv(c: &EstimateCurve) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["r", "value", "se", "n"]).expect("in-memory write");
    for i in 0..c.len() {
        w.write_record([fmt_f64(c.radii[i]), fmt_f64(c.values[i]), fmt_f64(c.std_errors[i]), c.n_samples.to_string()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("ascii")
}

pub fn write_curve(path: &Path, c: &EstimateCurve) -> Result<(), IoError> {
    write_atomic(path, curve_to_csv(c).as_bytes())
}

pub fn read_curve(path: &Path) -> Result<EstimateCurve, IoError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| IoError::Invalid { path: path.into(), reason: e.to_string() })?;
    let mut c = EstimateCurve { radii: vec![], values: vec![], std_errors: vec![], n_samples: 0 };
    for (i, record) in reader.records().enumerate() {
        let malformed = |reason: String| IoError::Malformed { path: path.into(), line: i + 2, reason };
        let record = record.map_err(|e| malformed(e.to_string()))?;
        let field = |k: usize| record.get(k).ok_or_else(|| malformed("missing column".into()));
        let num = |k: usize| field(k)?.parse::<f64>().map_err(|e| malformed(e.to_string()));
        c.radii.push(num(0)?);
        c.values.push(num(1)?);
        c.std_errors.push(num(2)?);
        c.n_samples = field(3)?.parse().map_err(|e: std::num::ParseIntError| malformed(e.to_string()))?;
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testcases::TestCase;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn points_round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pts.csv");
        let p = PointPattern::new(
            vec![Point::new(0.1, -1.0 / 3.0), Point::new(5e-324, 0.7071067811865476)],
            Window::unit_disk(),
        )
        .unwrap();
        write_points(&path, &p).unwrap();
        assert!(fs::read_to_string(&path).unwrap().starts_with("x,y\n0.1,-0.3333333333333333\n"));
        assert_eq!(read_points(&path).unwrap(), p);
        let sidecar = fs::read_to_string(window_sidecar(&path)).unwrap();
        assert_eq!(sidecar, r#"{"shape":"disk","center":[0.0,0.0],"radius":1.0}"#);
    }

    #[test]
    fn training_round_trip_and_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.jsonl");
        let case = TestCase::matern2(10.0, 0.253, Window::unit_disk()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pairs: Vec<TrainingPair> = (0..3).map(|_| case.sample_pair(&mut rng).unwrap()).collect();
        write_training(&path, &pairs).unwrap();
        assert_eq!(read_training(&path).unwrap(), pairs);
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("{\"full\":[[0.0,0.0]],\"retained_idx\":[3],\"window\":{\"shape\":\"disk\",\"center\":[0.0,0.0],\"radius\":1.0}}\n");
        fs::write(&path, text).unwrap();
        match read_training(&path) {
            Err(IoError::Malformed { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        fs::write(&path, "").unwrap();
        assert!(read_training(&path).unwrap().is_empty());
    }

    #[test]
    fn model_file_layout() {
        let m = ThinningModel::gaussian([0.1, 0.2, 0.3, 0.4], 0.5, PoissonModel::new(10.0, Window::unit_disk()).unwrap())
            .unwrap();
        let file = ModelFile::from_model(&m).unwrap();
        let json = serde_json::to_value(&file).unwrap();
        assert_eq!(json["C"], 1.0);
        assert_eq!(json["feature_spec"], "const,d1,d2,d3");
        assert_eq!(json["window"]["shape"], "disk");
        assert!(json.get("fit").is_none());
        assert_eq!(file.to_model().unwrap(), m);
        let bad = ModelFile { feature_spec: "d1".into(), ..file };
        assert!(bad.to_model().is_err());
    }

    #[test]
    fn curve_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        let c = EstimateCurve { radii: vec![0.0, 0.5], values: vec![0.0, 0.25], std_errors: vec![0.0, 0.01], n_samples: 7 };
        write_curve(&path, &c).unwrap();
        assert!(fs::read_to_string(&path).unwrap().starts_with("r,value,se,n\n0.0,0.0,0.0,7\n"));
        assert_eq!(read_curve(&path).unwrap(), c);
    }
}
