//! End-to-end orchestration: prepare -> train -> evaluate -> predict, plus a
//! synthetic-data generator for dataset-free testing.
//!
//! All outputs are written atomically (temp file + rename) in a canonical
//! JSON form (sorted keys, shortest round-trip floats), so repeating a
//! command with an identical configuration yields byte-identical files. The
//! artifact creation stamp honors `SOURCE_DATE_EPOCH` and defaults to the
//! epoch, keeping artifacts reproducible.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{build_report, write_roc_csv, Evaluation, Provenance};
use crate::exec;
use crate::ingest::{
    self, cic_label_aliases, clean_dataset, parse_flow_csv, CleanDataset, CleaningLogEntry,
    CleaningPolicy, LabelDictionary, LabeledDataset, NonFinitePolicy, SchemaMode, Standardizer,
    IDENTIFIER_FEATURES,
};
use crate::linear::{
    fit_gaussian_nb, fit_svm_ovr, gnb_posteriors, svm_decision_scores, GaussianNb, LinearSvm,
    SvmConfig,
};
use crate::rng::{derive_seed, stream_rng, DOMAIN_RANK, DOMAIN_SPLIT, DOMAIN_SVM, DOMAIN_SYNTH, DOMAIN_TREE};
use crate::select::{project, rank_features, select_top_k, write_ranking_csv, FeatureMask};
use crate::trees::{
    fit_forest, fit_tree, predict_forest, predict_tree, DecisionTree, FeaturesPerSplit, Forest,
    ForestConfig, SplitMode,
};

pub const FORMAT_VERSION: u32 = 1;

/// Environment variable supplying the default output directory.
pub const OUT_DIR_ENV: &str = "FLOWHAWK_OUT_DIR";

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepareConfig {
    pub inputs: Vec<PathBuf>,
    pub out_dir: PathBuf,
    /// Canonical label names in index order; `None` infers them from the
    /// data (sorted, after alias resolution).
    pub labels: Option<Vec<String>>,
    pub aliases: BTreeMap<String, String>,
    pub clean_policy: NonFinitePolicy,
    pub drop_identifier_features: bool,
    pub test_fraction: f64,
    pub select_k: usize,
    pub seed: u64,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        PrepareConfig {
            inputs: Vec::new(),
            out_dir: PathBuf::new(),
            labels: None,
            aliases: cic_label_aliases(),
            clean_policy: NonFinitePolicy::ReplaceZero,
            drop_identifier_features: false,
            test_fraction: 0.3,
            select_k: 20,
            seed: 42,
        }
    }
}

impl PrepareConfig {
    fn validate(&self) -> Result<()> {
        if self.inputs.is_empty() {
            return Err(Error::Argument("no input files given".into()));
        }
        if self.out_dir.as_os_str().is_empty() {
            return Err(Error::Argument("no output directory given".into()));
        }
        if !(0.0..=1.0).contains(&self.test_fraction) {
            return Err(Error::Argument(format!(
                "test_fraction must be within [0, 1], got {}",
                self.test_fraction
            )));
        }
        if self.select_k == 0 {
            return Err(Error::Argument("select_k must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Rf,
    Dt,
    Gnb,
    Svm,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ModelKind::Rf => "rf",
            ModelKind::Dt => "dt",
            ModelKind::Gnb => "gnb",
            ModelKind::Svm => "svm",
        };
        f.write_str(name)
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rf" => Ok(ModelKind::Rf),
            "dt" => Ok(ModelKind::Dt),
            "gnb" => Ok(ModelKind::Gnb),
            "svm" => Ok(ModelKind::Svm),
            other => Err(Error::Argument(format!(
                "unknown model '{other}' (expected rf, dt, gnb, or svm)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub seed: u64,
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// `None` picks the model's convention: sqrt for rf, all for dt.
    pub features_per_split: Option<FeaturesPerSplit>,
    pub svm: SvmConfig,
    pub gnb_smoothing: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelKind::Rf,
            seed: 42,
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            features_per_split: None,
            svm: SvmConfig::default(),
            gnb_smoothing: 1e-9,
        }
    }
}

impl TrainConfig {
    pub fn forest_config(&self) -> ForestConfig {
        match self.model {
            ModelKind::Dt => ForestConfig {
                n_trees: 1,
                bootstrap: false,
                features_per_split: self.features_per_split.unwrap_or(FeaturesPerSplit::All),
                split_mode: SplitMode::Exhaustive,
                max_depth: self.max_depth,
                min_samples_split: self.min_samples_split,
                seed: self.seed,
            },
            _ => ForestConfig {
                n_trees: self.n_trees,
                bootstrap: true,
                features_per_split: self.features_per_split.unwrap_or(FeaturesPerSplit::Sqrt),
                split_mode: SplitMode::Exhaustive,
                max_depth: self.max_depth,
                min_samples_split: self.min_samples_split,
                seed: self.seed,
            },
        }
    }
}

// ---------------------------------------------------------------------------
// Models and artifacts
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum Model {
    Rf(Forest),
    Dt(DecisionTree),
    Gnb(GaussianNb),
    Svm(LinearSvm),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Rf(_) => ModelKind::Rf,
            Model::Dt(_) => ModelKind::Dt,
            Model::Gnb(_) => ModelKind::Gnb,
            Model::Svm(_) => ModelKind::Svm,
        }
    }
}

/// Score vector for one record: vote fractions (rf), leaf probabilities
/// (dt), normalized posteriors (gnb), or raw margins (svm).
pub fn score_record(model: &Model, record: &[f64]) -> Result<Vec<f64>> {
    match model {
        Model::Rf(forest) => predict_forest(forest, record),
        Model::Dt(tree) => predict_tree(tree, record),
        Model::Gnb(gnb) => gnb_posteriors(gnb, record),
        Model::Svm(svm) => svm_decision_scores(svm, record),
    }
}

pub fn score_batch(model: &Model, data: &LabeledDataset) -> Result<Vec<Vec<f64>>> {
    exec::map_indexed(data.n_rows(), |r| score_record(model, data.row(r)))
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSnapshot {
    pub prepare: PrepareConfig,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub created: String,
    pub label_dict: LabelDictionary,
    pub standardizer: Standardizer,
    pub feature_mask: FeatureMask,
    pub model: Model,
    pub pipeline: PipelineSnapshot,
}

/// Canonical JSON: sorted object keys (serde_json's default map ordering),
/// shortest round-trip float text, trailing newline.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let value = serde_json::to_value(value).map_err(|e| Error::Format(e.to_string()))?;
    let mut text =
        serde_json::to_string_pretty(&value).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Write via a temp file in the same directory, then rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Argument(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

fn created_stamp() -> String {
    let secs = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.parse::<i64>().ok())
        .unwrap_or(0);
    chrono::DateTime::from_timestamp(secs, 0)
        .unwrap_or_else(|| chrono::DateTime::from_timestamp(0, 0).unwrap())
        .to_rfc3339()
}

pub fn save_artifact(artifact: &ModelArtifact, path: &Path) -> Result<()> {
    atomic_write(path, canonical_json(artifact)?.as_bytes())
}

pub fn load_artifact(path: &Path) -> Result<ModelArtifact> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let version = value.get("format_version").and_then(|v| v.as_u64());
    match version {
        Some(v) if v == u64::from(FORMAT_VERSION) => {}
        Some(v) => {
            return Err(Error::Format(format!(
                "unsupported format_version {v} (expected {FORMAT_VERSION})"
            )))
        }
        None => {
            return Err(Error::Format(format!(
                "{}: missing format_version",
                path.display()
            )))
        }
    }
    serde_json::from_value(value).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// prepare
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareManifest {
    pub config: PrepareConfig,
    pub label_dict: LabelDictionary,
    pub rows_total: usize,
    pub rows_train: usize,
    pub rows_test: usize,
    pub label_counts_total: BTreeMap<String, usize>,
    pub label_counts_train: BTreeMap<String, usize>,
    pub label_counts_test: BTreeMap<String, usize>,
    pub kept_features: Vec<String>,
    pub split_seed: u64,
    pub ranking_seed: u64,
    pub cleaning: Vec<CleaningLogEntry>,
}

fn count_map(data: &LabeledDataset) -> BTreeMap<String, usize> {
    data.class_counts()
        .iter()
        .enumerate()
        .map(|(i, &c)| (data.label_dict.name_of(i).to_string(), c))
        .collect()
}

fn stage<T>(name: &str, result: Result<T>) -> Result<T> {
    result.map_err(|e| e.with_stage(name))
}

fn dataset_to_csv_bytes(data: &LabeledDataset) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    ingest::write_dataset_csv(data, &mut bytes)?;
    Ok(bytes)
}

/// Run parse -> clean -> encode -> split -> standardize -> rank -> project
/// and write every prepared file plus the manifest into `config.out_dir`.
pub fn cmd_prepare(config: &PrepareConfig) -> Result<PrepareManifest> {
    config.validate()?;
    let policy = CleaningPolicy {
        non_finite: config.clean_policy,
        ..CleaningPolicy::default()
    };

    let mut merged: Option<CleanDataset> = None;
    let mut cleaning_entries: Vec<CleaningLogEntry> = Vec::new();
    for input in &config.inputs {
        let file = stage(
            "parse",
            fs::File::open(input).map_err(|e| Error::io(input.display().to_string(), e)),
        )?;
        let raw = stage("parse", parse_flow_csv(BufReader::new(file), SchemaMode::Infer))?;
        let (clean, log) = stage("clean", clean_dataset(&raw, &policy))?;
        cleaning_entries.extend(log.entries);
        merged = Some(match merged.take() {
            None => clean,
            Some(mut acc) => {
                if acc.feature_names != clean.feature_names {
                    return Err(Error::Schema(format!(
                        "[clean] input '{}' has a different column set than the first input",
                        input.display()
                    )));
                }
                acc.values.extend_from_slice(&clean.values);
                acc.raw_labels.extend_from_slice(&clean.raw_labels);
                acc.n_rows += clean.n_rows;
                acc
            }
        });
    }
    let clean = merged.expect("validated non-empty inputs");

    let dict = match &config.labels {
        Some(names) => LabelDictionary::with_aliases(names.clone(), config.aliases.clone())?,
        None => LabelDictionary::infer(&clean.raw_labels, config.aliases.clone())?,
    };
    let provenance = config
        .inputs
        .iter()
        .map(|p| {
            p.file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string())
        })
        .collect::<Vec<_>>()
        .join("+");
    let mut data = stage(
        "encode",
        LabeledDataset::from_clean(&clean, dict, provenance),
    )?;
    if config.drop_identifier_features {
        data = data.without_features(IDENTIFIER_FEATURES);
    }

    let split_seed = derive_seed(config.seed, DOMAIN_SPLIT);
    let (train_clean, test_clean) = stage(
        "split",
        ingest::stratified_split(&data, config.test_fraction, split_seed),
    )?;

    let standardizer = stage("standardize", ingest::fit_standardizer(&train_clean))?;
    let train_std = stage("standardize", ingest::apply_standardizer(&standardizer, &train_clean))?;
    let test_std = if test_clean.n_rows() > 0 {
        stage("standardize", ingest::apply_standardizer(&standardizer, &test_clean))?
    } else {
        test_clean.clone()
    };

    let ranking_seed = derive_seed(config.seed, DOMAIN_RANK);
    let ranking = stage(
        "rank",
        rank_features(&train_std, &ForestConfig::extra_trees(ranking_seed)),
    )?;
    let k = config.select_k.min(ranking.entries.len());
    if config.select_k > ranking.entries.len() {
        return Err(Error::Argument(format!(
            "[rank] select_k {} exceeds the {} available features",
            config.select_k,
            ranking.entries.len()
        )));
    }
    let mask = stage("select", select_top_k(&ranking, k))?;
    let train_proj = stage("project", project(&train_std, &mask))?;
    let test_proj = if test_std.n_rows() > 0 {
        stage("project", project(&test_std, &mask))?
    } else {
        stage("project", project(&test_std, &mask))?
    };

    fs::create_dir_all(&config.out_dir)
        .map_err(|e| Error::io(config.out_dir.display().to_string(), e))?;
    let out = |name: &str| config.out_dir.join(name);
    atomic_write(&out("train.csv"), &dataset_to_csv_bytes(&train_proj)?)?;
    atomic_write(&out("test.csv"), &dataset_to_csv_bytes(&test_proj)?)?;
    atomic_write(&out("train_clean.csv"), &dataset_to_csv_bytes(&train_clean)?)?;
    atomic_write(&out("test_clean.csv"), &dataset_to_csv_bytes(&test_clean)?)?;
    atomic_write(&out("standardizer.json"), canonical_json(&standardizer)?.as_bytes())?;
    atomic_write(&out("feature_mask.json"), canonical_json(&mask)?.as_bytes())?;
    atomic_write(&out("ranking.json"), canonical_json(&ranking)?.as_bytes())?;
    let mut ranking_csv = Vec::new();
    write_ranking_csv(&ranking, &mut ranking_csv)?;
    atomic_write(&out("ranking.csv"), &ranking_csv)?;
    let mut log_bytes = Vec::new();
    ingest::CleaningLog {
        entries: cleaning_entries.clone(),
    }
    .write_jsonl(&mut log_bytes)?;
    atomic_write(&out("cleaning_log.jsonl"), &log_bytes)?;

    let manifest = PrepareManifest {
        config: config.clone(),
        label_dict: data.label_dict.clone(),
        rows_total: data.n_rows(),
        rows_train: train_clean.n_rows(),
        rows_test: test_clean.n_rows(),
        label_counts_total: count_map(&data),
        label_counts_train: count_map(&train_clean),
        label_counts_test: count_map(&test_clean),
        kept_features: mask.names.clone(),
        split_seed,
        ranking_seed,
        cleaning: cleaning_entries,
    };
    atomic_write(&out("manifest.json"), canonical_json(&manifest)?.as_bytes())?;
    Ok(manifest)
}

pub fn load_manifest(prepared_dir: &Path) -> Result<PrepareManifest> {
    let path = prepared_dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn read_prepared_csv(path: &Path, dict: &LabelDictionary) -> Result<LabeledDataset> {
    let file = fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let raw = parse_flow_csv(BufReader::new(file), SchemaMode::Infer)?;
    let (clean, _) = clean_dataset(&raw, &CleaningPolicy::default())?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    LabeledDataset::from_clean(&clean, dict.clone(), name)
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

/// Fit the configured model on the projected, standardized train split.
pub fn train_model(data: &LabeledDataset, config: &TrainConfig) -> Result<Model> {
    match config.model {
        ModelKind::Rf => Ok(Model::Rf(fit_forest(data, &config.forest_config())?)),
        ModelKind::Dt => {
            let rows: Vec<usize> = (0..data.n_rows()).collect();
            let mut rng = stream_rng(config.seed, 0, DOMAIN_TREE);
            Ok(Model::Dt(fit_tree(&rows, data, &config.forest_config(), &mut rng)?))
        }
        ModelKind::Gnb => Ok(Model::Gnb(fit_gaussian_nb(data, config.gnb_smoothing)?)),
        ModelKind::Svm => {
            let mut svm_config = config.svm;
            svm_config.seed = derive_seed(config.seed, DOMAIN_SVM);
            Ok(Model::Svm(fit_svm_ovr(data, &svm_config)?))
        }
    }
}

pub fn cmd_train(prepared_dir: &Path, config: &TrainConfig, out_path: &Path) -> Result<ModelArtifact> {
    let manifest = load_manifest(prepared_dir)?;
    let standardizer: Standardizer = load_json(&prepared_dir.join("standardizer.json"))?;
    let mask: FeatureMask = load_json(&prepared_dir.join("feature_mask.json"))?;
    let train = read_prepared_csv(&prepared_dir.join("train.csv"), &manifest.label_dict)?;
    let model = stage("train", train_model(&train, config))?;
    let artifact = ModelArtifact {
        format_version: FORMAT_VERSION,
        created: created_stamp(),
        label_dict: manifest.label_dict.clone(),
        standardizer,
        feature_mask: mask,
        model,
        pipeline: PipelineSnapshot {
            prepare: manifest.config,
            train: config.clone(),
        },
    };
    save_artifact(&artifact, out_path)?;
    Ok(artifact)
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalSplit {
    Train,
    Test,
}

impl fmt::Display for EvalSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalSplit::Train => "train",
            EvalSplit::Test => "test",
        })
    }
}

impl FromStr for EvalSplit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(EvalSplit::Train),
            "test" => Ok(EvalSplit::Test),
            other => Err(Error::Argument(format!(
                "unknown split '{other}' (expected train or test)"
            ))),
        }
    }
}

/// Score a prepared split with a saved artifact and write `report.json` and
/// `roc.csv` to `out_dir`.
pub fn cmd_evaluate(
    artifact_path: &Path,
    prepared_dir: &Path,
    out_dir: &Path,
    split: EvalSplit,
) -> Result<Evaluation> {
    let artifact = load_artifact(artifact_path)?;
    let csv_name = format!("{split}.csv");
    let data = read_prepared_csv(&prepared_dir.join(&csv_name), &artifact.label_dict)?;
    if data.feature_names != artifact.feature_mask.names {
        let missing: Vec<&String> = artifact
            .feature_mask
            .names
            .iter()
            .filter(|n| !data.feature_names.contains(n))
            .collect();
        return Err(Error::Schema(format!(
            "prepared data does not match the artifact's feature mask (missing: {missing:?})"
        )));
    }
    let scores = score_batch(&artifact.model, &data)?;
    let model_name = artifact_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| artifact_path.display().to_string());
    let evaluation = build_report(
        data.labels(),
        &scores,
        &data.label_dict,
        Provenance {
            model: format!("{model_name} ({})", artifact.model.kind()),
            dataset: format!("{csv_name} ({} rows)", data.n_rows()),
        },
    )?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    atomic_write(
        &out_dir.join("report.json"),
        canonical_json(&evaluation.report)?.as_bytes(),
    )?;
    let mut roc_bytes = Vec::new();
    write_roc_csv(&evaluation, &mut roc_bytes)?;
    atomic_write(&out_dir.join("roc.csv"), &roc_bytes)?;
    Ok(evaluation)
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

/// Apply a saved artifact to a feature CSV (label column optional and
/// ignored): standardize the mask's columns, score, and write
/// `row_index,predicted_label,score_<name>...` rows.
pub fn cmd_predict(artifact_path: &Path, input: &Path, out_csv: &Path) -> Result<usize> {
    let artifact = load_artifact(artifact_path)?;
    let file = fs::File::open(input).map_err(|e| Error::io(input.display().to_string(), e))?;
    let raw = parse_flow_csv(BufReader::new(file), SchemaMode::FeaturesOnly)?;
    let policy = CleaningPolicy {
        non_finite: artifact.pipeline.prepare.clean_policy,
        ..CleaningPolicy::default()
    };
    let (clean, _) = clean_dataset(&raw, &policy)?;

    let mask = &artifact.feature_mask;
    let missing: Vec<&String> = mask
        .names
        .iter()
        .filter(|n| !clean.feature_names.contains(n))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Schema(format!(
            "input is missing required columns {missing:?}"
        )));
    }
    let source_cols: Vec<usize> = mask
        .names
        .iter()
        .map(|n| clean.feature_names.iter().position(|f| f == n).unwrap())
        .collect();
    let stats: Vec<(f64, f64)> = mask
        .names
        .iter()
        .map(|n| {
            artifact
                .standardizer
                .fitted_on
                .iter()
                .position(|f| f == n)
                .map(|i| (artifact.standardizer.means[i], artifact.standardizer.stddevs[i]))
                .ok_or_else(|| {
                    Error::Schema(format!("artifact standardizer lacks statistics for '{n}'"))
                })
        })
        .collect::<Result<Vec<_>>>()?;

    let d = clean.feature_names.len();
    let n_labels = artifact.label_dict.len();
    let rows: Vec<Result<(usize, Vec<f64>)>> = exec::map_indexed(clean.n_rows, |r| {
        let row = &clean.values[r * d..(r + 1) * d];
        let record: Vec<f64> = source_cols
            .iter()
            .zip(&stats)
            .map(|(&c, &(mean, sd))| if sd > 0.0 { (row[c] - mean) / sd } else { 0.0 })
            .collect();
        let scores = score_record(&artifact.model, &record)?;
        let prediction = crate::eval::scores_to_prediction(&scores)?;
        Ok((prediction, scores))
    });

    let mut bytes = Vec::new();
    let mut header = String::from("row_index,predicted_label");
    for label in 0..n_labels {
        header.push_str(&format!(",score_{}", artifact.label_dict.name_of(label)));
    }
    writeln!(bytes, "{header}").map_err(|e| Error::io("<predictions>", e))?;
    let mut written = 0usize;
    for (index, row) in rows.into_iter().enumerate() {
        let (prediction, scores) = row?;
        let mut line = format!("{index},{}", artifact.label_dict.name_of(prediction));
        for s in scores {
            line.push_str(&format!(",{s}"));
        }
        writeln!(bytes, "{line}").map_err(|e| Error::io("<predictions>", e))?;
        written += 1;
    }
    atomic_write(out_csv, &bytes)?;
    Ok(written)
}

// ---------------------------------------------------------------------------
// synthetic data
// ---------------------------------------------------------------------------

/// Scalar broadcast to every feature, or one value per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Broadcast {
    Scalar(f64),
    PerFeature(Vec<f64>),
}

impl Broadcast {
    fn resolve(&self, n_features: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            Broadcast::Scalar(v) => Ok(vec![*v; n_features]),
            Broadcast::PerFeature(vs) => {
                if vs.len() != n_features {
                    return Err(Error::Argument(format!(
                        "{what} has {} entries but the spec declares {n_features} features",
                        vs.len()
                    )));
                }
                Ok(vs.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelGen {
    pub count: usize,
    pub mean: Broadcast,
    pub variance: Broadcast,
}

/// Class-conditional Gaussian generator specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_features: usize,
    pub labels: BTreeMap<String, LabelGen>,
}

/// Draw the spec's class-conditional Gaussian rows (label-major, labels in
/// sorted order) and emit the same CSV dialect `prepare` consumes. Returns
/// per-label row counts.
pub fn generate_synthetic<W: Write>(
    spec: &SynthSpec,
    seed: u64,
    mut w: W,
) -> Result<BTreeMap<String, usize>> {
    if spec.labels.len() < 2 {
        return Err(Error::Argument("synthetic spec needs at least 2 labels".into()));
    }
    if spec.n_features == 0 {
        return Err(Error::Argument("synthetic spec needs at least 1 feature".into()));
    }
    let mut resolved = Vec::new();
    for (name, gen) in &spec.labels {
        let means = gen.mean.resolve(spec.n_features, "mean")?;
        let vars = gen.variance.resolve(spec.n_features, "variance")?;
        if vars.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Argument(format!(
                "label '{name}' has a non-positive variance"
            )));
        }
        resolved.push((name.clone(), gen.count, means, vars));
    }

    let header: Vec<String> = (1..=spec.n_features)
        .map(|i| format!("f{i}"))
        .chain(std::iter::once(ingest::LABEL_COLUMN.to_string()))
        .collect();
    writeln!(w, "{}", header.join(",")).map_err(|e| Error::io("<synthetic csv>", e))?;

    let mut rng = stream_rng(seed, 0, DOMAIN_SYNTH);
    let mut counts = BTreeMap::new();
    for (name, count, means, vars) in &resolved {
        let dists: Vec<Normal<f64>> = means
            .iter()
            .zip(vars)
            .map(|(&m, &v)| Normal::new(m, v.sqrt()).expect("validated variance"))
            .collect();
        for _ in 0..*count {
            let mut line = String::new();
            for dist in &dists {
                let v: f64 = dist.sample(&mut rng);
                line.push_str(&format!("{v},"));
            }
            line.push_str(name);
            writeln!(w, "{line}").map_err(|e| Error::io("<synthetic csv>", e))?;
        }
        counts.insert(name.clone(), *count);
    }
    Ok(counts)
}

/// Two well-separated unit-variance Gaussians; any of the four models should
/// reach near-perfect held-out accuracy on this.
pub fn well_separated_spec(n_per_label: usize, n_features: usize) -> SynthSpec {
    let mut labels = BTreeMap::new();
    labels.insert(
        "A".to_string(),
        LabelGen {
            count: n_per_label,
            mean: Broadcast::Scalar(-3.0),
            variance: Broadcast::Scalar(1.0),
        },
    );
    labels.insert(
        "B".to_string(),
        LabelGen {
            count: n_per_label,
            mean: Broadcast::Scalar(3.0),
            variance: Broadcast::Scalar(1.0),
        },
    );
    SynthSpec {
        n_features,
        labels,
    }
}

pub fn cmd_synth(spec_path: &Path, seed: u64, out_csv: &Path) -> Result<BTreeMap<String, usize>> {
    let spec: SynthSpec = load_json(spec_path)?;
    let mut bytes = Vec::new();
    let counts = generate_synthetic(&spec, seed, &mut bytes)?;
    atomic_write(out_csv, &bytes)?;
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_kind_round_trips_strings() {
        for kind in [ModelKind::Rf, ModelKind::Dt, ModelKind::Gnb, ModelKind::Svm] {
            assert_eq!(kind.to_string().parse::<ModelKind>().unwrap(), kind);
        }
        assert!("mlp".parse::<ModelKind>().is_err());
    }

    #[test]
    fn canonical_json_sorts_keys() {
        #[derive(Serialize)]
        struct Unordered {
            zeta: u32,
            alpha: u32,
        }
        let text = canonical_json(&Unordered { zeta: 1, alpha: 2 }).unwrap();
        let zeta = text.find("zeta").unwrap();
        let alpha = text.find("alpha").unwrap();
        assert!(alpha < zeta);
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn synthetic_generation_is_deterministic() {
        let spec = well_separated_spec(50, 3);
        let mut a = Vec::new();
        let mut b = Vec::new();
        generate_synthetic(&spec, 9, &mut a).unwrap();
        generate_synthetic(&spec, 9, &mut b).unwrap();
        assert_eq!(a, b);
        let mut c = Vec::new();
        generate_synthetic(&spec, 10, &mut c).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synthetic_counts_follow_spec() {
        // imbalance ratios scaled down 1000x from the real label counts
        let mut labels = BTreeMap::new();
        for (name, count) in [("BENIGN", 3usize), ("DDoS_LDAP", 10), ("DDoS_MSSQL", 5763)] {
            labels.insert(
                name.to_string(),
                LabelGen {
                    count,
                    mean: Broadcast::Scalar(0.0),
                    variance: Broadcast::Scalar(1.0),
                },
            );
        }
        let spec = SynthSpec {
            n_features: 2,
            labels,
        };
        let mut bytes = Vec::new();
        let counts = generate_synthetic(&spec, 1, &mut bytes).unwrap();
        assert_eq!(counts["BENIGN"], 3);
        assert_eq!(counts["DDoS_LDAP"], 10);
        assert_eq!(counts["DDoS_MSSQL"], 5763);
        let text = String::from_utf8(bytes).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 + 10 + 5763);
        let benign_rows = text.lines().filter(|l| l.ends_with(",BENIGN")).count();
        assert_eq!(benign_rows, 3);
    }

    #[test]
    fn synthetic_spec_validation() {
        let mut labels = BTreeMap::new();
        labels.insert(
            "only".to_string(),
            LabelGen {
                count: 5,
                mean: Broadcast::Scalar(0.0),
                variance: Broadcast::Scalar(1.0),
            },
        );
        let spec = SynthSpec {
            n_features: 2,
            labels,
        };
        assert!(generate_synthetic(&spec, 0, Vec::new()).is_err());

        let mut bad_var = well_separated_spec(5, 2);
        bad_var.labels.get_mut("A").unwrap().variance = Broadcast::Scalar(0.0);
        assert!(generate_synthetic(&bad_var, 0, Vec::new()).is_err());

        let mut bad_len = well_separated_spec(5, 2);
        bad_len.labels.get_mut("A").unwrap().mean = Broadcast::PerFeature(vec![1.0; 3]);
        assert!(generate_synthetic(&bad_len, 0, Vec::new()).is_err());
    }

    #[test]
    fn broadcast_json_accepts_scalar_and_vector() {
        let spec: SynthSpec = serde_json::from_str(
            r#"{"n_features":2,"labels":{
                "A":{"count":1,"mean":-3.0,"variance":1.0},
                "B":{"count":1,"mean":[1.0,2.0],"variance":[0.5,0.5]}
            }}"#,
        )
        .unwrap();
        assert_eq!(spec.labels["B"].mean, Broadcast::PerFeature(vec![1.0, 2.0]));
        assert_eq!(spec.labels["A"].mean, Broadcast::Scalar(-3.0));
    }
}
