//! Pipeline stages. Each stage reads the previous stages' artifacts from the
//! output directory, writes its own, and records a manifest.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use pumptrace_core::diffusion::{self, DiffusionError, DiffusionGraph, MIN_SPREADERS};
use pumptrace_core::eval::{self, chronological_split, Confusion, SplitPlan};
use pumptrace_core::events::{self, CrowdPumpEvent, EventRecord, Flag};
use pumptrace_core::features::{self, FeatureMatrix, Labels, Standardizer, FEATURE_NAMES};
use pumptrace_core::gnn::{self, GraphData, GraphVariant, ModelDocument};
use pumptrace_core::ingest::{self, CrowdPumpMessage, Direction, RuleSet, SkipReport};
use pumptrace_core::market::{self, MarketOutcome};
use pumptrace_core::synth::{self, DatasetPaths};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{Needs, PipelineConfig};
use crate::error::PipelineError;
use crate::manifest::{hash_all, sha256_bytes, Manifest, ARTIFACT_VERSION};

pub const MESSAGES: &str = "messages.jsonl";
pub const PARSE_REPORT: &str = "parse_report.json";
pub const SPLIT: &str = "split.json";
pub const EVENTS: &str = "events.jsonl";
pub const EVENTS_REPORT: &str = "events_report.json";
pub const FLAGS: &str = "flags.json";
pub const GRAPHS: &str = "graphs.json";
pub const GRAPH_EXPORTS: &str = "graphs";
pub const FEATURES: &str = "features.json";
pub const FEATURES_CSV: &str = "features.csv";
pub const MODELS: &str = "models";
pub const PREDICTIONS: &str = "predictions.json";
pub const REPORT: &str = "report.json";
pub const CURVES: &str = "curves";
/// Wall-clock measurements; kept out of manifests and reports.
pub const TIMING: &str = "timing";

pub const STAGES: [&str; 9] = ["parse", "split", "events", "flag", "graphs", "featurize", "train", "infer", "evaluate"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageStatus {
    Ran,
    UpToDate,
}

pub fn variant_name(v: GraphVariant) -> &'static str {
    match v {
        GraphVariant::Directed => "directed",
        GraphVariant::Weighted => "weighted",
    }
}

// ---------------------------------------------------------------------------
// Artifact types

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseReport {
    pub artifact_version: u32,
    pub rules_version: String,
    pub messages: usize,
    pub skips: SkipReport,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSetSummary {
    pub period: String,
    pub cryptocurrency: String,
    pub events: usize,
    pub messages: usize,
    pub duplicates: usize,
    pub thresholds_secs: BTreeMap<Direction, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphsArtifact {
    pub artifact_version: u32,
    /// Event sets with fewer than the minimum number of spreaders.
    pub dropped: Vec<String>,
    pub graphs: Vec<DiffusionGraph>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturesArtifact {
    pub artifact_version: u32,
    pub columns: Vec<String>,
    pub matrices: Vec<FeatureMatrix>,
    /// Spreaders whose messages announced no targets at all.
    pub zero_target_spreaders: usize,
    /// Messages without usable price data.
    pub missing_market: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub graph_id: String,
    pub period: String,
    pub entity_id: String,
    pub probability: f64,
    pub label: u8,
    pub predicted: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub graph_id: String,
    pub entity_id: String,
    pub probability: f64,
}

// ---------------------------------------------------------------------------
// Context

pub struct Pipeline {
    pub cfg: PipelineConfig,
    pub force: bool,
    rules: RuleSet,
}

fn read_json<T: DeserializeOwned>(path: &Path, stage: &'static str, producer: &'static str) -> Result<T, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::MissingArtifact { stage, path: path.display().to_string(), producer });
    }
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::io(path, e))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| PipelineError::io(parent, e))?;
    }
    let text = serde_json::to_string_pretty(value).expect("artifact serializes") + "\n";
    std::fs::write(path, text).map_err(|e| PipelineError::io(path, e))
}

fn require(path: &Path, stage: &'static str, producer: &'static str) -> Result<(), PipelineError> {
    if path.exists() {
        Ok(())
    } else {
        Err(PipelineError::MissingArtifact { stage, path: path.display().to_string(), producer })
    }
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, force: bool) -> Result<Self, PipelineError> {
        cfg.validate(Needs::default())?;
        let rules = match &cfg.rules {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| PipelineError::io(p, e))?;
                RuleSet::from_toml(&text).map_err(|e| PipelineError::Config(vec![format!("rules: {e}")]))?
            }
            None => RuleSet::builtin().clone(),
        };
        Ok(Self { cfg, force, rules })
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.cfg.out_dir.join(name)
    }

    fn model_path(&self, v: GraphVariant) -> PathBuf {
        self.out(MODELS).join(format!("{}.json", variant_name(v)))
    }

    fn timing_path(&self, name: &str) -> PathBuf {
        self.out(TIMING).join(name)
    }

    fn stage(
        &self,
        stage: &str,
        inputs: &[PathBuf],
        outputs: &[PathBuf],
        body: impl FnOnce() -> Result<(), PipelineError>,
    ) -> Result<StageStatus, PipelineError> {
        let mut manifest = Manifest {
            stage: stage.to_string(),
            artifact_version: ARTIFACT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            rules_version: self.rules.version.clone(),
            config_sha256: sha256_bytes(self.cfg.canonical_json().as_bytes()),
            inputs: hash_all(inputs)?,
            outputs: BTreeMap::new(),
        };
        if !self.force && manifest.is_current(&self.cfg.out_dir) {
            info!("{stage}: up to date");
            return Ok(StageStatus::UpToDate);
        }
        std::fs::create_dir_all(&self.cfg.out_dir).map_err(|e| PipelineError::io(&self.cfg.out_dir, e))?;
        let started = Instant::now();
        body()?;
        manifest.outputs = hash_all(outputs)?;
        manifest.write(&self.cfg.out_dir)?;
        info!("{stage}: done in {:.2}s", started.elapsed().as_secs_f64());
        Ok(StageStatus::Ran)
    }

    // -----------------------------------------------------------------------
    // synth

    pub fn synth(&self) -> Result<StageStatus, PipelineError> {
        let paths = DatasetPaths {
            corpus: self.cfg.corpus.clone(),
            prices_dir: self.cfg.prices_dir.clone(),
            labels: self.cfg.labels.clone(),
            ground_truth: self.cfg.corpus.with_file_name("ground_truth.json"),
        };
        let outputs = [paths.corpus.clone(), paths.prices_dir.clone(), paths.labels.clone(), paths.ground_truth.clone()];
        self.stage("synth", &[], &outputs, || {
            let ds = synth::generate(&self.cfg.synth)?;
            info!("synth: {} messages over {} coins", ds.raw.len(), ds.prices.len());
            synth::write_dataset_to(&paths, &ds)?;
            Ok(())
        })
    }

    // -----------------------------------------------------------------------
    // parse

    pub fn parse(&self) -> Result<StageStatus, PipelineError> {
        self.cfg.validate(Needs { corpus: true, ..Needs::default() })?;
        let mut inputs = vec![self.cfg.corpus.clone()];
        inputs.extend(self.cfg.rules.clone());
        let outputs = [self.out(MESSAGES), self.out(PARSE_REPORT)];
        self.stage("parse", &inputs, &outputs, || {
            let mut corpus = ingest::parse_corpus_with(&self.rules, &self.cfg.corpus)?;
            ingest::sort_messages(&mut corpus.messages);
            let s = corpus.skips;
            info!(
                "parse: {} messages; skipped {} without entities, {} ambiguous, {} unparseable",
                corpus.messages.len(),
                s.no_entities,
                s.ambiguous,
                s.parse_error
            );
            ingest::write_messages(&self.out(MESSAGES), &corpus.messages)?;
            write_json(
                &self.out(PARSE_REPORT),
                &ParseReport {
                    artifact_version: ARTIFACT_VERSION,
                    rules_version: self.rules.version.clone(),
                    messages: corpus.messages.len(),
                    skips: corpus.skips,
                    errors: corpus.errors,
                },
            )
        })
    }

    fn messages(&self, stage: &'static str) -> Result<Vec<CrowdPumpMessage>, PipelineError> {
        require(&self.out(MESSAGES), stage, "parse")?;
        Ok(ingest::read_messages(&self.out(MESSAGES))?)
    }

    // -----------------------------------------------------------------------
    // split

    pub fn split(&self) -> Result<StageStatus, PipelineError> {
        require(&self.out(MESSAGES), "split", "parse")?;
        self.stage("split", &[self.out(MESSAGES)], &[self.out(SPLIT)], || {
            let msgs = self.messages("split")?;
            let plan = chronological_split(&msgs, self.cfg.split_fractions)?;
            info!(
                "split: cuts {} / {}, token fractions {:.3} {:.3} {:.3}",
                plan.cut1, plan.cut2, plan.fractions[0], plan.fractions[1], plan.fractions[2]
            );
            write_json(&self.out(SPLIT), &plan)
        })
    }

    fn split_plan(&self, stage: &'static str) -> Result<SplitPlan, PipelineError> {
        read_json(&self.out(SPLIT), stage, "split")
    }

    // -----------------------------------------------------------------------
    // events

    pub fn events(&self) -> Result<StageStatus, PipelineError> {
        require(&self.out(MESSAGES), "events", "parse")?;
        require(&self.out(SPLIT), "events", "split")?;
        let inputs = [self.out(MESSAGES), self.out(SPLIT)];
        self.stage("events", &inputs, &[self.out(EVENTS), self.out(EVENTS_REPORT)], || {
            let msgs = self.messages("events")?;
            let plan = self.split_plan("events")?;
            let sets = events::build_event_sets_capped(&msgs, &plan.periods, self.cfg.event_cap_secs())?;
            let mut records = Vec::new();
            let mut summary = Vec::new();
            for set in sets.values() {
                for e in &set.events {
                    let mut r = EventRecord::from(e);
                    r.period = Some(set.period.clone());
                    records.push(r);
                }
                summary.push(EventSetSummary {
                    period: set.period.clone(),
                    cryptocurrency: set.cryptocurrency.clone(),
                    events: set.events.len(),
                    messages: set.events.iter().map(|e| e.messages.len()).sum(),
                    duplicates: set.duplicates,
                    thresholds_secs: set.thresholds.clone(),
                });
            }
            info!("events: {} events in {} coin-period sets", records.len(), summary.len());
            events::write_jsonl(&self.out(EVENTS), &records)?;
            write_json(&self.out(EVENTS_REPORT), &summary)
        })
    }

    /// Events grouped by `(period, coin)`, in record order.
    fn event_groups(&self, stage: &'static str) -> Result<BTreeMap<(String, String), Vec<CrowdPumpEvent>>, PipelineError> {
        require(&self.out(EVENTS), stage, "events")?;
        let records: Vec<EventRecord> = events::read_jsonl(&self.out(EVENTS))?;
        let msgs = self.messages(stage)?;
        let resolved = events::resolve_records(&records, &msgs)?;
        let mut groups: BTreeMap<(String, String), Vec<CrowdPumpEvent>> = BTreeMap::new();
        for (r, e) in records.iter().zip(resolved) {
            let period = r.period.clone().unwrap_or_default();
            groups.entry((period, e.cryptocurrency.clone())).or_default().push(e);
        }
        Ok(groups)
    }

    // -----------------------------------------------------------------------
    // flag

    pub fn flag(&self) -> Result<StageStatus, PipelineError> {
        require(&self.out(EVENTS), "flag", "events")?;
        let inputs = [self.out(MESSAGES), self.out(EVENTS)];
        self.stage("flag", &inputs, &[self.out(FLAGS)], || {
            let groups = self.event_groups("flag")?;
            let flags: Vec<Flag> = groups.values().flat_map(|evs| events::flag_concurrent_broadcasts(evs)).collect();
            info!("flag: {} events flagged", flags.len());
            write_json(&self.out(FLAGS), &flags)
        })
    }

    // -----------------------------------------------------------------------
    // graphs

    pub fn graphs(&self) -> Result<StageStatus, PipelineError> {
        require(&self.out(EVENTS), "graphs", "events")?;
        let inputs = [self.out(MESSAGES), self.out(EVENTS)];
        self.stage("graphs", &inputs, &[self.out(GRAPHS), self.out(GRAPH_EXPORTS)], || {
            let groups = self.event_groups("graphs")?;
            let mut graphs = Vec::new();
            let mut dropped = Vec::new();
            for ((period, coin), evs) in &groups {
                match diffusion::infer_graph(coin, period, evs, self.cfg.aggregation) {
                    Ok(g) => graphs.push(g),
                    Err(DiffusionError::GraphTooSmall(n)) => {
                        dropped.push(format!("{period}:{coin}"));
                        log::debug!("graphs: {period}:{coin} has {n} < {MIN_SPREADERS} spreaders");
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            let export_dir = self.out(GRAPH_EXPORTS);
            if export_dir.exists() {
                std::fs::remove_dir_all(&export_dir).map_err(|e| PipelineError::io(&export_dir, e))?;
            }
            std::fs::create_dir_all(&export_dir).map_err(|e| PipelineError::io(&export_dir, e))?;
            for g in &graphs {
                diffusion::export_graph(&export_dir, &g.graph_id().replace(':', "_"), g)?;
            }
            info!("graphs: {} graphs, {} event sets too small", graphs.len(), dropped.len());
            write_json(&self.out(GRAPHS), &GraphsArtifact { artifact_version: ARTIFACT_VERSION, dropped, graphs })
        })
    }

    fn load_graphs(&self, stage: &'static str) -> Result<Vec<DiffusionGraph>, PipelineError> {
        Ok(read_json::<GraphsArtifact>(&self.out(GRAPHS), stage, "graphs")?.graphs)
    }

    // -----------------------------------------------------------------------
    // featurize

    pub fn featurize(&self) -> Result<StageStatus, PipelineError> {
        self.cfg.validate(Needs { prices: true, labels: true, ..Needs::default() })?;
        require(&self.out(GRAPHS), "featurize", "graphs")?;
        let inputs = [
            self.out(MESSAGES),
            self.out(EVENTS),
            self.out(GRAPHS),
            self.cfg.prices_dir.clone(),
            self.cfg.labels.clone(),
        ];
        self.stage("featurize", &inputs, &[self.out(FEATURES), self.out(FEATURES_CSV)], || {
            let graphs = self.load_graphs("featurize")?;
            let groups = self.event_groups("featurize")?;
            let msgs = self.messages("featurize")?;
            let series = market::load_price_dir(&self.cfg.prices_dir)?;
            let (outcomes, missing) = market::compute_outcomes(&msgs, &series, self.cfg.return_rule);
            if !missing.is_empty() {
                warn!("featurize: {} messages lack price data", missing.len());
            }
            let by_pid: HashMap<u64, MarketOutcome> = outcomes.into_iter().map(|o| (o.pid, o)).collect();
            let labels = Labels::load(&self.cfg.labels)?;
            let mut matrices = Vec::new();
            let mut zero = 0;
            for g in &graphs {
                let evs = groups.get(&(g.period.clone(), g.cryptocurrency.clone())).map(Vec::as_slice).unwrap_or(&[]);
                let (rows, z) = features::graph_features(g, evs, &by_pid);
                zero += z;
                matrices.push(features::assemble_matrix(g, &rows, &labels)?);
            }
            features::write_feature_csv(&self.out(FEATURES_CSV), &matrices)?;
            write_json(
                &self.out(FEATURES),
                &FeaturesArtifact {
                    artifact_version: ARTIFACT_VERSION,
                    columns: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
                    matrices,
                    zero_target_spreaders: zero,
                    missing_market: missing,
                },
            )
        })
    }

    fn load_features(&self, stage: &'static str) -> Result<Vec<FeatureMatrix>, PipelineError> {
        Ok(read_json::<FeaturesArtifact>(&self.out(FEATURES), stage, "featurize")?.matrices)
    }

    // -----------------------------------------------------------------------
    // train

    pub fn train(&self) -> Result<StageStatus, PipelineError> {
        require(&self.out(FEATURES), "train", "featurize")?;
        let inputs = [self.out(GRAPHS), self.out(FEATURES)];
        let outputs: Vec<PathBuf> = self.cfg.variants.iter().map(|&v| self.model_path(v)).collect();
        self.stage("train", &inputs, &outputs, || {
            let graphs = self.load_graphs("train")?;
            let fms = self.load_features("train")?;
            let pairs = pair_up(&graphs, &fms)?;
            let train_x: Vec<&pumptrace_core::matrix::Matrix> =
                pairs.iter().filter(|(g, _)| g.period == "train").map(|(_, f)| &f.x).collect();
            let standardizer = Standardizer::fit(train_x)?;
            for &variant in &self.cfg.variants {
                let data = |period: &str| -> Result<Vec<GraphData>, PipelineError> {
                    pairs
                        .iter()
                        .filter(|(g, _)| g.period == period)
                        .map(|(g, f)| graph_data(g, f, &standardizer, variant))
                        .collect()
                };
                let (tr, va) = (data("train")?, data("val")?);
                let config = self.cfg.model_for(variant);
                let outcome = gnn::train(&config, &tr, &va)?;
                let threshold = tuned_threshold(&outcome.params, &va, &self.cfg.threshold_grid)?.unwrap_or(config.threshold);
                info!(
                    "train[{}]: {} train / {} val graphs, best epoch {}, threshold {threshold}",
                    variant_name(variant),
                    tr.len(),
                    va.len(),
                    outcome.best_epoch
                );
                let doc = ModelDocument::new(outcome.params, threshold, Some(standardizer.clone()));
                let path = self.model_path(variant);
                std::fs::create_dir_all(path.parent().expect("model dir")).map_err(|e| PipelineError::io(&path, e))?;
                std::fs::write(&path, doc.to_json() + "\n").map_err(|e| PipelineError::io(&path, e))?;
                let hist = self.timing_path(&format!("history_{}.csv", variant_name(variant)));
                std::fs::create_dir_all(hist.parent().expect("timing dir")).map_err(|e| PipelineError::io(&hist, e))?;
                gnn::write_history_csv(&hist, &outcome.history)?;
            }
            Ok(())
        })
    }

    fn load_model(&self, v: GraphVariant, stage: &'static str) -> Result<ModelDocument, PipelineError> {
        let path = self.model_path(v);
        require(&path, stage, "train")?;
        let text = std::fs::read_to_string(&path).map_err(|e| PipelineError::io(&path, e))?;
        Ok(ModelDocument::from_json(&text)?)
    }

    // -----------------------------------------------------------------------
    // infer

    /// Predictions for every graph; returns the detections of the configured variant.
    pub fn infer(&self) -> Result<(StageStatus, Vec<Detection>), PipelineError> {
        require(&self.out(FEATURES), "infer", "featurize")?;
        let mut inputs = vec![self.out(GRAPHS), self.out(FEATURES)];
        for &v in &self.cfg.variants {
            require(&self.model_path(v), "infer", "train")?;
            inputs.push(self.model_path(v));
        }
        let status = self.stage("infer", &inputs, &[self.out(PREDICTIONS)], || {
            let graphs = self.load_graphs("infer")?;
            let fms = self.load_features("infer")?;
            let pairs = pair_up(&graphs, &fms)?;
            let mut all: BTreeMap<String, Vec<Prediction>> = BTreeMap::new();
            let mut timings: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
            for &v in &self.cfg.variants {
                let doc = self.load_model(v, "infer")?;
                let std = doc.standardizer.clone().ok_or_else(|| {
                    PipelineError::data(format!("model {} has no standardization parameters", variant_name(v)))
                })?;
                let mut preds = Vec::new();
                for (g, f) in &pairs {
                    let started = Instant::now();
                    let gd = graph_data(g, f, &std, v)?;
                    let (labels, probs) = doc.params.predict(&gd, doc.threshold)?;
                    timings.entry(variant_name(v).into()).or_default().push((g.len(), started.elapsed().as_secs_f64()));
                    for (i, node) in g.nodes.iter().enumerate() {
                        preds.push(Prediction {
                            graph_id: g.graph_id(),
                            period: g.period.clone(),
                            entity_id: node.clone(),
                            probability: probs[i],
                            label: f.labels[i],
                            predicted: labels[i],
                        });
                    }
                }
                all.insert(variant_name(v).into(), preds);
            }
            write_json(&self.timing_path("inference.json"), &timings)?;
            write_json(&self.out(PREDICTIONS), &all)
        })?;
        Ok((status, self.detections()?))
    }

    pub fn primary_variant(&self) -> GraphVariant {
        if self.cfg.variants.contains(&self.cfg.model.graph_variant) {
            self.cfg.model.graph_variant
        } else {
            self.cfg.variants[0]
        }
    }

    pub fn predictions(&self, stage: &'static str) -> Result<BTreeMap<String, Vec<Prediction>>, PipelineError> {
        read_json(&self.out(PREDICTIONS), stage, "infer")
    }

    /// Predicted masterminds of the primary variant, by graph then descending probability.
    pub fn detections(&self) -> Result<Vec<Detection>, PipelineError> {
        self.select(|p| p.predicted == 1)
    }

    /// Like [`Pipeline::detections`] with a different decision threshold.
    pub fn detections_at(&self, threshold: f64) -> Result<Vec<Detection>, PipelineError> {
        self.select(|p| p.probability >= threshold)
    }

    fn select(&self, keep: impl Fn(&Prediction) -> bool) -> Result<Vec<Detection>, PipelineError> {
        let all = self.predictions("infer")?;
        let mut out: Vec<Detection> = all
            .get(variant_name(self.primary_variant()))
            .map(Vec::as_slice)
            .unwrap_or(&[])
            .iter()
            .filter(|p| keep(p))
            .map(|p| Detection { graph_id: p.graph_id.clone(), entity_id: p.entity_id.clone(), probability: p.probability })
            .collect();
        out.sort_by(|a, b| a.graph_id.cmp(&b.graph_id).then(b.probability.total_cmp(&a.probability)).then(a.entity_id.cmp(&b.entity_id)));
        Ok(out)
    }

    // -----------------------------------------------------------------------
    // evaluate

    pub fn evaluate(&self) -> Result<StageStatus, PipelineError> {
        require(&self.out(PREDICTIONS), "evaluate", "infer")?;
        let inputs = [self.out(SPLIT), self.out(GRAPHS), self.out(FEATURES), self.out(PREDICTIONS)];
        self.stage("evaluate", &inputs, &[self.out(REPORT), self.out(CURVES)], || {
            let plan = self.split_plan("evaluate")?;
            let preds = self.predictions("evaluate")?;
            let graphs = self.load_graphs("evaluate")?;
            let fms = self.load_features("evaluate")?;
            let curves = self.out(CURVES);
            std::fs::create_dir_all(&curves).map_err(|e| PipelineError::io(&curves, e))?;
            let mut variants = BTreeMap::new();
            for (name, ps) in &preds {
                let ev = crate::report::evaluate_variant(ps, &self.cfg.threshold_grid);
                for (split, rows) in [("val", &ev.val_sweep), ("test", &ev.test_sweep)] {
                    let path = curves.join(format!("{name}_{split}_sweep.csv"));
                    let file = std::fs::File::create(&path).map_err(|e| PipelineError::io(&path, e))?;
                    eval::write_sweep_csv(file, rows).map_err(|e| PipelineError::io(&path, e))?;
                }
                variants.insert(name.clone(), ev);
            }
            let report = crate::report::Report {
                artifact_version: ARTIFACT_VERSION,
                config: self.cfg.clone(),
                split: plan,
                variants,
                t_tests: crate::report::feature_t_tests(&fms),
                communities: crate::report::community_summary(&graphs, &fms),
                notes: crate::report::NOTES.iter().map(|s| s.to_string()).collect(),
            };
            for (name, v) in &report.variants {
                info!(
                    "evaluate[{name}]: threshold {} test F1 {:.3} precision {:.3} recall {:.3} MCC {:.3} AUC {}",
                    v.threshold,
                    v.test.metrics.f1,
                    v.test.metrics.precision,
                    v.test.metrics.recall,
                    v.test.metrics.mcc,
                    v.test.auc.map_or("n/a".into(), |a| format!("{a:.3}"))
                );
            }
            write_json(&self.out(REPORT), &report)?;
            self.write_timing_report()
        })
    }

    fn write_timing_report(&self) -> Result<(), PipelineError> {
        let inference: BTreeMap<String, Vec<(usize, f64)>> =
            read_json(&self.timing_path("inference.json"), "evaluate", "infer").unwrap_or_default();
        let mut out = BTreeMap::new();
        for &v in &self.cfg.variants {
            let name = variant_name(v);
            let epochs = read_epoch_seconds(&self.timing_path(&format!("history_{name}.csv")));
            let inf = inference.get(name).cloned().unwrap_or_default();
            out.insert(name.to_string(), eval::timing_report(&epochs, &inf));
        }
        write_json(&self.timing_path("timing_report.json"), &out)
    }

    // -----------------------------------------------------------------------

    pub fn run(&self, stage: &str) -> Result<Option<Vec<Detection>>, PipelineError> {
        match stage {
            "synth" => self.synth().map(|_| None),
            "parse" => self.parse().map(|_| None),
            "split" => self.split().map(|_| None),
            "events" => self.events().map(|_| None),
            "flag" => self.flag().map(|_| None),
            "graphs" => self.graphs().map(|_| None),
            "featurize" => self.featurize().map(|_| None),
            "train" => self.train().map(|_| None),
            "infer" => self.infer().map(|(_, d)| Some(d)),
            "evaluate" => self.evaluate().map(|_| None),
            "all" => {
                let mut detections = None;
                for s in STAGES {
                    if let Some(d) = self.run(s)? {
                        detections = Some(d);
                    }
                }
                Ok(detections)
            }
            other => Err(PipelineError::Config(vec![format!("unknown stage {other:?}")])),
        }
    }
}

fn read_epoch_seconds(path: &Path) -> Vec<f64> {
    let Ok(text) = std::fs::read_to_string(path) else { return Vec::new() };
    text.lines().skip(1).filter_map(|l| l.rsplit(',').next()?.parse().ok()).collect()
}

/// Graphs and feature matrices matched by graph id, in graph order.
pub fn pair_up<'a>(
    graphs: &'a [DiffusionGraph],
    fms: &'a [FeatureMatrix],
) -> Result<Vec<(&'a DiffusionGraph, &'a FeatureMatrix)>, PipelineError> {
    let by_id: HashMap<&str, &FeatureMatrix> = fms.iter().map(|f| (f.graph_id.as_str(), f)).collect();
    graphs
        .iter()
        .map(|g| {
            let id = g.graph_id();
            let f = by_id.get(id.as_str()).ok_or_else(|| PipelineError::data(format!("no features for graph {id}")))?;
            if f.nodes != g.nodes {
                return Err(PipelineError::data(format!("graph {id}: feature rows do not match nodes")));
            }
            Ok((g, *f))
        })
        .collect()
}

pub fn graph_data(g: &DiffusionGraph, f: &FeatureMatrix, std: &Standardizer, variant: GraphVariant) -> Result<GraphData, PipelineError> {
    Ok(GraphData {
        graph_id: g.graph_id(),
        nodes: g.nodes.clone(),
        neighbors: gnn::neighborhoods(g, variant),
        x: std.transform(&f.x)?,
        y: f.labels.iter().map(|&l| f64::from(l)).collect(),
    })
}

/// Best-F1 threshold on the validation graphs, if there are any.
pub fn tuned_threshold(params: &gnn::ModelParams, val: &[GraphData], grid: &[f64]) -> Result<Option<f64>, PipelineError> {
    if val.is_empty() {
        return Ok(None);
    }
    let (_, probs, labels) = gnn::evaluate_batches(params, val, 0.5)?;
    Ok(eval::best_threshold(&eval::threshold_sweep(&probs, &labels, grid)))
}

pub fn confusion_of(preds: &[&Prediction], threshold: f64) -> Confusion {
    let probs: Vec<f64> = preds.iter().map(|p| p.probability).collect();
    let labels: Vec<u8> = preds.iter().map(|p| p.label).collect();
    Confusion::at_threshold(&probs, &labels, threshold)
}
