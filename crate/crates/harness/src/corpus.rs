//! Synthetic app corpus with a planted class signal.
//!
//! Malicious apps route a larger fraction of their user-code calls
//! into a small set of sensitive packages. A class-independent
//! API-to-API call skeleton inflates the total call count so that the
//! discriminative user rows stay a small fraction of each graph,
//! which keeps minimal evading perturbations small relative to
//! E_total. Generation is deterministic per (config, seed) and every
//! emitted app has candidate callers and callees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use fcg_core::{candidate_endpoints, AppLabel, FunctionCallGraph, FunctionNode};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid corpus config: {0}")]
    Invalid(String),

    #[error("could not satisfy candidate-set requirement for app {0} after 32 attempts")]
    Unsatisfiable(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Graph(#[from] fcg_core::FcgError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub benign_apps: usize,
    pub malicious_apps: usize,
    /// when set, overrides benign_apps with ratio * malicious_apps
    pub benign_malicious_ratio: Option<f64>,
    pub year_min: i32,
    pub year_max: i32,
    /// user-defined functions per app, inclusive range
    pub user_nodes_min: usize,
    pub user_nodes_max: usize,
    /// calls made by each user function, inclusive range
    pub user_calls_min: usize,
    pub user_calls_max: usize,
    /// probability a user call targets another user function
    pub internal_call_prob: f64,
    /// API-to-API skeleton calls per app, inclusive range
    pub api_calls_min: usize,
    pub api_calls_max: usize,
    pub api_families: usize,
    pub packages_per_family: usize,
    pub classes_per_package: usize,
    pub methods_per_class: usize,
    /// number of sensitive packages, taken from the flat package list
    pub sensitive_packages: usize,
    /// per-year rotation of the sensitive window (0 = stationary)
    pub drift_step: usize,
    /// probability a non-sensitive user call lands in the anchor
    /// family (family 0) rather than spreading uniformly
    pub anchor_weight: f64,
    /// probability that a malicious user call hits a sensitive package
    pub p_mal: f64,
    /// same for benign apps; must be smaller than p_mal
    pub p_ben: f64,
    /// probability that an API function is public
    pub api_public_prob: f64,
    /// probability that an API function has only simple parameters
    pub api_simple_params_prob: f64,
    /// expected try-catch blocks per call
    pub trycatch_density: f64,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            benign_apps: 100,
            malicious_apps: 100,
            benign_malicious_ratio: None,
            year_min: 2016,
            year_max: 2020,
            user_nodes_min: 4,
            user_nodes_max: 6,
            user_calls_min: 2,
            user_calls_max: 3,
            internal_call_prob: 0.1,
            api_calls_min: 320,
            api_calls_max: 460,
            api_families: 6,
            packages_per_family: 3,
            classes_per_package: 4,
            methods_per_class: 3,
            sensitive_packages: 2,
            drift_step: 0,
            anchor_weight: 0.7,
            p_mal: 0.5,
            p_ben: 0.03,
            api_public_prob: 0.85,
            api_simple_params_prob: 0.8,
            trycatch_density: 0.08,
            seed: 0,
        }
    }
}

impl CorpusConfig {
    pub fn benign_count(&self) -> usize {
        match self.benign_malicious_ratio {
            Some(ratio) => (self.malicious_apps as f64 * ratio).round() as usize,
            None => self.benign_apps,
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let prob = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(CorpusError::Invalid(format!("{name} must be in [0,1]")))
            }
        };
        prob("p_mal", self.p_mal)?;
        prob("p_ben", self.p_ben)?;
        prob("internal_call_prob", self.internal_call_prob)?;
        prob("api_public_prob", self.api_public_prob)?;
        prob("api_simple_params_prob", self.api_simple_params_prob)?;
        prob("trycatch_density", self.trycatch_density)?;
        prob("anchor_weight", self.anchor_weight)?;
        if self.p_mal <= self.p_ben {
            return Err(CorpusError::Invalid("p_mal must exceed p_ben".into()));
        }
        if self.malicious_apps == 0 || self.benign_count() == 0 {
            return Err(CorpusError::Invalid("app counts must be positive".into()));
        }
        if self.user_nodes_min == 0
            || self.user_nodes_min > self.user_nodes_max
            || self.user_calls_min == 0
            || self.user_calls_min > self.user_calls_max
            || self.api_calls_min > self.api_calls_max
        {
            return Err(CorpusError::Invalid("malformed count ranges".into()));
        }
        if self.year_min > self.year_max {
            return Err(CorpusError::Invalid("year range is empty".into()));
        }
        if self.api_families < 2 || self.packages_per_family == 0 {
            return Err(CorpusError::Invalid(
                "need at least two api families and one package each".into(),
            ));
        }
        let total_packages = self.api_families * self.packages_per_family;
        if self.sensitive_packages == 0 || self.sensitive_packages >= total_packages {
            return Err(CorpusError::Invalid(
                "sensitive package count must be in (0, total packages)".into(),
            ));
        }
        Ok(())
    }
}

const FAMILY_POOL: &[&str] = &["java", "android", "com", "org", "javax", "kotlin", "net", "io"];
const SEGMENT_POOL: &[&str] = &["lang", "io", "util", "net", "os", "content", "view", "text"];
const CLASS_POOL: &[&str] = &[
    "Handler", "Manager", "Util", "Parser", "Builder", "Client", "Service", "Reader",
];
const METHOD_POOL: &[&str] = &["run", "get", "put", "read", "write", "send", "init", "close"];

/// The fixed API name universe of a config.
struct ApiUniverse {
    /// flat list of (family index, package name)
    packages: Vec<(usize, String)>,
}

impl ApiUniverse {
    fn new(cfg: &CorpusConfig) -> Self {
        let families: Vec<String> = (0..cfg.api_families)
            .map(|i| {
                FAMILY_POOL
                    .get(i)
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| format!("fam{i}"))
            })
            .collect();
        let mut packages = Vec::new();
        for (fi, family) in families.iter().enumerate() {
            for p in 0..cfg.packages_per_family {
                let segment = SEGMENT_POOL
                    .get(p)
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| format!("p{p}"));
                packages.push((fi, format!("{family}.{segment}")));
            }
        }
        ApiUniverse { packages }
    }

    fn class_name(&self, class_index: usize) -> String {
        CLASS_POOL
            .get(class_index)
            .map(|s| s.to_string())
            .unwrap_or_else(|| format!("C{class_index}"))
    }

    fn method_name(&self, method_index: usize) -> String {
        METHOD_POOL
            .get(method_index)
            .map(|s| s.to_string())
            .unwrap_or_else(|| format!("m{method_index}"))
    }
}

/// Sensitive package indices for an app of year `year`.
fn sensitive_window(cfg: &CorpusConfig, year: i32) -> Vec<usize> {
    let total = cfg.api_families * cfg.packages_per_family;
    let shift = cfg.drift_step * (year - cfg.year_min).max(0) as usize;
    // the stationary window starts inside the second family so that
    // the first family is a clean benign anchor
    let start = (cfg.packages_per_family + shift) % total;
    (0..cfg.sensitive_packages).map(|i| (start + i) % total).collect()
}

/// An in-memory corpus; files on disk are its canonical serialization.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub graphs: Vec<FunctionCallGraph>,
}

impl Corpus {
    pub fn by_id(&self, app_id: &str) -> Option<&FunctionCallGraph> {
        self.graphs.iter().find(|g| g.app_id == app_id)
    }
}

/// Generates the full corpus in memory, deterministically.
pub fn gen_corpus(cfg: &CorpusConfig) -> Result<Corpus, CorpusError> {
    cfg.validate()?;
    let universe = ApiUniverse::new(cfg);
    let mut graphs = Vec::new();
    let benign = cfg.benign_count();
    for i in 0..benign {
        graphs.push(gen_app(cfg, &universe, AppLabel::Benign, i)?);
    }
    for i in 0..cfg.malicious_apps {
        graphs.push(gen_app(cfg, &universe, AppLabel::Malicious, i)?);
    }
    Ok(Corpus { graphs })
}

/// Writes one canonical file per app into `dir`.
pub fn write_corpus(corpus: &Corpus, dir: &std::path::Path) -> Result<Vec<String>, CorpusError> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for g in &corpus.graphs {
        let name = format!("{}.json", g.app_id);
        fcg_core::write_fcg(g, dir.join(&name))?;
        files.push(name);
    }
    Ok(files)
}

/// Loads every `*.json` graph document in `dir`.
pub fn load_corpus(dir: &std::path::Path) -> Result<Corpus, CorpusError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut graphs = Vec::new();
    for p in paths {
        graphs.push(fcg_core::parse_fcg(&p)?);
    }
    Ok(Corpus { graphs })
}

fn gen_app(
    cfg: &CorpusConfig,
    universe: &ApiUniverse,
    label: AppLabel,
    ordinal: usize,
) -> Result<FunctionCallGraph, CorpusError> {
    let tag = match label {
        AppLabel::Benign => "ben",
        AppLabel::Malicious => "mal",
        AppLabel::Unknown => "unk",
    };
    let app_id = format!("{tag}-{ordinal:04}");
    let class_bit = if label == AppLabel::Malicious { 1 } else { 0 };
    let base = cfg
        .seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add((ordinal as u64) << 1 | class_bit);
    for attempt in 0..32u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(base.wrapping_add(attempt.wrapping_mul(0x517c_c1b7_2722_0a95)));
        let graph = build_app(cfg, universe, label, &app_id, &mut rng)?;
        if candidate_endpoints(&graph).is_attackable() {
            return Ok(graph);
        }
    }
    Err(CorpusError::Unsatisfiable(app_id))
}

fn build_app(
    cfg: &CorpusConfig,
    universe: &ApiUniverse,
    label: AppLabel,
    app_id: &str,
    rng: &mut ChaCha8Rng,
) -> Result<FunctionCallGraph, CorpusError> {
    let year = rng.random_range(cfg.year_min..=cfg.year_max);
    let sensitive = sensitive_window(cfg, year);
    let p_sensitive = match label {
        AppLabel::Malicious => cfg.p_mal,
        _ => cfg.p_ben,
    };

    let mut nodes: Vec<FunctionNode> = Vec::new();
    let mut edges: Vec<(u32, u32, u64)> = Vec::new();
    // api function key -> node id
    let mut api_ids: std::collections::HashMap<(usize, usize, usize), u32> =
        std::collections::HashMap::new();

    let n_user = rng.random_range(cfg.user_nodes_min..=cfg.user_nodes_max);
    for i in 0..n_user {
        nodes.push(FunctionNode {
            id: i as u32,
            package: if i % 3 == 0 { "app.core" } else { "app.ui" }.to_string(),
            class_name: format!("U{}", i / 3),
            method: format!("run{i}"),
            user_defined: true,
            is_public: true,
            simple_params: true,
        });
    }

    let mut next_id = n_user as u32;
    let mut api_node = |package_index: usize,
                        class_index: usize,
                        method_index: usize,
                        nodes: &mut Vec<FunctionNode>,
                        rng: &mut ChaCha8Rng|
     -> u32 {
        *api_ids
            .entry((package_index, class_index, method_index))
            .or_insert_with(|| {
                let id = next_id;
                next_id += 1;
                let (_, ref package) = universe.packages[package_index];
                nodes.push(FunctionNode {
                    id,
                    package: package.clone(),
                    class_name: universe.class_name(class_index),
                    method: universe.method_name(method_index),
                    user_defined: false,
                    is_public: rng.random_bool(cfg.api_public_prob),
                    simple_params: rng.random_bool(cfg.api_simple_params_prob),
                });
                id
            })
    };

    // user calls carry the class signal
    let total_packages = universe.packages.len();
    for caller in 0..n_user as u32 {
        let calls = rng.random_range(cfg.user_calls_min..=cfg.user_calls_max);
        for _ in 0..calls {
            if n_user > 1 && rng.random_bool(cfg.internal_call_prob) {
                let mut callee = rng.random_range(0..n_user as u32);
                if callee == caller {
                    callee = (callee + 1) % n_user as u32;
                }
                edges.push((caller, callee, 1));
                continue;
            }
            let package_index = if rng.random_bool(p_sensitive) {
                sensitive[rng.random_range(0..sensitive.len())]
            } else if rng.random_bool(cfg.anchor_weight) {
                // anchor family: family 0's packages, skipping any that
                // drifted into the sensitive window
                loop {
                    let candidate = rng.random_range(0..cfg.packages_per_family);
                    if !sensitive.contains(&candidate) {
                        break candidate;
                    }
                }
            } else {
                loop {
                    let candidate = rng.random_range(0..total_packages);
                    if !sensitive.contains(&candidate) {
                        break candidate;
                    }
                }
            };
            let class_index = rng.random_range(0..cfg.classes_per_package);
            let method_index = rng.random_range(0..cfg.methods_per_class);
            let callee = api_node(package_index, class_index, method_index, &mut nodes, rng);
            edges.push((caller, callee, 1));
        }
    }

    // class-independent api skeleton: hub methods calling within
    // their own family most of the time
    let n_api_calls = rng.random_range(cfg.api_calls_min..=cfg.api_calls_max);
    for _ in 0..n_api_calls {
        let caller_package = rng.random_range(0..total_packages);
        let caller_id = api_node(caller_package, 0, 0, &mut nodes, rng);
        let callee_package = if rng.random_bool(0.8) {
            // within family
            let (family, _) = universe.packages[caller_package];
            family * cfg.packages_per_family + rng.random_range(0..cfg.packages_per_family)
        } else {
            rng.random_range(0..total_packages)
        };
        let class_index = rng.random_range(0..cfg.classes_per_package);
        let method_index = 1 + rng.random_range(0..cfg.methods_per_class.saturating_sub(1).max(1));
        let callee_id = api_node(
            callee_package,
            class_index,
            method_index.min(cfg.methods_per_class - 1),
            &mut nodes,
            rng,
        );
        if callee_id != caller_id {
            edges.push((caller_id, callee_id, 1));
        }
    }

    let e_total = edges.iter().map(|e| e.2).sum::<u64>();
    let mut trycatch = 0u64;
    for _ in 0..e_total {
        if rng.random_bool(cfg.trycatch_density) {
            trycatch += 1;
        }
    }

    Ok(FunctionCallGraph::new(
        app_id,
        label,
        year,
        trycatch,
        nodes,
        edges,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use fcg_core::{parse_fcg_str, to_canonical_json};

    fn small_cfg() -> CorpusConfig {
        CorpusConfig {
            benign_apps: 8,
            malicious_apps: 8,
            seed: 5,
            ..CorpusConfig::default()
        }
    }

    #[test]
    fn corpus_has_requested_counts_and_roundtrips() {
        let corpus = gen_corpus(&small_cfg()).unwrap();
        assert_eq!(corpus.graphs.len(), 16);
        for g in &corpus.graphs {
            let text = to_canonical_json(g);
            assert_eq!(&parse_fcg_str(&text).unwrap(), g);
            assert!(candidate_endpoints(g).is_attackable());
            assert!(g.e_total() > 0);
        }
    }

    #[test]
    fn ratio_overrides_benign_count() {
        let cfg = CorpusConfig {
            malicious_apps: 5,
            benign_malicious_ratio: Some(10.0),
            ..small_cfg()
        };
        let corpus = gen_corpus(&cfg).unwrap();
        let benign = corpus
            .graphs
            .iter()
            .filter(|g| g.label == AppLabel::Benign)
            .count();
        assert_eq!(benign, 50);
        assert_eq!(corpus.graphs.len(), 55);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_corpus(&small_cfg()).unwrap();
        let b = gen_corpus(&small_cfg()).unwrap();
        assert_eq!(a.graphs, b.graphs);
    }

    #[test]
    fn written_files_are_byte_stable() {
        let cfg = small_cfg();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        write_corpus(&gen_corpus(&cfg).unwrap(), dir_a.path()).unwrap();
        write_corpus(&gen_corpus(&cfg).unwrap(), dir_b.path()).unwrap();
        for entry in std::fs::read_dir(dir_a.path()).unwrap() {
            let name = entry.unwrap().file_name();
            let a = std::fs::read(dir_a.path().join(&name)).unwrap();
            let b = std::fs::read(dir_b.path().join(&name)).unwrap();
            assert_eq!(a, b, "file {name:?} differs between runs");
        }
        let reloaded = load_corpus(dir_a.path()).unwrap();
        assert_eq!(reloaded.graphs.len(), 16);
    }

    #[test]
    fn drift_rotates_sensitive_window() {
        let cfg = CorpusConfig {
            drift_step: 1,
            ..CorpusConfig::default()
        };
        let w2016 = sensitive_window(&cfg, 2016);
        let w2018 = sensitive_window(&cfg, 2018);
        assert_ne!(w2016, w2018);
        let stationary = CorpusConfig::default();
        assert_eq!(
            sensitive_window(&stationary, 2016),
            sensitive_window(&stationary, 2020)
        );
    }

    #[test]
    fn invalid_probability_rejected() {
        let cfg = CorpusConfig {
            p_ben: 0.9,
            p_mal: 0.5,
            ..CorpusConfig::default()
        };
        assert!(matches!(gen_corpus(&cfg), Err(CorpusError::Invalid(_))));
    }
}
