//! Declarative run configuration.
//!
//! A config file only needs the keys it changes: it is merged key by key
//! over [`PipelineConfig::default`]. Relative input paths resolve against
//! the config file's directory.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::ClassifierConfig;
use crate::cluster::KmeansConfig;
use crate::data::{MonoLabelConfig, DEFAULT_MIN_YEAR};
use crate::embed::SgnsConfig;
use crate::error::{Error, Result};
use crate::metrics::element_centric::DEFAULT_ALPHA;
use crate::metrics::idw::DEFAULT_POWER;
use crate::topics::{LdaConfig, ScanConfig};
use crate::walks::{stream_seed, WalkConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    P2v,
    Citation,
    CitationN2v,
    Cocitation,
    CocitationN2v,
    Scopus,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 6] = [
        SchemeKind::P2v,
        SchemeKind::Citation,
        SchemeKind::CitationN2v,
        SchemeKind::Cocitation,
        SchemeKind::CocitationN2v,
        SchemeKind::Scopus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::P2v => "p2v",
            SchemeKind::Citation => "citation",
            SchemeKind::CitationN2v => "citation-n2v",
            SchemeKind::Cocitation => "cocitation",
            SchemeKind::CocitationN2v => "cocitation-n2v",
            SchemeKind::Scopus => "scopus",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InputPaths {
    pub papers: PathBuf,
    pub citations: PathBuf,
    pub abstracts: PathBuf,
    /// Needed by the `scopus` scheme only.
    pub scopus: Option<PathBuf>,
    /// `periodical_name \t x \t y`; PCA of the P2V embedding when absent.
    pub coordinates: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicsConfig {
    pub lda: LdaConfig,
    /// Select the topic count by coherence before the final fit.
    pub scan_enabled: bool,
    pub scan: ScanConfig,
    /// Fit the final model on the scan sample instead of every document.
    pub final_fit_on_sample: bool,
}

impl Default for TopicsConfig {
    fn default() -> Self {
        Self { lda: LdaConfig::default(), scan_enabled: true, scan: ScanConfig::default(), final_fit_on_sample: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportConfig {
    /// Scheme pairs for flow tables and similarity maps; every pair of
    /// configured schemes when unset.
    pub pairs: Option<Vec<[SchemeKind; 2]>>,
    pub maps: bool,
    pub idw_power: f64,
    pub grid_nx: usize,
    pub grid_ny: usize,
    pub similarity_alpha: f64,
}

impl Default for ExportConfig {
    fn default() -> Self {
        Self {
            pairs: None,
            maps: true,
            idw_power: DEFAULT_POWER,
            grid_nx: 100,
            grid_ny: 100,
            similarity_alpha: DEFAULT_ALPHA,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Every stage seed is derived from this one.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub schemes: Vec<SchemeKind>,
    pub min_year: i32,
    pub input: InputPaths,
    pub trails: WalkConfig,
    pub p2v: SgnsConfig,
    pub node2vec: WalkConfig,
    pub node2vec_sgns: SgnsConfig,
    pub kmeans: KmeansConfig,
    pub monolabel: MonoLabelConfig,
    pub classifier: ClassifierConfig,
    pub topics: TopicsConfig,
    pub export: ExportConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            schemes: SchemeKind::ALL.to_vec(),
            min_year: DEFAULT_MIN_YEAR,
            input: InputPaths::default(),
            trails: WalkConfig::citation_trails(),
            p2v: SgnsConfig::default(),
            node2vec: WalkConfig::node2vec(),
            node2vec_sgns: SgnsConfig { window: 10, epochs: 1, ..SgnsConfig::default() },
            kmeans: KmeansConfig::default(),
            monolabel: MonoLabelConfig::default(),
            classifier: ClassifierConfig::default(),
            topics: TopicsConfig::default(),
            export: ExportConfig::default(),
        }
    }
}

fn merge(base: &mut toml::Value, overlay: toml::Value) {
    match (base, overlay) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.as_os_str().is_empty() || p.is_absolute() {
        return;
    }
    *p = base.join(&*p);
}

impl PipelineConfig {
    /// Parses TOML text merged over the defaults; paths stay as written.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let overlay: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut base = toml::Value::try_from(Self::default()).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut base, overlay);
        base.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    /// Loads a config file, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let inp = &mut cfg.input;
        for p in [&mut inp.papers, &mut inp.citations, &mut inp.abstracts, &mut cfg.output_dir] {
            resolve(base, p);
        }
        for p in [&mut inp.scopus, &mut inp.coordinates].into_iter().flatten() {
            resolve(base, p);
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn wants(&self, scheme: SchemeKind) -> bool {
        self.schemes.contains(&scheme)
    }

    /// Scheme pairs compared in exports.
    pub fn export_pairs(&self) -> Vec<(SchemeKind, SchemeKind)> {
        match &self.export.pairs {
            Some(pairs) => {
                pairs.iter().map(|[a, b]| (*a, *b)).filter(|(a, b)| self.wants(*a) && self.wants(*b)).collect()
            }
            None => {
                let s = &self.schemes;
                (0..s.len()).flat_map(|i| (i + 1..s.len()).map(move |j| (s[i], s[j]))).collect()
            }
        }
    }

    /// Copy with every stage seed derived from the global seed and the
    /// stage's own seed value.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        let g = self.seed;
        c.trails.seed = stream_seed(g, 1, self.trails.seed);
        c.p2v.seed = stream_seed(g, 2, self.p2v.seed);
        c.node2vec.seed = stream_seed(g, 3, self.node2vec.seed);
        c.node2vec_sgns.seed = stream_seed(g, 4, self.node2vec_sgns.seed);
        c.kmeans.seed = stream_seed(g, 5, self.kmeans.seed);
        c.classifier.seed = stream_seed(g, 6, self.classifier.seed);
        c.topics.lda.seed = stream_seed(g, 7, self.topics.lda.seed);
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() {
            return Err(Error::Config("scheme list is empty".into()));
        }
        let mut seen = self.schemes.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.schemes.len() {
            return Err(Error::Config("scheme list has duplicates".into()));
        }
        let mut required = vec![
            ("papers", &self.input.papers),
            ("citations", &self.input.citations),
            ("abstracts", &self.input.abstracts),
        ];
        if self.wants(SchemeKind::Scopus) {
            match &self.input.scopus {
                Some(p) => required.push(("scopus", p)),
                None => return Err(Error::Config("the scopus scheme needs input.scopus".into())),
            }
        }
        if let Some(p) = &self.input.coordinates {
            required.push(("coordinates", p));
        }
        for (name, path) in required {
            if path.as_os_str().is_empty() {
                return Err(Error::Config(format!("input.{name} is not set")));
            }
            if !path.exists() {
                return Err(Error::Config(format!("input.{name}: {} does not exist", path.display())));
            }
        }
        self.trails.validate()?;
        self.node2vec.validate()?;
        self.p2v.validate()?;
        self.node2vec_sgns.validate()?;
        if self.kmeans.k == 0 {
            return Err(Error::Config("kmeans.k must be >= 1".into()));
        }
        self.classifier.validate()?;
        self.topics.lda.validate()?;
        if self.topics.scan_enabled && self.topics.scan.grid.is_empty() {
            return Err(Error::Config("topics.scan.grid is empty".into()));
        }
        let e = &self.export;
        if !(e.idw_power > 0.0) || e.grid_nx == 0 || e.grid_ny == 0 {
            return Err(Error::Config("export needs idw_power > 0 and a non-empty grid".into()));
        }
        if !(e.similarity_alpha > 0.0 && e.similarity_alpha < 1.0) {
            return Err(Error::Config("export.similarity_alpha must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_sections_keep_their_defaults() {
        let cfg = PipelineConfig::from_toml_str(
            "seed = 9\nschemes = [\"p2v\", \"cocitation-n2v\"]\n[trails]\nwalk_length = 4\n[kmeans]\nk = 4\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.schemes, vec![SchemeKind::P2v, SchemeKind::CocitationN2v]);
        assert_eq!(cfg.trails.walk_length, 4);
        assert_eq!(cfg.trails.walks_per_source, 10);
        assert_eq!(cfg.kmeans.k, 4);
        assert_eq!(cfg.kmeans.restarts, 10);
        assert_eq!(cfg.node2vec_sgns.window, 10);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = PipelineConfig::default();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(PipelineConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn bad_values_are_config_errors() {
        assert!(PipelineConfig::from_toml_str("schemes = [\"wos\"]").unwrap_err().is_validation());
        assert!(PipelineConfig::from_toml_str("seed = \"x\"").is_err());
        let empty = PipelineConfig { schemes: vec![], ..Default::default() };
        assert!(empty.validate().unwrap_err().is_validation());
        let missing = PipelineConfig::default();
        assert!(missing.validate().is_err());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "output_dir = \"o\"\n[input]\npapers = \"p.tsv\"\nscopus = \"/abs/s.tsv\"\n").unwrap();
        let cfg = PipelineConfig::load(&path).unwrap();
        assert_eq!(cfg.input.papers, dir.path().join("p.tsv"));
        assert_eq!(cfg.output_dir, dir.path().join("o"));
        assert_eq!(cfg.input.scopus, Some(PathBuf::from("/abs/s.tsv")));
    }

    #[test]
    fn export_pairs_default_to_all_pairs() {
        let cfg = PipelineConfig {
            schemes: vec![SchemeKind::P2v, SchemeKind::Citation, SchemeKind::Scopus],
            ..Default::default()
        };
        assert_eq!(cfg.export_pairs().len(), 3);
        let cfg = PipelineConfig {
            export: ExportConfig {
                pairs: Some(vec![[SchemeKind::Scopus, SchemeKind::P2v], [SchemeKind::Scopus, SchemeKind::Cocitation]]),
                ..Default::default()
            },
            ..cfg
        };
        assert_eq!(cfg.export_pairs(), vec![(SchemeKind::Scopus, SchemeKind::P2v)]);
    }

    #[test]
    fn resolved_seeds_depend_on_the_global_seed() {
        let a = PipelineConfig { seed: 1, ..Default::default() }.resolved();
        let b = PipelineConfig { seed: 2, ..Default::default() }.resolved();
        assert_ne!(a.trails.seed, b.trails.seed);
        assert_ne!(a.trails.seed, a.p2v.seed);
        assert_eq!(a, PipelineConfig { seed: 1, ..Default::default() }.resolved());
    }

    #[test]
    fn scheme_names() {
        for s in SchemeKind::ALL {
            assert_eq!(SchemeKind::parse(s.name()), Some(s));
            let quoted = serde_json::to_string(&s).unwrap();
            assert_eq!(quoted, format!("\"{}\"", s.name()));
        }
    }
}
