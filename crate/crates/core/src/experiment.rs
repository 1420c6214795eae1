//! Declarative experiments: a JSON config names a simulation and/or a set of
//! limit-law tables, the test battery and the output files. Every artifact
//! carries the SHA-256 of the config; a manifest records the hash, versions,
//! seed and wall time.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::Family;
use crate::margins::{margin_by_name, margin_quantile_table, MarginSpec, QuantileTable};
use crate::sampler::{simulate, SimRecord, SimulationConfig, SimulationTarget};
use crate::stats_tests::gof::{
    anderson_darling_normal, ks_statistic, pearson_chi2, GofReport, GofTest, ReferenceCdf,
};
use crate::stats_tests::moments::{moment_suite, MomentReport};
use crate::{Grid, LawTable, LimitLaw};

/// Prefix of the hash line at the top of every CSV artifact.
pub const HASH_PREFIX: &str = "# config_hash=";

/// Exit code of a run whose assertions failed.
pub const EXIT_REJECTED: i32 = 3;

/// Which limit law, as written on the command line or in a config:
/// `gaussian`, `vg:ell=2`, `vg:n=3,s=1`, `s-limit:ell=2,r=0.99`,
/// `two-hub-mixture:r=1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LawSpec {
    pub kind: LawKind,
    pub ell: Option<u32>,
    pub r: Option<f64>,
    pub n: Option<u32>,
    pub s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LawKind {
    Gaussian,
    Vg,
    SLimit,
    TwoHubMixture,
}

impl LawKind {
    fn name(self) -> &'static str {
        match self {
            LawKind::Gaussian => "gaussian",
            LawKind::Vg => "vg",
            LawKind::SLimit => "s-limit",
            LawKind::TwoHubMixture => "two-hub-mixture",
        }
    }
}

impl FromStr for LawKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "gaussian" | "normal" => Ok(LawKind::Gaussian),
            "vg" => Ok(LawKind::Vg),
            "s-limit" => Ok(LawKind::SLimit),
            "two-hub-mixture" | "mixture" => Ok(LawKind::TwoHubMixture),
            other => Err(Error::invalid(format!(
                "unknown law `{other}` (expected gaussian, vg, s-limit or two-hub-mixture)"
            ))),
        }
    }
}

impl LawSpec {
    pub fn new(kind: LawKind) -> Self {
        LawSpec { kind, ell: None, r: None, n: None, s: None }
    }

    pub fn gaussian() -> Self {
        LawSpec::new(LawKind::Gaussian)
    }

    pub fn s_limit(ell: u32, r: f64) -> Self {
        LawSpec { ell: Some(ell), r: Some(r), ..LawSpec::new(LawKind::SLimit) }
    }

    pub fn vg_standardized(ell: u32) -> Self {
        LawSpec { ell: Some(ell), ..LawSpec::new(LawKind::Vg) }
    }

    pub fn two_hub_mixture(r: f64) -> Self {
        LawSpec { r: Some(r), ..LawSpec::new(LawKind::TwoHubMixture) }
    }

    /// `vg` with `n` is the law of `Q_n` (`s` defaults to 1); without `n` it is
    /// the standardized `VG(ell - 1)` (`ell` defaults to 2). `s-limit` needs
    /// `r` (`ell` defaults to 2); the mixture needs `r`.
    pub fn build(&self) -> Result<LimitLaw> {
        let need_r = || self.r.ok_or_else(|| Error::invalid(format!("law {} needs r", self.kind.name())));
        match self.kind {
            LawKind::Gaussian => Ok(LimitLaw::gaussian()),
            LawKind::Vg => match self.n {
                Some(n) => LimitLaw::product_sum(n, self.s.unwrap_or(1.0)),
                None => LimitLaw::vg_standardized(self.ell.unwrap_or(2)),
            },
            LawKind::SLimit => LimitLaw::s_limit(self.ell.unwrap_or(2), need_r()?),
            LawKind::TwoHubMixture => LimitLaw::mixture_two_hub(need_r()?),
        }
    }
}

impl fmt::Display for LawSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.name())?;
        let mut parts = Vec::new();
        if let Some(v) = self.ell {
            parts.push(format!("ell={v}"));
        }
        if let Some(v) = self.r {
            parts.push(format!("r={v}"));
        }
        if let Some(v) = self.n {
            parts.push(format!("n={v}"));
        }
        if let Some(v) = self.s {
            parts.push(format!("s={v}"));
        }
        if !parts.is_empty() {
            write!(f, ":{}", parts.join(","))?;
        }
        Ok(())
    }
}

impl FromStr for LawSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, params) = s.split_once(':').unwrap_or((s, ""));
        let mut spec = LawSpec::new(kind.parse()?);
        for kv in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("law parameter `{kv}` is not key=value")))?;
            let bad = || Error::invalid(format!("bad value in law parameter `{kv}`"));
            match k.trim() {
                "ell" => spec.ell = Some(v.trim().parse().map_err(|_| bad())?),
                "r" => spec.r = Some(v.trim().parse().map_err(|_| bad())?),
                "n" => spec.n = Some(v.trim().parse().map_err(|_| bad())?),
                "s" => spec.s = Some(v.trim().parse().map_err(|_| bad())?),
                other => return Err(Error::invalid(format!("unknown law parameter `{other}`"))),
            }
        }
        Ok(spec)
    }
}

impl TryFrom<String> for LawSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<LawSpec> for String {
    fn from(l: LawSpec) -> String {
        l.to_string()
    }
}

/// A named built-in margin or an inline quantile table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MarginChoice {
    Named(String),
    Table(QuantileTable),
}

impl MarginChoice {
    pub fn build(&self, ell: u32) -> Result<MarginSpec> {
        match self {
            MarginChoice::Named(name) => margin_by_name(name, ell),
            MarginChoice::Table(t) => {
                if t.ell != ell {
                    return Err(Error::invalid(format!(
                        "quantile table uses ell = {} but the simulation uses ell = {ell}",
                        t.ell
                    )));
                }
                margin_quantile_table(t)
            }
        }
    }
}

/// Statistic fed to the test battery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    XiStd,
    SN,
}

impl Column {
    pub fn name(self) -> &'static str {
        match self {
            Column::XiStd => "xi_std",
            Column::SN => "s_n",
        }
    }
}

impl FromStr for Column {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "xi_std" => Ok(Column::XiStd),
            "s_n" => Ok(Column::SN),
            other => Err(Error::invalid(format!("unknown column `{other}` (expected xi_std or s_n)"))),
        }
    }
}

/// Simulation part of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub family: Family,
    pub param: u64,
    pub ell: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<MarginChoice>,
    pub replications: u64,
    #[serde(default)]
    pub fast_path: bool,
    pub column: Column,
    /// Reference law of the goodness-of-fit battery.
    pub law: LawSpec,
    #[serde(default)]
    pub tests: Vec<GofTest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi2_bins: Option<usize>,
    #[serde(default)]
    pub moments: bool,
    /// Level at which every test must fail to reject; `None` skips the check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fail_to_reject_at: Option<f64>,
    /// Upper bound on the KS distance to the reference law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_max: Option<f64>,
}

/// A tabulated limit law written as `x,pdf,cdf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    pub law: LawSpec,
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    pub file: String,
}

/// Output file names, relative to the output directory of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "Outputs::default_samples")]
    pub samples_csv: String,
    #[serde(default = "Outputs::default_gof")]
    pub gof_json: String,
    #[serde(default = "Outputs::default_manifest")]
    pub manifest_json: String,
}

impl Outputs {
    fn default_samples() -> String {
        "samples.csv".into()
    }
    fn default_gof() -> String {
        "gof.json".into()
    }
    fn default_manifest() -> String {
        "manifest.json".into()
    }
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs {
            samples_csv: Outputs::default_samples(),
            gof_json: Outputs::default_gof(),
            manifest_json: Outputs::default_manifest(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Mandatory: there is no clock-derived default.
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tables: Vec<TableSpec>,
    #[serde(default)]
    pub outputs: Outputs,
}

/// SHA-256 (hex) of the canonical JSON form of any serializable value.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value).map_err(|e| Error::invalid(format!("cannot serialize config: {e}")))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn check_file_name(name: &str) -> Result<()> {
    let p = Path::new(name);
    if name.is_empty() || p.is_absolute() || p.components().any(|c| !matches!(c, std::path::Component::Normal(_))) {
        return Err(Error::invalid(format!("output name `{name}` must be a plain relative path")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(s).map_err(|e| Error::invalid(format!("bad experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn hash(&self) -> Result<String> {
        config_hash(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.simulation.is_none() && self.tables.is_empty() {
            return Err(Error::invalid("experiment has neither a simulation nor tables"));
        }
        let o = &self.outputs;
        let mut names = vec![o.manifest_json.as_str()];
        if let Some(sim) = &self.simulation {
            names.extend([o.samples_csv.as_str(), o.gof_json.as_str()]);
            if sim.replications == 0 {
                return Err(Error::invalid("replications must be >= 1"));
            }
            if sim.column == Column::SN && sim.margin.is_none() {
                return Err(Error::invalid("column s_n needs a margin"));
            }
            sim.law.build()?;
            if sim.tests.contains(&GofTest::AndersonDarling) && sim.law.kind != LawKind::Gaussian {
                return Err(Error::invalid("the Anderson-Darling test is only available against the gaussian law"));
            }
            if sim.tests.contains(&GofTest::TwoSampleKs) {
                return Err(Error::invalid("two_sample_ks needs two samples; use the gof command"));
            }
            if let Some(a) = sim.fail_to_reject_at {
                if !(a > 0.0 && a < 1.0) {
                    return Err(Error::invalid("fail_to_reject_at must lie in (0, 1)"));
                }
            }
        }
        for t in &self.tables {
            t.law.build()?;
            Grid::new(t.lo, t.hi, t.step)?;
            names.push(t.file.as_str());
        }
        for n in &names {
            check_file_name(n)?;
        }
        let mut sorted = names.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != names.len() {
            return Err(Error::invalid("output file names must be distinct"));
        }
        Ok(())
    }
}

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 7] = [
    "figure2",
    "figure3",
    "section5",
    "theorem2-convergence",
    "theorem3-convergence",
    "hypercube-clt",
    "fan-clt",
];

const FIGURE_GRID: (f64, f64, f64) = (-30.0, 30.0, 0.01);

fn figure_table(ell: u32, r: f64) -> TableSpec {
    TableSpec {
        law: LawSpec::s_limit(ell, r),
        lo: FIGURE_GRID.0,
        hi: FIGURE_GRID.1,
        step: FIGURE_GRID.2,
        file: format!("s_limit_ell{ell}_r{r}.csv"),
    }
}

fn sim_preset(family: Family, param: u64, replications: u64, fast_path: bool, law: LawSpec) -> SimulationSpec {
    SimulationSpec {
        family,
        param,
        ell: 2,
        margin: None,
        replications,
        fast_path,
        column: Column::XiStd,
        law,
        tests: vec![GofTest::Ks],
        chi2_bins: None,
        moments: false,
        fail_to_reject_at: None,
        ks_max: None,
    }
}

/// Built-in experiment with the given seed.
pub fn preset(name: &str, seed: u64) -> Result<ExperimentConfig> {
    let base = |simulation: Option<SimulationSpec>, tables: Vec<TableSpec>| ExperimentConfig {
        name: name.to_owned(),
        seed,
        simulation,
        tables,
        outputs: Outputs::default(),
    };
    Ok(match name {
        "figure2" => base(None, [0.6, 0.8, 0.99].iter().map(|&r| figure_table(2, r)).collect()),
        "figure3" => base(None, [2, 4, 6].iter().map(|&l| figure_table(l, 0.99)).collect()),
        "section5" => {
            let mut s = sim_preset(Family::Cage, 7, 5000, false, LawSpec::gaussian());
            s.margin = Some(MarginChoice::Named("uniform01".into()));
            s.column = Column::SN;
            s.tests = vec![GofTest::Ks, GofTest::AndersonDarling, GofTest::PearsonChi2];
            s.fail_to_reject_at = Some(0.001);
            s.ks_max = Some(0.03);
            base(Some(s), Vec::new())
        }
        "theorem2-convergence" => {
            let mut s = sim_preset(Family::Bipartite, 300, 100_000, true, LawSpec::vg_standardized(2));
            s.ks_max = Some(0.02);
            base(Some(s), Vec::new())
        }
        "theorem3-convergence" => {
            let mut s = sim_preset(Family::TwoHub, 400, 100_000, true, LawSpec::two_hub_mixture(1.0));
            s.ks_max = Some(0.02);
            base(Some(s), Vec::new())
        }
        "hypercube-clt" => {
            let mut s = sim_preset(Family::Hypercube, 8, 5000, false, LawSpec::gaussian());
            s.tests = vec![GofTest::Ks, GofTest::AndersonDarling];
            s.ks_max = Some(0.025);
            base(Some(s), Vec::new())
        }
        "fan-clt" => {
            let mut s = sim_preset(Family::Fan, 500, 5000, true, LawSpec::gaussian());
            s.ks_max = Some(0.025);
            base(Some(s), Vec::new())
        }
        other => {
            return Err(Error::invalid(format!(
                "unknown preset `{other}` (expected one of {})",
                PRESETS.join(", ")
            )))
        }
    })
}

/// One assertion of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Contents of the GOF JSON artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofArtifact {
    pub config_hash: String,
    pub column: String,
    pub ks_distance: f64,
    pub reports: Vec<GofReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moments: Option<MomentReport>,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub config_hash: String,
    pub seed: u64,
    pub versions: Versions,
    pub files: Vec<ManifestFile>,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub kwise: String,
    pub artifact_format: u32,
}

/// Result of [`run_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub config_hash: String,
    pub files: Vec<PathBuf>,
    pub checks: Vec<Check>,
    pub gof: Option<GofArtifact>,
    pub tables: Vec<LawTable>,
    pub manifest: Manifest,
}

impl ExperimentOutcome {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// 0, or [`EXIT_REJECTED`] when asserting and a check failed.
    pub fn exit_code(&self, assert_mode: bool) -> i32 {
        if assert_mode && !self.all_passed() {
            EXIT_REJECTED
        } else {
            0
        }
    }
}

/// Writes `# config_hash=<hash>`, a header and rows.
pub fn write_csv<P: AsRef<Path>>(path: P, hash: &str, header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    writeln!(buf, "{HASH_PREFIX}{hash}")?;
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    fs::write(path, &buf)?;
    Ok(buf)
}

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Sample rows as written to the samples CSV.
pub fn sample_rows(records: &[SimRecord]) -> Vec<Vec<String>> {
    records
        .iter()
        .map(|r| {
            vec![
                r.rep_index.to_string(),
                r.xi_count.to_string(),
                fmt_f64(r.xi_std),
                r.s_n.map(fmt_f64).unwrap_or_default(),
            ]
        })
        .collect()
}

pub const SAMPLE_HEADER: [&str; 4] = ["rep_index", "xi_count", "xi_std", "s_n"];
pub const TABLE_HEADER: [&str; 3] = ["x", "pdf", "cdf"];

pub fn table_rows(t: &LawTable) -> Vec<Vec<String>> {
    (0..t.x.len())
        .map(|i| vec![fmt_f64(t.x[i]), fmt_f64(t.pdf[i]), fmt_f64(t.cdf[i])])
        .collect()
}

/// Reads one numeric column of an artifact CSV and its config hash. When
/// `expected_hash` is given, a file carrying a different hash is rejected.
pub fn read_csv_column(path: &Path, column: &str, expected_hash: Option<&str>) -> Result<(Option<String>, Vec<f64>)> {
    let file = fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let (hash, rest) = match first.trim_end().strip_prefix(HASH_PREFIX) {
        Some(h) => (Some(h.to_owned()), String::new()),
        None => (None, first),
    };
    if let Some(want) = expected_hash {
        match &hash {
            Some(h) if h == want => {}
            Some(h) => {
                return Err(Error::invalid(format!(
                    "{} carries config hash {h}, expected {want}",
                    path.display()
                )))
            }
            None => return Err(Error::invalid(format!("{} carries no config hash", path.display()))),
        }
    }
    let body = std::io::Cursor::new(rest).chain(reader);
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(body);
    let idx = rdr
        .headers()?
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::invalid(format!("{} has no column `{column}`", path.display())))?;
    let mut values = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cell = rec.get(idx).unwrap_or("").trim();
        if cell.is_empty() {
            return Err(Error::invalid(format!("row {} of column `{column}` is empty", line + 1)));
        }
        values.push(
            cell.parse::<f64>()
                .map_err(|_| Error::invalid(format!("row {}: `{cell}` is not a number", line + 1)))?,
        );
    }
    Ok((hash, values))
}

/// Runs a test battery on `samples` against `law`.
pub fn gof_battery(
    samples: &[f64],
    law: &LimitLaw,
    tests: &[GofTest],
    chi2_bins: Option<usize>,
) -> Result<(f64, Vec<GofReport>)> {
    let reference = ReferenceCdf::from_law(law)?;
    let ks = ks_statistic(samples, &reference)?;
    let mut reports = Vec::new();
    for t in tests {
        reports.push(match t {
            GofTest::Ks => ks.clone(),
            GofTest::AndersonDarling => {
                if !matches!(law, LimitLaw::Gaussian) {
                    return Err(Error::invalid("the Anderson-Darling test is only available against the gaussian law"));
                }
                anderson_darling_normal(samples)?
            }
            GofTest::PearsonChi2 => pearson_chi2(samples, &reference, chi2_bins)?,
            GofTest::TwoSampleKs => return Err(Error::invalid("two_sample_ks needs a second sample")),
        });
    }
    Ok((ks.statistic, reports))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::invalid(e.to_string()))?;
    bytes.push(b'\n');
    fs::write(path, &bytes)?;
    Ok(bytes)
}

/// Runs an experiment, writing its artifacts under `out_dir`. Outputs are a
/// function of the config alone; `threads` only sets the worker count.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path, threads: Option<usize>) -> Result<ExperimentOutcome> {
    let started = Instant::now();
    cfg.validate()?;
    let hash = cfg.hash()?;
    fs::create_dir_all(out_dir)?;
    let mut written: Vec<(String, Vec<u8>)> = Vec::new();
    let mut checks = Vec::new();
    let mut gof = None;

    if let Some(sim) = &cfg.simulation {
        let margin = sim.margin.as_ref().map(|m| m.build(sim.ell)).transpose()?;
        let target = if sim.fast_path {
            SimulationTarget::Family { family: sim.family, param: sim.param }
        } else {
            SimulationTarget::Graph(sim.family.build(sim.param)?)
        };
        let sim_cfg = SimulationConfig {
            ell: sim.ell,
            replications: sim.replications,
            seed: cfg.seed,
            fast_path: sim.fast_path,
            threads,
        };
        let records = simulate(&target, margin.as_ref(), &sim_cfg)?;
        let bytes = write_csv(
            out_dir.join(&cfg.outputs.samples_csv),
            &hash,
            &SAMPLE_HEADER,
            &sample_rows(&records),
        )?;
        written.push((cfg.outputs.samples_csv.clone(), bytes));

        let samples: Vec<f64> = match sim.column {
            Column::XiStd => records.iter().map(|r| r.xi_std).collect(),
            Column::SN => records.iter().map(|r| r.s_n.unwrap_or(f64::NAN)).collect(),
        };
        let law = sim.law.build()?;
        let (ks_distance, reports) = gof_battery(&samples, &law, &sim.tests, sim.chi2_bins)?;
        let moments = if sim.moments { Some(moment_suite(&samples, &law)?) } else { None };
        if let Some(alpha) = sim.fail_to_reject_at {
            for r in &reports {
                checks.push(Check {
                    name: format!("{} p-value >= alpha", r.test_name),
                    value: r.p_value,
                    threshold: alpha,
                    passed: r.p_value >= alpha,
                });
            }
        }
        if let Some(max) = sim.ks_max {
            checks.push(Check {
                name: "ks distance <= max".into(),
                value: ks_distance,
                threshold: max,
                passed: ks_distance <= max,
            });
        }
        if let Some(m) = &moments {
            checks.push(Check {
                name: "moment z-scores within 4".into(),
                value: m.entries.iter().map(|e| e.z.abs()).fold(0.0, f64::max),
                threshold: crate::stats_tests::moments::Z_FLAG,
                passed: m.all_within,
            });
        }
        let artifact = GofArtifact {
            config_hash: hash.clone(),
            column: sim.column.name().into(),
            ks_distance,
            reports,
            moments,
            checks: checks.clone(),
        };
        let bytes = write_json(&out_dir.join(&cfg.outputs.gof_json), &artifact)?;
        written.push((cfg.outputs.gof_json.clone(), bytes));
        gof = Some(artifact);
    }

    let mut tables = Vec::new();
    for t in &cfg.tables {
        let law = t.law.build()?;
        let table = law.table(&Grid::new(t.lo, t.hi, t.step)?)?;
        let bytes = write_csv(out_dir.join(&t.file), &hash, &TABLE_HEADER, &table_rows(&table))?;
        written.push((t.file.clone(), bytes));
        tables.push(table);
    }

    let manifest = Manifest {
        name: cfg.name.clone(),
        config_hash: hash.clone(),
        seed: cfg.seed,
        versions: Versions { kwise: env!("CARGO_PKG_VERSION").into(), artifact_format: 1 },
        files: written
            .iter()
            .map(|(p, b)| ManifestFile { path: p.clone(), sha256: sha256_hex(b) })
            .collect(),
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&out_dir.join(&cfg.outputs.manifest_json), &manifest)?;
    let mut files: Vec<PathBuf> = written.iter().map(|(p, _)| out_dir.join(p)).collect();
    files.push(out_dir.join(&cfg.outputs.manifest_json));
    Ok(ExperimentOutcome { config_hash: hash, files, checks, gof, tables, manifest })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("kwise-exp-{}-{name}", std::process::id()));
        let _ = fs::remove_dir_all(&d);
        d
    }

    #[test]
    fn law_spec_round_trip() {
        for s in ["gaussian", "vg:ell=3", "vg:n=2,s=0.5", "s-limit:ell=2,r=0.99", "two-hub-mixture:r=1"] {
            let l: LawSpec = s.parse().unwrap();
            assert_eq!(l.to_string(), s);
            l.build().unwrap();
        }
        assert!("s-limit:ell=2".parse::<LawSpec>().unwrap().build().is_err());
        assert!("cauchy".parse::<LawSpec>().is_err());
        assert!("vg:q=1".parse::<LawSpec>().is_err());
        assert_eq!("vg".parse::<LawSpec>().unwrap().build().unwrap(), LimitLaw::vg_standardized(2).unwrap());
    }

    #[test]
    fn presets_round_trip() {
        for name in PRESETS {
            let cfg = preset(name, 7).unwrap();
            cfg.validate().unwrap();
            let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.hash().unwrap(), cfg.hash().unwrap());
        }
        assert!(preset("figure9", 1).is_err());
    }

    #[test]
    fn seed_is_mandatory() {
        let mut v: serde_json::Value = serde_json::from_str(&preset("fan-clt", 1).unwrap().to_json()).unwrap();
        v.as_object_mut().unwrap().remove("seed");
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn custom_margin_config_round_trip() {
        let json = r#"{
            "name": "custom", "seed": 3,
            "simulation": {
                "family": "bipartite", "param": 5, "ell": 2,
                "margin": {"quantile_table": [[0.0, -1.0], [0.5, 0.0], [1.0, 2.0]], "ell": 2},
                "replications": 200, "column": "s_n", "law": "gaussian", "tests": ["ks"]
            }
        }"#;
        let cfg = ExperimentConfig::from_json(json).unwrap();
        assert!(matches!(cfg.simulation.as_ref().unwrap().margin, Some(MarginChoice::Table(_))));
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        let out = run_experiment(&cfg, &tmp("custom"), Some(1)).unwrap();
        assert!(out.gof.unwrap().reports[0].p_value >= 0.0);
    }

    #[test]
    fn validation_errors() {
        let mut cfg = preset("fan-clt", 1).unwrap();
        cfg.simulation.as_mut().unwrap().column = Column::SN;
        assert!(cfg.validate().is_err());
        let mut cfg = preset("fan-clt", 1).unwrap();
        cfg.outputs.gof_json = "../x.json".into();
        assert!(cfg.validate().is_err());
        let mut cfg = preset("figure2", 1).unwrap();
        cfg.tables[1].file = cfg.tables[0].file.clone();
        assert!(cfg.validate().is_err());
        let mut cfg = preset("theorem2-convergence", 1).unwrap();
        cfg.simulation.as_mut().unwrap().tests.push(GofTest::AndersonDarling);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn small_run_is_deterministic_and_tagged() {
        let mut cfg = preset("fan-clt", 11).unwrap();
        cfg.simulation.as_mut().unwrap().replications = 500;
        let (a, b) = (tmp("det-a"), tmp("det-b"));
        let oa = run_experiment(&cfg, &a, Some(1)).unwrap();
        let ob = run_experiment(&cfg, &b, Some(3)).unwrap();
        for f in ["samples.csv", "gof.json"] {
            assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
        }
        assert_eq!(oa.manifest.files, ob.manifest.files);
        let (hash, xs) = read_csv_column(&a.join("samples.csv"), "xi_std", Some(&oa.config_hash)).unwrap();
        assert_eq!(hash.unwrap(), oa.config_hash);
        assert_eq!(xs.len(), 500);
        let err = read_csv_column(&a.join("samples.csv"), "xi_std", Some("deadbeef")).unwrap_err();
        assert!(matches!(err, Error::Invalid(_)));
        assert!(read_csv_column(&a.join("samples.csv"), "s_n", None).is_err());
    }

    #[test]
    fn assert_mode_exit_code() {
        let mut cfg = preset("fan-clt", 2).unwrap();
        let sim = cfg.simulation.as_mut().unwrap();
        sim.replications = 300;
        sim.ks_max = Some(0.0);
        let out = run_experiment(&cfg, &tmp("assert"), Some(1)).unwrap();
        assert!(!out.all_passed());
        assert_eq!(out.exit_code(true), EXIT_REJECTED);
        assert_eq!(out.exit_code(false), 0);
    }
}
