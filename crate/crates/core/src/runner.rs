//! Experiment orchestration: configuration, per-realization work units,
//! JSON-lines persistence, merging and report emission.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::entanglement::{
    capacity_of_entanglement, fermionic_parity_blocks, fermionic_partial_trace, log_antiflatness, mp_curve,
    renyi_entropy, sample_bipartitions, subsystem_size, Bipartition, HAAR_CAPACITY, HAAR_LOG_ANTIFLATNESS,
};
use crate::error::{Error, Result};
use crate::ess::{
    average_ratio, ess_histogram, folded_ratios, gap_ratios, kl_fidelity_scan, kl_to_reference, reference_pdf,
    transition_point, ReferenceKind, RATIO_BINS, RATIO_CUTOFF,
};
use crate::fitting::power_law_fit;
use crate::spectral::{
    full_spectrum, ground_state_resolved, select_eigenstate, spectral_gap, GroundState, StateKind, DEFAULT_DENSE_LIMIT,
    DEFAULT_ITERATIVE_ABOVE,
};
use crate::sre::{exact_sre_with_limit, mps_compress, sampled_sre2, DEFAULT_CUTOFF};
use crate::syk::{assemble_sparse_with_cap, build_interpolated, estimate_sparse_bytes, Realization, SparseHamiltonian};

/// Overrides the output directory.
pub const OUTPUT_ENV: &str = "SYKLAB_OUT";
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MERGED_FILE: &str = "merged.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diagnostic {
    Entropy,
    RdmCurve,
    Ess,
    KlFidelity,
    Sre,
    Capacity,
    Antiflatness,
    Dos,
    Gap,
}

impl Diagnostic {
    pub const ALL: [Diagnostic; 9] = [
        Diagnostic::Entropy,
        Diagnostic::RdmCurve,
        Diagnostic::Ess,
        Diagnostic::KlFidelity,
        Diagnostic::Sre,
        Diagnostic::Capacity,
        Diagnostic::Antiflatness,
        Diagnostic::Dos,
        Diagnostic::Gap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Diagnostic::Entropy => "entropy",
            Diagnostic::RdmCurve => "rdm_curve",
            Diagnostic::Ess => "ess",
            Diagnostic::KlFidelity => "kl_fidelity",
            Diagnostic::Sre => "sre",
            Diagnostic::Capacity => "capacity",
            Diagnostic::Antiflatness => "antiflatness",
            Diagnostic::Dos => "dos",
            Diagnostic::Gap => "gap",
        }
    }

    /// Diagnostics of the Hamiltonian rather than of an eigenstate.
    pub fn is_spectral(self) -> bool {
        matches!(self, Diagnostic::Dos | Diagnostic::Gap)
    }

    /// The record kind that stores this diagnostic.
    pub fn stored_as(self) -> Diagnostic {
        match self {
            Diagnostic::KlFidelity => Diagnostic::RdmCurve,
            d => d,
        }
    }
}

impl std::str::FromStr for Diagnostic {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Diagnostic::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown diagnostic {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn new(start: f64, stop: f64, step: f64) -> Self {
        Self { start, stop, step }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.start) || !(0.0..=1.0).contains(&self.stop) || self.stop < self.start {
            return Err(Error::Argument(format!("g grid [{}, {}] not inside [0, 1]", self.start, self.stop)));
        }
        if !(self.step > 0.0) {
            return Err(Error::Argument(format!("g step {} must be positive", self.step)));
        }
        Ok(())
    }

    /// Grid points, rounded to 10 decimals so keys stay stable.
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| round_g(self.start + k as f64 * self.step)).collect()
    }
}

pub fn round_g(g: f64) -> f64 {
    (g * 1e10).round() / 1e10
}

/// Default ensemble size for `N` Majoranas.
pub fn default_realizations(n_majorana: usize) -> usize {
    match n_majorana {
        0..=10 => 1000,
        11..=14 => 400,
        15..=20 => 200,
        21..=26 => 100,
        27..=28 => 50,
        29..=30 => 30,
        _ => 10,
    }
}

fn default_states() -> Vec<StateKind> {
    vec![StateKind::Ground]
}
fn default_f() -> f64 {
    0.5
}
fn default_alphas() -> Vec<f64> {
    vec![1.0, 2.0, 3.0]
}
fn default_sre_samples() -> usize {
    crate::sre::DEFAULT_SAMPLES
}
fn default_sre_exact_limit() -> usize {
    crate::sre::DEFAULT_EXACT_LIMIT
}
fn default_memory_cap() -> u64 {
    crate::syk::DEFAULT_MEMORY_CAP
}
fn default_dense_limit() -> usize {
    DEFAULT_DENSE_LIMIT
}
fn default_iterative_above() -> usize {
    DEFAULT_ITERATIVE_ABOVE
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_list: Vec<usize>,
    pub g_grid: GridSpec,
    /// Per-diagnostic grid overrides. `sre` defaults to step 0.05.
    #[serde(default)]
    pub grids: BTreeMap<Diagnostic, GridSpec>,
    /// Per-`N` realization counts; missing entries use [`default_realizations`].
    #[serde(default)]
    pub realizations: BTreeMap<usize, usize>,
    #[serde(default)]
    pub seed: u64,
    pub diagnostics: Vec<Diagnostic>,
    #[serde(default = "default_states")]
    pub states: Vec<StateKind>,
    /// Sampled bipartitions per state; defaults to `N`, capped by the number of subsets.
    #[serde(default)]
    pub bipartition_count: Option<usize>,
    #[serde(default = "default_f")]
    pub f: f64,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_sre_samples")]
    pub sre_samples: usize,
    #[serde(default = "default_sre_exact_limit")]
    pub sre_exact_limit: usize,
    #[serde(default = "default_memory_cap")]
    pub memory_cap_bytes: u64,
    #[serde(default = "default_dense_limit")]
    pub dense_limit: usize,
    #[serde(default = "default_iterative_above")]
    pub iterative_above: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(n_list: Vec<usize>, g_grid: GridSpec, diagnostics: Vec<Diagnostic>) -> Self {
        Self {
            n_list,
            g_grid,
            grids: BTreeMap::new(),
            realizations: BTreeMap::new(),
            seed: 0,
            diagnostics,
            states: default_states(),
            bipartition_count: None,
            f: default_f(),
            alphas: default_alphas(),
            sre_samples: default_sre_samples(),
            sre_exact_limit: default_sre_exact_limit(),
            memory_cap_bytes: default_memory_cap(),
            dense_limit: default_dense_limit(),
            iterative_above: default_iterative_above(),
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(Error::Argument("n_list is empty".into()));
        }
        for &n in &self.n_list {
            if n < 4 || n % 2 != 0 {
                return Err(Error::Argument(format!("N = {n} must be even and at least 4")));
            }
            let nq = n / 2;
            if self.needs_bipartitions() && nq >= 2 {
                subsystem_size(nq, self.f)?;
            }
        }
        self.g_grid.validate()?;
        for g in self.grids.values() {
            g.validate()?;
        }
        if self.diagnostics.is_empty() {
            return Err(Error::Argument("no diagnostics requested".into()));
        }
        if self.states.is_empty() && self.diagnostics.iter().any(|d| !d.is_spectral()) {
            return Err(Error::Argument("state diagnostics requested without state kinds".into()));
        }
        if self.alphas.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::Argument("Rényi orders must be positive".into()));
        }
        Ok(())
    }

    fn needs_bipartitions(&self) -> bool {
        self.diagnostics.iter().any(|d| {
            matches!(d, Diagnostic::Entropy | Diagnostic::Ess | Diagnostic::Capacity | Diagnostic::Antiflatness)
        })
    }

    pub fn realizations_for(&self, n: usize) -> usize {
        self.realizations.get(&n).copied().unwrap_or_else(|| default_realizations(n))
    }

    pub fn grid_for(&self, d: Diagnostic) -> GridSpec {
        if let Some(g) = self.grids.get(&d) {
            return *g;
        }
        if d == Diagnostic::Sre {
            return GridSpec { step: self.g_grid.step.max(0.05), ..self.g_grid };
        }
        self.g_grid
    }

    /// Hash of every field that affects results (the output directory does not).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let text = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().take(8).fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    /// `--out`, then the environment override, then the config value, then `./syklab-out`.
    pub fn resolve_output_dir(&self, cli: Option<&Path>) -> PathBuf {
        if let Some(p) = cli {
            return p.to_path_buf();
        }
        if let Ok(p) = std::env::var(OUTPUT_ENV) {
            if !p.is_empty() {
                return PathBuf::from(p);
            }
        }
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("syklab-out"))
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Disorder seed of realization `m` at size `n`.
pub fn realization_seed(base: u64, n_majorana: usize, m: usize) -> u64 {
    splitmix64(base ^ splitmix64(((n_majorana as u64) << 40) | m as u64))
}

/// A degenerate ground eigenspace is split by dH/dg = h2 − h4, so each point
/// of a g-scan carries the state continuous from the right (from the left at
/// g = 1).
fn scan_ground_state(
    real: &Realization,
    h: &SparseHamiltonian,
    g: f64,
    seed: u64,
    config: &ExperimentConfig,
) -> Result<GroundState> {
    ground_state_resolved(h, seed, config.iterative_above, || {
        let s = if g < 1.0 { 1.0 } else { -1.0 };
        assemble_sparse_with_cap(&real.h2.linear_combination(s, &real.h4, -s)?, config.memory_cap_bytes)
    })
}

fn state_seed(seed: u64, g: f64, kind: StateKind) -> u64 {
    splitmix64(seed ^ splitmix64(g.to_bits() ^ kind as u64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub config_hash: String,
}

/// State label used in keys; Hamiltonian-level records use `h`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RecordKey {
    pub seed: u64,
    pub n: usize,
    pub g: OrderedG,
    pub state: String,
    pub diagnostic: Diagnostic,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrderedG(pub f64);

impl PartialEq for OrderedG {
    fn eq(&self, o: &Self) -> bool {
        self.0.total_cmp(&o.0).is_eq()
    }
}
impl Eq for OrderedG {}
impl PartialOrd for OrderedG {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for OrderedG {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&o.0)
    }
}
impl std::hash::Hash for OrderedG {
    fn hash<H: std::hash::Hasher>(&self, h: &mut H) {
        self.0.to_bits().hash(h)
    }
}

impl std::fmt::Display for RecordKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(seed={}, N={}, g={}, state={}, diagnostic={})", self.seed, self.n, self.g.0, self.state, self.diagnostic.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRecord {
    pub seed: u64,
    pub n: usize,
    /// Realization index within its ensemble.
    pub realization: usize,
    pub g: f64,
    pub state: String,
    pub diagnostic: Diagnostic,
    pub payload: Value,
    pub provenance: Provenance,
}

impl EnsembleRecord {
    pub fn key(&self) -> RecordKey {
        RecordKey { seed: self.seed, n: self.n, g: OrderedG(self.g), state: self.state.clone(), diagnostic: self.diagnostic }
    }

    pub fn payload_f64(&self, field: &str) -> Option<f64> {
        self.payload.get(field).and_then(Value::as_f64)
    }

    pub fn payload_vec(&self, field: &str) -> Option<Vec<f64>> {
        self.payload.get(field)?.as_array()?.iter().map(Value::as_f64).collect()
    }
}

/// Records keyed and ordered by [`RecordKey`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultStore {
    pub records: BTreeMap<RecordKey, EnsembleRecord>,
}

impl ResultStore {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Inserts a record; an identical key with a different payload is an error.
    pub fn insert(&mut self, r: EnsembleRecord) -> Result<()> {
        let k = r.key();
        match self.records.get(&k) {
            Some(old) if old.payload != r.payload => Err(Error::Integrity(k.to_string())),
            Some(_) => Ok(()),
            None => {
                self.records.insert(k, r);
                Ok(())
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &EnsembleRecord> {
        self.records.values()
    }

    pub fn select<'a>(
        &'a self,
        n: Option<usize>,
        state: Option<&'a str>,
        diag: Diagnostic,
    ) -> impl Iterator<Item = &'a EnsembleRecord> + 'a {
        self.records.values().filter(move |r| {
            r.diagnostic == diag && n.is_none_or(|n| r.n == n) && state.is_none_or(|s| r.state == s)
        })
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for r in self.records.values() {
            s.push_str(&serde_json::to_string(r).expect("records serialize"));
            s.push('\n');
        }
        s
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut st = ResultStore::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            st.insert(serde_json::from_str(line)?)?;
        }
        Ok(st)
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut st = ResultStore::default();
        for line in BufReader::new(f).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if !line.trim().is_empty() {
                st.insert(serde_json::from_str(&line)?)?;
            }
        }
        Ok(st)
    }

    /// Every `r*.jsonl` unit file below `dir`, or a single file.
    pub fn read_path(path: &Path) -> Result<Self> {
        if path.is_file() {
            return Self::read_file(path);
        }
        let mut files = Vec::new();
        collect_unit_files(path, &mut files)?;
        files.sort();
        let stores = files.iter().map(|f| Self::read_file(f)).collect::<Result<Vec<_>>>()?;
        merge_stores(stores)
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        atomic_write(path, self.to_jsonl().as_bytes())
    }
}

fn collect_unit_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for e in entries {
        let p = e.map_err(|e| Error::io(dir, e))?.path();
        if p.is_dir() {
            collect_unit_files(&p, out)?;
        } else if p.extension().is_some_and(|x| x == "jsonl")
            && p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('r'))
        {
            out.push(p);
        }
    }
    Ok(())
}

/// Union of stores; the same key with different payloads is an integrity error.
pub fn merge_stores(stores: impl IntoIterator<Item = ResultStore>) -> Result<ResultStore> {
    let mut out = ResultStore::default();
    for s in stores {
        for (_, r) in s.records {
            out.insert(r)?;
        }
    }
    Ok(out)
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WorkUnit {
    pub n: usize,
    pub realization: usize,
}

impl WorkUnit {
    pub fn file(&self, out: &Path) -> PathBuf {
        out.join(format!("N{}", self.n)).join(format!("r{:05}.jsonl", self.realization))
    }

    fn claim_file(&self, out: &Path) -> PathBuf {
        out.join(format!("N{}", self.n)).join(format!("r{:05}.claim", self.realization))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub computed: Vec<WorkUnit>,
    pub skipped: Vec<WorkUnit>,
    /// Units not computed: over the memory cap, claimed elsewhere or failed.
    pub pending: Vec<PendingUnit>,
    pub merged_path: Option<PathBuf>,
    pub records: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendingUnit {
    pub unit: WorkUnit,
    pub reason: String,
}

impl RunSummary {
    pub fn is_partial(&self) -> bool {
        !self.pending.is_empty()
    }
}

/// Runs every `(N, realization)` unit not already on disk, then writes the merged store.
pub fn run_experiment(config: &ExperimentConfig, out: &Path, threads: Option<usize>) -> Result<RunSummary> {
    config.validate()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let cfg_text = serde_json::to_string_pretty(config)?;
    atomic_write(&out.join("config.json"), cfg_text.as_bytes())?;
    let units: Vec<WorkUnit> = config
        .n_list
        .iter()
        .flat_map(|&n| (0..config.realizations_for(n)).map(move |m| WorkUnit { n, realization: m }))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Argument(format!("thread pool: {e}")))?;
    let prov = Provenance { version: CODE_VERSION.to_string(), config_hash: config.hash() };
    let outcomes: Vec<(WorkUnit, std::result::Result<bool, String>)> = pool.install(|| {
        units
            .par_iter()
            .map(|&u| (u, run_unit(config, out, u, &prov).map_err(|e| e.to_string())))
            .collect()
    });
    let mut summary = RunSummary::default();
    for (u, o) in outcomes {
        match o {
            Ok(true) => summary.computed.push(u),
            Ok(false) => summary.skipped.push(u),
            Err(reason) => summary.pending.push(PendingUnit { unit: u, reason }),
        }
    }
    let store = ResultStore::read_path(out)?;
    let merged = out.join(MERGED_FILE);
    store.write_file(&merged)?;
    summary.records = store.len();
    summary.merged_path = Some(merged);
    let manifest = out.join(MANIFEST_FILE);
    if summary.is_partial() {
        let text = serde_json::to_string_pretty(&json!({ "pending": summary.pending }))?;
        atomic_write(&manifest, text.as_bytes())?;
    } else if manifest.exists() {
        fs::remove_file(&manifest).map_err(|e| Error::io(&manifest, e))?;
    }
    Ok(summary)
}

fn claim_is_stale(path: &Path) -> bool {
    let Ok(text) = fs::read_to_string(path) else { return true };
    match text.trim().parse::<u32>() {
        Ok(pid) => !Path::new(&format!("/proc/{pid}")).exists(),
        Err(_) => true,
    }
}

/// Returns `Ok(false)` when the unit was already complete.
fn run_unit(config: &ExperimentConfig, out: &Path, unit: WorkUnit, prov: &Provenance) -> Result<bool> {
    let file = unit.file(out);
    if file.exists() {
        return Ok(false);
    }
    let claim = unit.claim_file(out);
    if let Some(dir) = claim.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut handle = match fs::OpenOptions::new().write(true).create_new(true).open(&claim) {
        Ok(h) => h,
        Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
            if claim_is_stale(&claim) {
                let _ = fs::remove_file(&claim);
                fs::OpenOptions::new().write(true).create_new(true).open(&claim).map_err(|e| Error::io(&claim, e))?
            } else {
                return Err(Error::Contract(format!("unit claimed by another process: {}", claim.display())));
            }
        }
        Err(e) => return Err(Error::io(&claim, e)),
    };
    let _ = write!(handle, "{}", std::process::id());
    drop(handle);
    let result = compute_unit(config, unit, prov).and_then(|store| store.write_file(&file));
    let _ = fs::remove_file(&claim);
    result.map(|_| true)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// All records of one realization: couplings sampled once, `H(g)` swept.
pub fn compute_unit(config: &ExperimentConfig, unit: WorkUnit, prov: &Provenance) -> Result<ResultStore> {
    let n = unit.n;
    let nq = n / 2;
    let seed = realization_seed(config.seed, n, unit.realization);
    let real = Realization::sample(n, seed)?;
    let probe = build_interpolated(&real.h4, &real.h2, 0.5)?;
    let need = estimate_sparse_bytes(&probe);
    if need > config.memory_cap_bytes {
        return Err(Error::Resource { required_bytes: need, cap_bytes: config.memory_cap_bytes });
    }

    let mut per_g: BTreeMap<OrderedG, BTreeSet<Diagnostic>> = BTreeMap::new();
    for &d in &config.diagnostics {
        for g in config.grid_for(d).points() {
            per_g.entry(OrderedG(g)).or_default().insert(d.stored_as());
        }
    }
    let bips: Vec<Bipartition> = if config.needs_bipartitions() {
        let r = subsystem_size(nq, config.f)?;
        let total = crate::syk::index_tuples(nq, r).len();
        let count = config.bipartition_count.unwrap_or(n).min(total).max(1);
        sample_bipartitions(nq, config.f, count, seed)?
    } else {
        vec![]
    };
    let half = if nq >= 2 { Some(Bipartition::prefix(nq, nq / 2)?) } else { None };

    let mut store = ResultStore::default();
    let push = |store: &mut ResultStore, g: f64, state: &str, d: Diagnostic, payload: Value| {
        store.insert(EnsembleRecord {
            seed,
            n,
            realization: unit.realization,
            g,
            state: state.to_string(),
            diagnostic: d,
            payload,
            provenance: prov.clone(),
        })
    };

    for (g, diags) in per_g {
        let g = g.0;
        let h = assemble_sparse_with_cap(&build_interpolated(&real.h4, &real.h2, g)?, config.memory_cap_bytes)?;
        let wants_states = diags.iter().any(|d| !d.is_spectral());
        let wants_ms = wants_states && config.states.contains(&StateKind::Middle);
        let wants_full = diags.contains(&Diagnostic::Dos) || wants_ms || (diags.contains(&Diagnostic::Gap) && h.dim <= config.iterative_above);
        let spectrum = if wants_full {
            if h.dim > config.dense_limit {
                return Err(Error::OverDenseLimit { dim: h.dim, limit: config.dense_limit });
            }
            Some(full_spectrum(&h, wants_ms)?)
        } else {
            None
        };
        if diags.contains(&Diagnostic::Dos) {
            let s = spectrum.as_ref().unwrap();
            let sectors: Vec<Value> = s
                .sectors()
                .iter()
                .map(|lv| json!(average_ratio(&[lv.as_slice()]).ok()))
                .collect();
            push(&mut store, g, "h", Diagnostic::Dos, json!({ "eigenvalues": s.eigenvalues, "rbar_sectors": sectors }))?;
        }
        let mut gs_cache = None;
        if diags.contains(&Diagnostic::Gap) {
            let (e0, gap) = match &spectrum {
                Some(s) => (s.eigenvalues[0], spectral_gap(s)?),
                None => {
                    let gs = scan_ground_state(&real, &h, g, state_seed(seed, g, StateKind::Ground), config)?;
                    let gap = gs.next_level.map(|e1| e1 - gs.energy);
                    let e0 = gs.energy;
                    gs_cache = Some(gs);
                    (e0, gap.unwrap_or(f64::NAN))
                }
            };
            push(&mut store, g, "h", Diagnostic::Gap, json!({ "e0": e0, "gap": gap }))?;
        }
        if !wants_states {
            continue;
        }
        for &kind in &config.states {
            let psi = match kind {
                StateKind::Ground => match gs_cache.take() {
                    Some(gs) => gs.state,
                    None => scan_ground_state(&real, &h, g, state_seed(seed, g, kind), config)?.state,
                },
                StateKind::Middle => select_eigenstate(spectrum.as_ref().unwrap(), kind)?,
            };
            let label = kind.name();
            let needs_rdm = diags.iter().any(|d| {
                matches!(d, Diagnostic::Entropy | Diagnostic::Ess | Diagnostic::Capacity | Diagnostic::Antiflatness)
            });
            let specs = if needs_rdm {
                bips.iter().map(|b| fermionic_partial_trace(&psi, b)).collect::<Result<Vec<_>>>()?
            } else {
                vec![]
            };
            let labels: Vec<String> = bips.iter().map(Bipartition::label).collect();
            if diags.contains(&Diagnostic::Entropy) {
                let values: Vec<Vec<f64>> = specs
                    .iter()
                    .map(|s| config.alphas.iter().map(|&a| renyi_entropy(s, a)).collect::<Result<Vec<_>>>())
                    .collect::<Result<_>>()?;
                let means: Vec<f64> =
                    (0..config.alphas.len()).map(|k| mean(&values.iter().map(|v| v[k]).collect::<Vec<_>>())).collect();
                push(
                    &mut store,
                    g,
                    label,
                    Diagnostic::Entropy,
                    json!({ "alphas": config.alphas, "bipartitions": labels, "values": values, "mean": means }),
                )?;
            }
            if diags.contains(&Diagnostic::Capacity) {
                let v: Vec<f64> = specs.iter().map(capacity_of_entanglement).collect();
                push(&mut store, g, label, Diagnostic::Capacity, json!({ "bipartitions": labels, "values": v, "mean": mean(&v) }))?;
            }
            if diags.contains(&Diagnostic::Antiflatness) {
                let v: Vec<f64> = specs.iter().map(log_antiflatness).collect();
                push(&mut store, g, label, Diagnostic::Antiflatness, json!({ "bipartitions": labels, "values": v, "mean": mean(&v) }))?;
            }
            if diags.contains(&Diagnostic::Ess) {
                let mut ratios = Vec::new();
                for b in &bips {
                    for block in fermionic_parity_blocks(&psi, b)? {
                        if let Ok(r) = gap_ratios(&block) {
                            ratios.extend(r);
                        }
                    }
                }
                push(&mut store, g, label, Diagnostic::Ess, json!({ "bipartitions": specs.len(), "ratios": ratios }))?;
            }
            if diags.contains(&Diagnostic::RdmCurve) {
                if let Some(b) = &half {
                    let s = fermionic_partial_trace(&psi, b)?;
                    push(&mut store, g, label, Diagnostic::RdmCurve, json!({ "eigenvalues": s.eigenvalues }))?;
                }
            }
            if diags.contains(&Diagnostic::Sre) {
                let est = if nq <= config.sre_exact_limit {
                    exact_sre_with_limit(&psi, 2.0, config.sre_exact_limit)?
                } else {
                    let mps = mps_compress(&psi, 1 << nq.div_ceil(2), DEFAULT_CUTOFF)?;
                    sampled_sre2(&mps, config.sre_samples, state_seed(seed, g, kind) ^ 0x5EED)?
                };
                push(&mut store, g, label, Diagnostic::Sre, serde_json::to_value(&est)?)?;
            }
        }
    }
    Ok(store)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Dos,
    Gap,
}

impl Figure {
    pub const ALL: [Figure; 8] =
        [Figure::Fig1, Figure::Fig2, Figure::Fig3, Figure::Fig4, Figure::Fig5, Figure::Fig6, Figure::Dos, Figure::Gap];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
            Figure::Dos => "dos",
            Figure::Gap => "gap",
        }
    }

    fn needs(self) -> Vec<Diagnostic> {
        match self {
            Figure::Fig1 => vec![Diagnostic::Entropy],
            Figure::Fig2 | Figure::Fig3 => vec![Diagnostic::RdmCurve],
            Figure::Fig4 => vec![Diagnostic::Ess],
            Figure::Fig5 => vec![Diagnostic::Sre],
            Figure::Fig6 => vec![Diagnostic::Capacity, Diagnostic::Antiflatness],
            Figure::Dos => vec![Diagnostic::Dos],
            Figure::Gap => vec![Diagnostic::Gap],
        }
    }
}

impl std::str::FromStr for Figure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| Error::Argument(format!("unknown figure {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ReportOutcome {
    Written { files: Vec<PathBuf> },
    /// Nothing written; these diagnostics must be computed first.
    Missing { manifest: PathBuf, missing: Vec<String> },
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let m = mean(v);
    let var = if v.len() > 1 { v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64 } else { 0.0 };
    (m, var.sqrt())
}

/// `(N, state, g) → payload list`.
type Grouped<'a> = BTreeMap<(usize, String, OrderedG), Vec<&'a EnsembleRecord>>;

fn grouped(store: &ResultStore, d: Diagnostic) -> Grouped<'_> {
    let mut m: Grouped = BTreeMap::new();
    for r in store.select(None, None, d) {
        m.entry((r.n, r.state.clone(), OrderedG(r.g))).or_default().push(r);
    }
    m
}

/// `(N, state) → [(g, spectrum)]`.
pub type RdmCurves = BTreeMap<(usize, String), Vec<(f64, Vec<f64>)>>;

/// Realization-averaged descending half-system RDM spectra per `(N, state)`.
pub fn averaged_rdm_curves(store: &ResultStore) -> RdmCurves {
    let mut out = RdmCurves::new();
    for ((n, st, g), recs) in grouped(store, Diagnostic::RdmCurve) {
        let vs: Vec<Vec<f64>> = recs.iter().filter_map(|r| r.payload_vec("eigenvalues")).collect();
        if vs.is_empty() {
            continue;
        }
        let len = vs[0].len();
        let avg: Vec<f64> = (0..len).map(|k| vs.iter().map(|v| v[k]).sum::<f64>() / vs.len() as f64).collect();
        out.entry((n, st)).or_default().push((g.0, avg));
    }
    out
}

/// Writes the CSV and gnuplot script for one figure into `dir`.
pub fn emit_report(store: &ResultStore, figure: Figure, dir: &Path) -> Result<ReportOutcome> {
    let missing: Vec<String> = figure
        .needs()
        .into_iter()
        .filter(|d| store.select(None, None, *d).next().is_none())
        .map(|d| d.name().to_string())
        .collect();
    if !missing.is_empty() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = dir.join(format!("{}.manifest.json", figure.name()));
        let text = serde_json::to_string_pretty(&json!({ "figure": figure.name(), "missing_diagnostics": missing }))?;
        atomic_write(&manifest, text.as_bytes())?;
        return Ok(ReportOutcome::Missing { manifest, missing });
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = figure.name();
    let mut files = Vec::new();
    let mut emit = |file: String, body: String| -> Result<()> {
        let p = dir.join(file);
        atomic_write(&p, body.as_bytes())?;
        files.push(p);
        Ok(())
    };
    match figure {
        Figure::Fig1 => {
            let mut csv = String::from("N,g,state_kind,alpha,mean,std,count,rescaled_mean,page_rescaled\n");
            for ((n, st, g), recs) in grouped(store, Diagnostic::Entropy) {
                let alphas = recs[0].payload_vec("alphas").unwrap_or_default();
                for (k, a) in alphas.iter().enumerate() {
                    let v: Vec<f64> =
                        recs.iter().filter_map(|r| r.payload_vec("mean").and_then(|m| m.get(k).copied())).collect();
                    let (m, s) = mean_std(&v);
                    let norm = (n as f64 / 2.0) * std::f64::consts::LN_2;
                    let _ = writeln!(csv, "{n},{},{st},{a},{m},{s},{},{},1", g.0, v.len(), 2.0 * m / norm);
                }
            }
            emit(format!("{name}.csv"), csv)?;
            emit(format!("{name}.gp"), gnuplot_lines(name, "g", "2S/(N ln2 / 2)", "($4==1 ? $8 : 1/0)", Some(9)))?;
        }
        Figure::Fig2 | Figure::Fig3 => {
            let curves = averaged_rdm_curves(store);
            let mut curve_csv = String::from("N,state_kind,g,k,x,eta,eta_mp\n");
            let mut fid_csv = String::from("N,state_kind,g,D_KL\n");
            let mut fit_csv = String::from("N,state_kind,g_c,boundary_flag\n");
            let mut peaks = Vec::new();
            for ((n, st), cs) in &curves {
                for (g, ev) in cs {
                    let d = ev.len() as f64;
                    for (k, l) in ev.iter().enumerate() {
                        let x = 0.5 * (l * d).sqrt();
                        let _ = writeln!(curve_csv, "{n},{st},{g},{},{x},{},{}", k + 1, (k + 1) as f64 / d, mp_curve(x));
                    }
                }
                if cs.len() < 2 {
                    continue;
                }
                let step = cs[1].0 - cs[0].0;
                if let Ok(scan) = kl_fidelity_scan(cs, round_g(step)) {
                    for (g, v) in &scan {
                        let _ = writeln!(fid_csv, "{n},{st},{g},{v}");
                    }
                    if let Ok(tp) = transition_point(&scan, 10) {
                        let _ = writeln!(fit_csv, "{n},{st},{},{}", tp.g_c, tp.boundary as u8);
                        if !tp.boundary && st == "gs" {
                            peaks.push((*n as f64, tp.g_c));
                        }
                    }
                }
            }
            if figure == Figure::Fig2 {
                emit("fig2_curves.csv".into(), curve_csv)?;
                emit("fig2_fidelity.csv".into(), fid_csv)?;
                emit("fig2.gp".into(), gnuplot_lines("fig2_fidelity", "g", "D_KL(eta_g | eta_g+eps)", "4", None))?;
            } else {
                emit("fig3_fidelity.csv".into(), fid_csv)?;
                emit("fig3_transition.csv".into(), fit_csv)?;
                if peaks.len() >= 2 {
                    let xs: Vec<f64> = peaks.iter().map(|p| p.0).collect();
                    let ys: Vec<f64> = peaks.iter().map(|p| p.1).collect();
                    if let Ok(fit) = power_law_fit(&xs, &ys) {
                        emit("fig3_powerlaw.json".into(), fit.to_json())?;
                    }
                }
                emit("fig3.gp".into(), gnuplot_points("fig3_transition", "N", "g_c", "1", "3"))?;
            }
        }
        Figure::Fig4 => {
            let mut csv = String::from("N,g,state_kind,bin_lo,bin_hi,density,poisson,wd_goe,wd_gue,wd_gse\n");
            let mut kl = String::from("N,g,state_kind,kl_poisson,kl_wd_goe,kl_wd_gue,kl_wd_gse\n");
            for ((n, st, g), recs) in grouped(store, Diagnostic::Ess) {
                let ratios: Vec<f64> = recs.iter().filter_map(|r| r.payload_vec("ratios")).flatten().collect();
                let Ok(h) = ess_histogram(&ratios, RATIO_BINS, RATIO_CUTOFF) else { continue };
                for (k, d) in h.densities.iter().enumerate() {
                    let (lo, hi) = (h.bin_edges[k], h.bin_edges[k + 1]);
                    let mid = 0.5 * (lo + hi);
                    let refs: Vec<String> =
                        ReferenceKind::ALL.iter().map(|&r| reference_pdf(r, mid).unwrap().to_string()).collect();
                    let _ = writeln!(csv, "{n},{},{st},{lo},{hi},{d},{}", g.0, refs.join(","));
                }
                let kls: Vec<String> =
                    ReferenceKind::ALL.iter().map(|&r| kl_to_reference(&h, r).unwrap_or(f64::NAN).to_string()).collect();
                let _ = writeln!(kl, "{n},{},{st},{}", g.0, kls.join(","));
            }
            emit("fig4.csv".into(), csv)?;
            emit("fig4_kl.csv".into(), kl)?;
            emit("fig4.gp".into(), gnuplot_hist("fig4"))?;
        }
        Figure::Fig5 => {
            let mut raw = String::from("seed,N,g,state_kind,method,n_samples,M2,std_error\n");
            let mut agg = String::from("N,g,state_kind,mean,std,count,haar\n");
            for ((n, st, g), recs) in grouped(store, Diagnostic::Sre) {
                let mut v = Vec::new();
                for r in &recs {
                    let m = r.payload_f64("value").unwrap_or(f64::NAN);
                    let method = r.payload.get("method").and_then(Value::as_str).unwrap_or("");
                    let _ = writeln!(
                        raw,
                        "{},{n},{},{st},{method},{},{m},{}",
                        r.seed,
                        g.0,
                        r.payload_f64("n_samples").unwrap_or(0.0),
                        r.payload_f64("std_error").unwrap_or(0.0)
                    );
                    v.push(m);
                }
                let (m, s) = mean_std(&v);
                let _ = writeln!(agg, "{n},{},{st},{m},{s},{},{}", g.0, v.len(), n as f64 / 2.0 - 2.0);
            }
            emit("fig5_raw.csv".into(), raw)?;
            emit("fig5.csv".into(), agg)?;
            emit("fig5.gp".into(), gnuplot_lines("fig5", "g", "M2", "4", Some(7)))?;
        }
        Figure::Fig6 => {
            let mut csv = String::from("N,g,state_kind,abs_capacity_mean,abs_capacity_std,antiflatness_mean,antiflatness_std,count,haar_capacity,haar_antiflatness\n");
            let cap = grouped(store, Diagnostic::Capacity);
            let af = grouped(store, Diagnostic::Antiflatness);
            for (key, recs) in &cap {
                let c: Vec<f64> = recs.iter().filter_map(|r| r.payload_f64("mean")).map(f64::abs).collect();
                let a: Vec<f64> = af.get(key).map(|v| v.iter().filter_map(|r| r.payload_f64("mean")).collect()).unwrap_or_default();
                let (cm, cs) = mean_std(&c);
                let (am, asd) = if a.is_empty() { (f64::NAN, f64::NAN) } else { mean_std(&a) };
                let _ = writeln!(
                    csv,
                    "{},{},{},{cm},{cs},{am},{asd},{},{},{}",
                    key.0,
                    key.2 .0,
                    key.1,
                    c.len(),
                    HAAR_CAPACITY.abs(),
                    HAAR_LOG_ANTIFLATNESS
                );
            }
            emit("fig6.csv".into(), csv)?;
            emit("fig6.gp".into(), gnuplot_lines("fig6", "g", "|C_E|", "4", Some(9)))?;
        }
        Figure::Dos => {
            let mut csv = String::from("N,g,bin_lo,bin_hi,density\n");
            let mut rbar = String::from("N,g,rbar,sectors\n");
            for ((n, _, g), recs) in grouped(store, Diagnostic::Dos) {
                let stripped: Vec<f64> = recs
                    .iter()
                    .filter_map(|r| r.payload_vec("eigenvalues"))
                    .flat_map(|v| v.into_iter().step_by(2).collect::<Vec<_>>())
                    .collect();
                let lo = stripped.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = stripped.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if let Ok(h) = crate::ess::HistogramPDF::from_samples(&stripped, 100, lo, hi.max(lo + 1e-12)) {
                    for (k, d) in h.densities.iter().enumerate() {
                        let _ = writeln!(csv, "{n},{},{},{},{d}", g.0, h.bin_edges[k], h.bin_edges[k + 1]);
                    }
                }
                let rs: Vec<f64> = recs
                    .iter()
                    .filter_map(|r| r.payload.get("rbar_sectors")?.as_array().cloned())
                    .flatten()
                    .filter_map(|v| v.as_f64())
                    .collect();
                if !rs.is_empty() {
                    let _ = writeln!(rbar, "{n},{},{},{}", g.0, mean(&rs), rs.len());
                }
            }
            emit("dos.csv".into(), csv)?;
            emit("dos_rbar.csv".into(), rbar)?;
            emit("dos.gp".into(), gnuplot_hist("dos"))?;
        }
        Figure::Gap => {
            let mut csv = String::from("N,g,mean_gap,std_gap,count\n");
            let mut by_g: BTreeMap<OrderedG, Vec<(f64, f64)>> = BTreeMap::new();
            for ((n, _, g), recs) in grouped(store, Diagnostic::Gap) {
                let v: Vec<f64> = recs.iter().filter_map(|r| r.payload_f64("gap")).filter(|x| x.is_finite()).collect();
                if v.is_empty() {
                    continue;
                }
                let (m, s) = mean_std(&v);
                let _ = writeln!(csv, "{n},{},{m},{s},{}", g.0, v.len());
                by_g.entry(g).or_default().push((n as f64, m));
            }
            let mut fits = BTreeMap::new();
            for (g, pts) in by_g {
                let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().filter(|p| p.1 > 0.0).unzip();
                if xs.len() >= 2 {
                    if let Ok(fit) = power_law_fit(&xs, &ys) {
                        fits.insert(format!("{}", g.0), fit);
                    }
                }
            }
            emit("gap.csv".into(), csv)?;
            emit("gap_powerlaw.json".into(), serde_json::to_string_pretty(&fits)?)?;
            emit("gap.gp".into(), gnuplot_points("gap", "N", "E1-E0", "1", "3"))?;
        }
    }
    Ok(ReportOutcome::Written { files })
}

/// Column 2 is `g`; `ref_col` is a dashed reference line.
/// Per-record tidy tables for whatever the store holds: `spectrum.csv`,
/// `entropy_scan.csv`, `capacity_scan.csv`, `antiflatness_scan.csv` and
/// `sre_scan.csv`. Tables without rows are not written.
pub fn export_tables(store: &ResultStore, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut spectrum = String::from("seed,N,g,index,eigenvalue\n");
    let mut entropy = String::from("seed,N,g,state_kind,bipartition_id,alpha,S\n");
    let mut capacity = String::from("seed,N,g,state_kind,bipartition_id,C_E\n");
    let mut anti = String::from("seed,N,g,state_kind,bipartition_id,F\n");
    let mut sre = String::from("seed,N,g,state_kind,method,n_samples,M2,std_error\n");
    let mut rows = [0usize; 5];
    let labels = |r: &EnsembleRecord| -> Vec<String> {
        r.payload
            .get("bipartitions")
            .and_then(Value::as_array)
            .map(|a| a.iter().map(|v| v.as_str().unwrap_or_default().to_string()).collect())
            .unwrap_or_default()
    };
    for r in store.iter() {
        let head = format!("{},{},{}", r.seed, r.n, r.g);
        match r.diagnostic {
            Diagnostic::Dos => {
                for (k, e) in r.payload_vec("eigenvalues").unwrap_or_default().iter().enumerate() {
                    let _ = writeln!(spectrum, "{head},{k},{e}");
                    rows[0] += 1;
                }
            }
            Diagnostic::Entropy => {
                let alphas = r.payload_vec("alphas").unwrap_or_default();
                let values = r.payload.get("values").and_then(Value::as_array).cloned().unwrap_or_default();
                for (b, row) in labels(r).iter().zip(values) {
                    let row: Vec<f64> = serde_json::from_value(row)?;
                    for (a, v) in alphas.iter().zip(row) {
                        let _ = writeln!(entropy, "{head},{},{b},{a},{v}", r.state);
                        rows[1] += 1;
                    }
                }
            }
            Diagnostic::Capacity | Diagnostic::Antiflatness => {
                let (buf, i) = if r.diagnostic == Diagnostic::Capacity { (&mut capacity, 2) } else { (&mut anti, 3) };
                for (b, v) in labels(r).iter().zip(r.payload_vec("values").unwrap_or_default()) {
                    let _ = writeln!(buf, "{head},{},{b},{v}", r.state);
                    rows[i] += 1;
                }
            }
            Diagnostic::Sre => {
                let e: crate::sre::SreEstimate = serde_json::from_value(r.payload.clone())?;
                let method = serde_json::to_value(e.method)?;
                let _ = writeln!(
                    sre,
                    "{head},{},{},{},{},{}",
                    r.state,
                    method.as_str().unwrap_or_default(),
                    e.n_samples,
                    e.value,
                    e.std_error
                );
                rows[4] += 1;
            }
            _ => {}
        }
    }
    let tables = [
        ("spectrum.csv", spectrum),
        ("entropy_scan.csv", entropy),
        ("capacity_scan.csv", capacity),
        ("antiflatness_scan.csv", anti),
        ("sre_scan.csv", sre),
    ];
    let mut files = Vec::new();
    for ((file, body), n) in tables.into_iter().zip(rows) {
        if n == 0 {
            continue;
        }
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let p = dir.join(file);
        atomic_write(&p, body.as_bytes())?;
        files.push(p);
    }
    Ok(files)
}

fn gnuplot_lines(stem: &str, xlabel: &str, ylabel: &str, ycol: &str, ref_col: Option<usize>) -> String {
    let mut s = format!(
        "set datafile separator ','\nset key autotitle columnhead\nset xlabel '{xlabel}'\nset ylabel '{ylabel}'\nset terminal pngcairo size 900,600\nset output '{stem}.png'\n"
    );
    let _ = write!(s, "plot '{stem}.csv' using 2:{ycol} with linespoints");
    if let Some(c) = ref_col {
        let _ = write!(s, ", '' using 2:{c} with lines dashtype 2 title 'reference'");
    }
    s.push('\n');
    s
}

fn gnuplot_points(stem: &str, xlabel: &str, ylabel: &str, xcol: &str, ycol: &str) -> String {
    format!(
        "set datafile separator ','\nset key autotitle columnhead\nset logscale xy\nset xlabel '{xlabel}'\nset ylabel '{ylabel}'\nset terminal pngcairo size 900,600\nset output '{stem}.png'\nplot '{stem}.csv' using {xcol}:{ycol} with points pt 7\n"
    )
}

fn gnuplot_hist(stem: &str) -> String {
    format!(
        "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'r'\nset ylabel 'P(r)'\nset xrange [0:5]\nset terminal pngcairo size 900,600\nset output '{stem}.png'\nplot '{stem}.csv' using (($4+$5)/2):6 with boxes, '' using (($4+$5)/2):7 with lines title 'Poisson', '' using (($4+$5)/2):8 with lines title 'WD GOE', '' using (($4+$5)/2):9 with lines title 'WD GUE', '' using (($4+$5)/2):10 with lines title 'WD GSE'\n"
    )
}

/// Every closed-form constant used as a reference.
pub fn references_json() -> Value {
    use crate::entanglement::{syk2_k, syk2_reference, Syk2Kind};
    let s2: BTreeMap<String, f64> = (1..=8)
        .map(|r| (format!("R={r}"), syk2_reference(Syk2Kind::LogAntiflatness, r, 0.5).unwrap()))
        .collect();
    json!({
        "rbar": {
            "poisson": ReferenceKind::Poisson.mean_ratio(),
            "wd_goe": ReferenceKind::WdGoe.mean_ratio(),
            "wd_gue": ReferenceKind::WdGue.mean_ratio(),
            "wd_gse": ReferenceKind::WdGse.mean_ratio(),
        },
        "wd_normalization": {
            "z1": 8.0 / 27.0,
            "z2": 4.0 / 81.0 * std::f64::consts::PI / 3f64.sqrt(),
            "z4": 4.0 / 729.0 * std::f64::consts::PI / 3f64.sqrt(),
        },
        "haar": {
            "capacity": HAAR_CAPACITY,
            "log_antiflatness": HAAR_LOG_ANTIFLATNESS,
            "page_rescaled_half": 1.0,
            "sre2": "n_qubits - 2",
        },
        "syk2": {
            "K_half": syk2_k(0.5),
            "log_antiflatness_half": s2,
        },
        "sre": {
            "golden_per_qubit": 1.5f64.log2(),
            "gs_fit": "-2.4 + 0.95 * N/2",
            "ms_fit": "-2.6 + 0.96 * N/2",
        },
        "symmetry_class_by_n": symmetry_classes(),
    })
}

/// SYK-4 level-statistics class for `N` (period 8).
pub fn symmetry_class(n_majorana: usize) -> ReferenceKind {
    match n_majorana % 8 {
        0 => ReferenceKind::WdGoe,
        4 => ReferenceKind::WdGse,
        _ => ReferenceKind::WdGue,
    }
}

fn symmetry_classes() -> Value {
    let m: BTreeMap<String, &str> = (16..=30).step_by(2).map(|n| (n.to_string(), symmetry_class(n).name())).collect();
    json!(m)
}

/// `r̄` of one spectrum per parity sector, pooled.
pub fn sector_average_ratio(spectra: &[crate::spectral::Spectrum]) -> Result<f64> {
    let sectors: Vec<Vec<f64>> = spectra.iter().flat_map(|s| s.sectors()).filter(|s| s.len() >= 3).collect();
    average_ratio(&sectors)
}

/// Folded ratios pooled over parity sectors.
pub fn sector_ratios(s: &crate::spectral::Spectrum) -> Vec<f64> {
    s.sectors().iter().filter(|v| v.len() >= 3).flat_map(|v| folded_ratios(v).unwrap_or_default()).collect()
}
