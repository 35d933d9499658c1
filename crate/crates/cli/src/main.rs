use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use syklab::entanglement::{fermionic_partial_trace, haar_reference, renyi_entropy, Bipartition, HaarReference};
use syklab::fitting::{linear_fit, polynomial_peak, power_law_fit, saturating_exponential_fit, FitModel};
use syklab::pauli::{PauliString, StateVector};
use syklab::runner::{
    emit_report, export_tables, merge_stores, references_json, round_g, run_experiment, Diagnostic, ExperimentConfig, Figure,
    GridSpec, ReportOutcome, ResultStore, MERGED_FILE,
};
use syklab::spectral::ground_state;
use syklab::sre::{exact_sre, golden_state};
use syklab::syk::{
    assemble_sparse, build_interpolated, build_syk, jordan_wigner, sample_couplings, write_dump, DisorderSpec, DumpHeader,
    Realization,
};
use syklab::{Error, Result};

#[derive(Parser)]
#[command(name = "syklab", version, about = "SYK entanglement and magic laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Assemble one Hamiltonian and optionally dump it.
    Build(BuildArgs),
    /// Run an ensemble sweep into an output directory.
    Run(RunArgs),
    /// Merge result stores, failing on conflicting records.
    Merge(MergeArgs),
    /// Write figure CSV and gnuplot script from a store.
    Report(ReportArgs),
    /// Fit a model to two-column CSV data.
    Fit(FitArgs),
    /// Print every closed-form reference constant as JSON.
    References,
    /// Run the built-in oracle checks.
    Selftest,
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    n: usize,
    /// Interpolation parameter; omit with --q for a pure model.
    #[arg(long)]
    g: Option<f64>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Binary dump path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated Majorana counts.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// A single value or start:stop:step.
    #[arg(long)]
    g: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Realizations for every N.
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    diagnostics: Option<Vec<String>>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Continue an existing output directory with its stored config.
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct MergeArgs {
    /// Store files or directories.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Store file or directory; defaults to the output directory.
    store: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "fig1,fig2,fig3,fig4,fig5,fig6,dos,gap")]
    figure: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// linear, power_law, one_minus_a_exp, a_times_one_minus_exp or polynomial.
    #[arg(long)]
    model: String,
    /// CSV with x,y columns; a header line is skipped.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 10)]
    degree: usize,
}

fn parse_grid(s: &str) -> Result<GridSpec> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| Error::Argument(format!("bad g value {p:?}"))))
        .collect::<Result<_>>()?;
    match parts.as_slice() {
        [g] => Ok(GridSpec::new(*g, *g, 1.0)),
        [a, b, st] => Ok(GridSpec::new(*a, *b, *st)),
        _ => Err(Error::Argument(format!("g must be a value or start:stop:step, got {s:?}"))),
    }
}

fn output_dir(cfg: Option<&ExperimentConfig>, cli: Option<&Path>) -> PathBuf {
    match cfg {
        Some(c) => c.resolve_output_dir(cli),
        None => ExperimentConfig::new(vec![], GridSpec::new(0.0, 1.0, 0.01), vec![]).resolve_output_dir(cli),
    }
}

fn cmd_build(a: BuildArgs) -> Result<u8> {
    let (h, q) = match (a.q, a.g) {
        (Some(q), None) => (build_syk(&sample_couplings(&DisorderSpec::new(a.n, q, 1.0, a.seed)?)?)?, q as u32),
        (None, Some(g)) => {
            let r = Realization::sample(a.n, a.seed)?;
            (build_interpolated(&r.h4, &r.h2, g)?, 0)
        }
        _ => return Err(Error::Argument("give exactly one of --q or --g".into())),
    };
    let sparse = assemble_sparse(&h)?;
    if let Some(p) = &a.out {
        let header = DumpHeader { seed: a.seed, n_majorana: a.n as u32, q, g: a.g.unwrap_or(f64::NAN) };
        let io = |e| Error::Io { path: p.clone(), source: e };
        let f = std::fs::File::create(p).map_err(io)?;
        write_dump(std::io::BufWriter::new(f), &header, &sparse).map_err(io)?;
    }
    let summary = json!({
        "n_majorana": a.n,
        "n_qubits": h.n_qubits,
        "terms": h.len(),
        "dim": sparse.dim,
        "nnz": sparse.nnz(),
        "hermiticity_error": sparse.hermiticity_error(),
        "conserves_parity": sparse.conserves_parity(),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(0)
}

fn cmd_run(a: RunArgs) -> Result<u8> {
    let mut cfg = match (&a.config, a.resume) {
        (Some(p), _) => ExperimentConfig::load(p)?,
        (None, true) => {
            let dir = output_dir(None, a.out.as_deref());
            ExperimentConfig::load(&dir.join("config.json"))?
        }
        (None, false) => {
            let n = a.n.clone().ok_or_else(|| Error::Argument("--n or --config is required".into()))?;
            let diags = a.diagnostics.clone().unwrap_or_else(|| vec!["entropy".into()]);
            let diags = diags.iter().map(|d| d.parse()).collect::<Result<Vec<Diagnostic>>>()?;
            ExperimentConfig::new(n, GridSpec::new(0.0, 1.0, 0.01), diags)
        }
    };
    if let Some(n) = a.n {
        cfg.n_list = n;
    }
    if let Some(g) = &a.g {
        cfg.g_grid = parse_grid(g)?;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(m) = a.realizations {
        cfg.realizations = cfg.n_list.iter().map(|&n| (n, m)).collect();
    }
    if let Some(d) = &a.diagnostics {
        cfg.diagnostics = d.iter().map(|d| d.parse()).collect::<Result<_>>()?;
    }
    cfg.validate()?;
    let out = cfg.resolve_output_dir(a.out.as_deref());
    let existing = out.join("config.json");
    if existing.exists() && !a.resume {
        let old = ExperimentConfig::load(&existing)?;
        if old.hash() != cfg.hash() {
            return Err(Error::Argument(format!(
                "{} holds a different experiment; pass --resume or choose another --out",
                out.display()
            )));
        }
    }
    let summary = run_experiment(&cfg, &out, a.threads)?;
    eprintln!(
        "computed {} units, skipped {}, pending {}; {} records in {}",
        summary.computed.len(),
        summary.skipped.len(),
        summary.pending.len(),
        summary.records,
        out.join(MERGED_FILE).display()
    );
    for p in &summary.pending {
        eprintln!("pending N={} realization={}: {}", p.unit.n, p.unit.realization, p.reason);
    }
    Ok(if summary.is_partial() { 2 } else { 0 })
}

fn cmd_merge(a: MergeArgs) -> Result<u8> {
    let stores = a.inputs.iter().map(|p| ResultStore::read_path(p)).collect::<Result<Vec<_>>>()?;
    let merged = merge_stores(stores)?;
    merged.write_file(&a.out)?;
    eprintln!("{} records written to {}", merged.len(), a.out.display());
    Ok(0)
}

fn cmd_report(a: ReportArgs) -> Result<u8> {
    let out = output_dir(None, a.out.as_deref());
    let src = a.store.clone().unwrap_or_else(|| out.join(MERGED_FILE));
    let store = if src.exists() { ResultStore::read_path(&src)? } else { ResultStore::default() };
    let dir = out.join("report");
    let mut code = 0;
    for f in &a.figure {
        let fig: Figure = f.parse()?;
        match emit_report(&store, fig, &dir)? {
            ReportOutcome::Written { files } => {
                for p in files {
                    println!("{}", p.display());
                }
            }
            ReportOutcome::Missing { manifest, missing } => {
                eprintln!("{}: missing {}; see {}", fig.name(), missing.join(", "), manifest.display());
                code = 2;
            }
        }
    }
    for p in export_tables(&store, &dir)? {
        println!("{}", p.display());
    }
    Ok(code)
}

fn read_xy(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() < 2 || line.trim().is_empty() {
            continue;
        }
        match (cols[0].parse::<f64>(), cols[1].parse::<f64>()) {
            (Ok(x), Ok(y)) => {
                xs.push(x);
                ys.push(y);
            }
            _ if i == 0 => {}
            _ => return Err(Error::Argument(format!("line {}: not numeric", i + 1))),
        }
    }
    Ok((xs, ys))
}

fn cmd_fit(a: FitArgs) -> Result<u8> {
    let (xs, ys) = read_xy(&a.input)?;
    let text = match a.model.as_str() {
        "linear" => linear_fit(&xs, &ys)?.to_json(),
        "power_law" => power_law_fit(&xs, &ys)?.to_json(),
        "one_minus_a_exp" => saturating_exponential_fit(&xs, &ys, FitModel::OneMinusAExp)?.to_json(),
        "a_times_one_minus_exp" => saturating_exponential_fit(&xs, &ys, FitModel::ATimesOneMinusExp)?.to_json(),
        "polynomial" => {
            let p = polynomial_peak(&xs, &ys, a.degree)?;
            serde_json::to_string_pretty(&json!({
                "location": p.location,
                "value": p.value,
                "boundary": p.boundary,
                "coefficients": p.coefficients,
            }))?
        }
        m => return Err(Error::Argument(format!("unknown model {m:?}"))),
    };
    println!("{text}");
    Ok(0)
}

fn check(name: &str, ok: bool, failures: &mut usize) {
    println!("{} {name}", if ok { "PASS" } else { "FAIL" });
    if !ok {
        *failures += 1;
    }
}

fn cmd_selftest() -> Result<u8> {
    let mut failures = 0;

    let chi = (1..=8).map(|i| jordan_wigner(i, 8)).collect::<Result<Vec<_>>>()?;
    let mut ok = true;
    for (a, pa) in chi.iter().enumerate() {
        for (b, pb) in chi.iter().enumerate() {
            let ab = syklab::pauli::multiply(pa, pb)?;
            let ba = syklab::pauli::multiply(pb, pa)?;
            let anti_zero = ab.x_mask == ba.x_mask && ab.z_mask == ba.z_mask && (ab.phase_exp + 2) % 4 == ba.phase_exp;
            ok &= if a == b { ab.is_identity() && ab.phase_exp == 0 } else { anti_zero };
        }
    }
    check("majorana anticommutation (N=8)", ok, &mut failures);

    let p: PauliString = "+1 XYZI".parse()?;
    let q: PauliString = "+1 ZZXY".parse()?;
    let pq = syklab::pauli::multiply(&p, &q)?;
    let action_ok = (0..16u64).all(|b| {
        let (b1, c1) = q.apply_to_basis(b);
        let (b2, c2) = p.apply_to_basis(b1);
        let (b3, c3) = pq.apply_to_basis(b);
        b2 == b3 && (c1 * c2 - c3).norm() < 1e-12
    });
    check("pauli product matches operator composition", action_ok, &mut failures);

    let h = Realization::sample(8, 11)?.hamiltonian(0.3)?;
    let gs = ground_state(&h, 1)?;
    let mut hv = vec![syklab::Complex64::new(0.0, 0.0); h.dim];
    h.matvec(&gs.state.amplitudes, &mut hv);
    let res: f64 = hv
        .iter()
        .zip(&gs.state.amplitudes)
        .map(|(a, b)| (a - b * gs.energy).norm_sqr())
        .sum::<f64>()
        .sqrt();
    check("ground-state residual below 1e-8", res < 1e-8 && h.is_hermitian(), &mut failures);

    let basis = StateVector::basis(6, 0b101101);
    check("basis state has zero magic", exact_sre(&basis, 2.0)?.value.abs() < 1e-10, &mut failures);

    let golden = golden_state(4);
    let m2 = exact_sre(&golden, 2.0)?.value;
    check("golden state magic is 4 log2(3/2)", (m2 - 4.0 * 1.5f64.log2()).abs() < 1e-9, &mut failures);

    let b = Bipartition::prefix(4, 2)?;
    let bell: Vec<syklab::Complex64> = (0..16)
        .map(|i| if i == 0 || i == 15 { syklab::Complex64::new(0.5f64.sqrt(), 0.0) } else { syklab::Complex64::new(0.0, 0.0) })
        .collect();
    let s = fermionic_partial_trace(&StateVector::new(4, bell)?, &b)?;
    check("two-branch state has entropy ln 2", (renyi_entropy(&s, 1.0)? - 2f64.ln()).abs() < 1e-12, &mut failures);

    let page = haar_reference(&HaarReference::PageEntropy { f: 0.5 })?;
    check("rescaled Page entropy is 1", (page - 1.0).abs() < 1e-12, &mut failures);

    let r = Realization::sample(8, 3)?;
    let mixed = build_interpolated(&r.h4, &r.h2, 0.5)?;
    check("interpolated Hamiltonian conserves parity", mixed.conserves_parity(), &mut failures);

    let g = round_g(0.1 + 0.2);
    check("grid rounding", g == 0.3, &mut failures);

    Ok(if failures == 0 { 0 } else { 1 })
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.cmd {
        Cmd::Build(a) => cmd_build(a),
        Cmd::Run(a) => cmd_run(a),
        Cmd::Merge(a) => cmd_merge(a),
        Cmd::Report(a) => cmd_report(a),
        Cmd::Fit(a) => cmd_fit(a),
        Cmd::References => {
            println!("{}", serde_json::to_string_pretty(&references_json())?);
            Ok(0)
        }
        Cmd::Selftest => cmd_selftest(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
