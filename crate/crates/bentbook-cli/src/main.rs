//! Command-line frontend: enumerate compatible permutations, extend sets,
//! build codebooks, and verify claimed properties, writing every artifact
//! with a digest manifest for reproducible runs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use bentbook::codebook::{
    coherence_direct, coherence_via_rank, gdj_sequence, golay_mate, is_golay_pair, metrics_for,
    papr, spreading_matrix,
};
use bentbook::extend::{mixed_extend, self_extend, verify_compatible_set, SetFile};
use bentbook::quadperm::Perm;
use bentbook::search::{
    build_graph, composition_table, enumerate_is, maximal_cliques, IsEnumeration, MaximalSets,
};

#[derive(Parser)]
#[command(
    name = "bentbook",
    version,
    about = "spreading codebooks from compatible permutations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate the identity-compatible permutations of a given size and
    /// the maximal compatible sets they form.
    Search(SearchArgs),
    /// Lift a compatible set to a higher dimension, by self-extension or by
    /// crossing it with a partner set.
    Extend(ExtendArgs),
    /// Materialize or summarize the spreading codebook of a set.
    Codebook(CodebookArgs),
    /// Re-check a stored artifact against the claimed properties.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SearchArgs {
    /// Permutation size.
    #[arg(long)]
    n: usize,
    /// Smallest maximal set worth reporting.
    #[arg(long, default_value_t = 6)]
    min_size: usize,
    /// Lift the enumeration size guard.
    #[arg(long)]
    force: bool,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ExtendArgs {
    /// Path to the base set file (JSON).
    #[arg(long)]
    base: PathBuf,
    /// Self-extension mode: repeat the base against itself.
    #[arg(long = "self", conflicts_with = "mixed")]
    self_mode: bool,
    /// Mixed mode: cross the base with a partner set.
    #[arg(long, requires = "partner")]
    mixed: bool,
    /// Number of blocks for self-extension.
    #[arg(long, default_value_t = 2)]
    m: usize,
    /// Partner set file for mixed mode.
    #[arg(long)]
    partner: Option<PathBuf>,
    /// Smallest mixed set worth reporting.
    #[arg(long, default_value_t = 6)]
    min_size: usize,
    /// Re-verify with full spectra even where the rank route would do.
    #[arg(long)]
    deep: bool,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CodebookFormat {
    Csv,
    Bin,
    MetricsOnly,
}

#[derive(Args)]
struct CodebookArgs {
    /// Path to the set file (JSON).
    #[arg(long)]
    set: PathBuf,
    /// Export format; metrics-only skips materialization.
    #[arg(long, value_enum, default_value_t = CodebookFormat::Csv)]
    format: CodebookFormat,
    /// Oversampling factor for the peak-power grid.
    #[arg(long, default_value_t = 16)]
    oversample: usize,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VerifyKind {
    Set,
    Codebook,
    Golay,
    Papr,
}

#[derive(Args)]
struct VerifyArgs {
    /// Path to the set file (JSON).
    path: PathBuf,
    /// Which property suite to run.
    #[arg(long, value_enum)]
    kind: VerifyKind,
    /// Oversampling factor for peak-power checks.
    #[arg(long, default_value_t = 16)]
    oversample: usize,
}

#[derive(Serialize)]
struct ManifestFile {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    parameters: serde_json::Value,
    inputs: Vec<ManifestFile>,
    outputs: Vec<ManifestFile>,
    tool_version: String,
    timestamp_unix: u64,
    wall_time_ms: u128,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var("BENTBOOK_THREADS") {
        if let Ok(threads) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global();
        }
    }
    let started = Instant::now();
    let outcome = match cli.command {
        Command::Search(args) => cmd_search(args, started),
        Command::Extend(args) => cmd_extend(args, started),
        Command::Codebook(args) => cmd_codebook(args, started),
        Command::Verify(args) => cmd_verify(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

/// Exit contract: 0 success, 1 I/O or parse trouble, 2 guard or usage
/// violations, 3 failed verification.
fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<bentbook::Error>() {
            return match e {
                bentbook::Error::Guard(_) => 2,
                bentbook::Error::Verification(_) => 3,
                _ => 2,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some()
            || cause.downcast_ref::<serde_json::Error>().is_some()
        {
            return 1;
        }
    }
    1
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

/// Writes a file and records its digest.
struct ArtifactWriter {
    dir: PathBuf,
    outputs: Vec<ManifestFile>,
}

impl ArtifactWriter {
    fn new(dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(ArtifactWriter {
            dir: dir.to_path_buf(),
            outputs: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(ManifestFile {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn finish(
        mut self,
        command: &str,
        parameters: serde_json::Value,
        inputs: Vec<ManifestFile>,
        started: Instant,
    ) -> anyhow::Result<()> {
        let manifest = RunManifest {
            command: command.to_string(),
            parameters,
            inputs,
            outputs: std::mem::take(&mut self.outputs),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            wall_time_ms: started.elapsed().as_millis(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = self.dir.join("manifest.json");
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

fn read_input(path: &Path) -> anyhow::Result<(Vec<u8>, ManifestFile)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let record = ManifestFile {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    };
    Ok((bytes, record))
}

fn load_set(path: &Path) -> anyhow::Result<(Vec<Perm>, ManifestFile)> {
    let (bytes, record) = read_input(path)?;
    let file: SetFile =
        serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))?;
    file.check()?;
    Ok((file.perms, record))
}

fn cmd_search(args: SearchArgs, started: Instant) -> anyhow::Result<()> {
    if args.n < 2 {
        bail!(bentbook::Error::Invalid(format!(
            "search needs a size of at least 2, got {}",
            args.n
        )));
    }
    let members = enumerate_is(args.n, args.force)?;
    let mut writer = ArtifactWriter::new(&args.out)?;
    writer.write_json(
        &format!("is_{}.json", args.n),
        &IsEnumeration::new(args.n, members.clone()),
    )?;
    if members.is_empty() {
        println!("IS_{} is empty; nothing to tabulate", args.n);
    } else {
        let table = composition_table(&members)?;
        writer.write("composition_table.txt", table.render().as_bytes())?;
    }
    let mut family = vec![Perm::identity(args.n)];
    family.extend(members.iter().cloned());
    let graph = build_graph(&family)?;
    let sets: Vec<Vec<Perm>> = maximal_cliques(&graph, args.min_size)
        .into_iter()
        .map(|c| {
            let mut set: Vec<Perm> = c.iter().map(|&v| graph.perm(v).clone()).collect();
            set.sort();
            set
        })
        .collect();
    println!(
        "IS_{} members: {}; maximal sets of size >= {}: {}",
        args.n,
        members.len(),
        args.min_size,
        sets.len()
    );
    writer.write_json(
        "maximal_sets.json",
        &MaximalSets {
            n: args.n,
            min_size: args.min_size,
            count: sets.len(),
            sets,
        },
    )?;
    writer.finish(
        "search",
        serde_json::json!({"n": args.n, "min_size": args.min_size, "force": args.force}),
        Vec::new(),
        started,
    )
}

fn cmd_extend(args: ExtendArgs, started: Instant) -> anyhow::Result<()> {
    if !args.self_mode && !args.mixed {
        bail!(bentbook::Error::Invalid("choose --self or --mixed".into()));
    }
    let (base, base_record) = load_set(&args.base)?;
    let mut writer = ArtifactWriter::new(&args.out)?;
    let mut inputs = vec![base_record];
    if args.self_mode {
        let extended = self_extend(&base, args.m, args.deep)?;
        let report = verify_compatible_set(&extended)?;
        if !report.all_pairs_ok {
            bail!(bentbook::Error::Verification(format!(
                "extended set failed verification at pairs {:?}",
                report.failures
            )));
        }
        let n = extended[0].n();
        println!(
            "self-extended {} permutations to dimension {n}, r_min {:?}",
            extended.len(),
            report.r_min
        );
        let file = SetFile::new(n, extended).with_provenance(serde_json::json!({
            "mode": "self",
            "m": args.m,
            "base": args.base.display().to_string(),
        }));
        writer.write_json("extended_set.json", &file)?;
        writer.write_json("verify_report.json", &report)?;
        writer.finish(
            "extend",
            serde_json::json!({"mode": "self", "m": args.m, "deep": args.deep}),
            inputs,
            started,
        )
    } else {
        let partner_path = args.partner.expect("clap enforces partner with --mixed");
        let (partner, partner_record) = load_set(&partner_path)?;
        inputs.push(partner_record);
        let sets = mixed_extend(&base, &partner, args.min_size)?;
        for set in &sets {
            let report = verify_compatible_set(set)?;
            if !report.all_pairs_ok {
                bail!(bentbook::Error::Verification(format!(
                    "mixed set failed verification at pairs {:?}",
                    report.failures
                )));
            }
        }
        println!(
            "mixed extension produced {} sets of size >= {}",
            sets.len(),
            args.min_size
        );
        let experimental = base[0].n() != 4 || partner[0].n() != 4;
        let n = base[0].n() + partner[0].n();
        let files: Vec<SetFile> = sets
            .into_iter()
            .map(|set| {
                SetFile::new(n, set).with_provenance(serde_json::json!({
                    "mode": "mixed",
                    "base": args.base.display().to_string(),
                    "partner": partner_path.display().to_string(),
                    "experimental": experimental,
                }))
            })
            .collect();
        writer.write_json("mixed_sets.json", &files)?;
        writer.finish(
            "extend",
            serde_json::json!({"mode": "mixed", "min_size": args.min_size}),
            inputs,
            started,
        )
    }
}

fn cmd_codebook(args: CodebookArgs, started: Instant) -> anyhow::Result<()> {
    let (perms, record) = load_set(&args.set)?;
    let report = verify_compatible_set(&perms)?;
    if !report.all_pairs_ok {
        bail!(bentbook::Error::Verification(format!(
            "input set failed verification at pairs {:?}",
            report.failures
        )));
    }
    let mut writer = ArtifactWriter::new(&args.out)?;
    let metrics = match args.format {
        CodebookFormat::MetricsOnly => metrics_for(&perms)?,
        CodebookFormat::Csv => {
            let cb = spreading_matrix(&perms)?.with_papr_metrics(args.oversample)?;
            writer.write("codebook.csv", cb.to_csv().as_bytes())?;
            cb.metrics().clone()
        }
        CodebookFormat::Bin => {
            let cb = spreading_matrix(&perms)?.with_papr_metrics(args.oversample)?;
            writer.write("codebook.bin", &cb.to_packed_bits())?;
            cb.metrics().clone()
        }
    };
    println!(
        "codebook n={} L={} N={} K={} coherence={}",
        metrics.n, metrics.l, metrics.seq_len, metrics.k, metrics.coherence
    );
    writer.write_json("metrics.json", &metrics)?;
    let format = match args.format {
        CodebookFormat::Csv => "csv",
        CodebookFormat::Bin => "bin",
        CodebookFormat::MetricsOnly => "metrics-only",
    };
    writer.finish(
        "codebook",
        serde_json::json!({"format": format, "oversample": args.oversample}),
        vec![record],
        started,
    )
}

fn cmd_verify(args: VerifyArgs) -> anyhow::Result<()> {
    let (perms, _) = load_set(&args.path)?;
    match args.kind {
        VerifyKind::Set => {
            let report = verify_compatible_set(&perms)?;
            if let Some((i, j)) = report.failures.first() {
                println!("set: FAIL at pair ({}, {})", perms[*i], perms[*j]);
                bail!(bentbook::Error::Verification(format!(
                    "pair ({}, {}) is incompatible",
                    perms[*i], perms[*j]
                )));
            }
            println!(
                "set: PASS (l={}, n={}, r_min={:?})",
                report.l, report.n, report.r_min
            );
        }
        VerifyKind::Codebook => {
            let cb = spreading_matrix(&perms)?;
            println!("codebook: within-block orthogonality PASS");
            if perms.len() >= 2 {
                let rank = coherence_via_rank(&perms)?;
                if cb.n() <= 8 {
                    let direct = coherence_direct(&cb)?;
                    if (direct - rank.mu).abs() > 1e-12 {
                        println!("codebook: FAIL coherence {direct} != {}", rank.mu);
                        bail!(bentbook::Error::Verification(
                            "direct and rank coherence disagree".into()
                        ));
                    }
                    println!("codebook: coherence PASS ({direct} both routes)");
                } else {
                    println!("codebook: coherence (rank route) = {}", rank.mu);
                }
            }
        }
        VerifyKind::Golay => {
            let n = perms[0].n();
            for p in &perms {
                for c in 0..1u64 << n {
                    for eps in [false, true] {
                        let a = gdj_sequence(p, c)?;
                        let b = golay_mate(p, c, eps)?;
                        if !is_golay_pair(&a, &b)? {
                            println!("golay: FAIL at ({p}, c={c}, eps={})", eps as u8);
                            bail!(bentbook::Error::Verification(format!(
                                "pair ({p}, c={c}) is not complementary"
                            )));
                        }
                    }
                }
            }
            println!("golay: PASS ({} pairs)", perms.len() * (1 << n) * 2);
        }
        VerifyKind::Papr => {
            let cb = spreading_matrix(&perms)?;
            for (idx, col) in cb.columns().iter().enumerate() {
                let est = papr(col, args.oversample)?;
                if est.grid > 2.0 + 1e-9 {
                    println!(
                        "papr: FAIL at column {idx} (block {}, c {}): {}",
                        idx / cb.seq_len(),
                        idx % cb.seq_len(),
                        est.grid
                    );
                    bail!(bentbook::Error::Verification(format!(
                        "column {idx} exceeds the peak bound: {}",
                        est.grid
                    )));
                }
            }
            println!("papr: PASS ({} columns <= 2 + 1e-9)", cb.k());
        }
    }
    Ok(())
}
