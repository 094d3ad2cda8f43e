use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use glab::basis::{Basis, NormedSpace};
use glab::constructions::{build_dem_nonucc, build_main_a, build_thm_a, dyadic_pairs, parse_host, DkkSpace, DEFAULT_DIM_CAP};
use glab::estimators::{
    democracy_functions, km_exact_hilbert, km_lower, ktilde_lower, lebesgue_search, phi_lower, quasi_greedy_lower,
    tqg_constant_lower, DemocracyMode, SearchOptions, Witness, WitnessFamily,
};
use glab::io::{load_basis, read_vector_csv, read_witnesses_csv, save_basis, write_report_csv, write_vector_csv, write_witnesses_csv};
use glab::suite::{emit_report, run_suite, ExperimentConfig, Suite, SuiteResult};
use glab::{BoundKind, EstimateReport, SeqNorm};

#[derive(Parser)]
#[command(name = "glab", version, about = "Greedy-algorithm lab: build bases, estimate greedy constants, reproduce growth laws")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Construction {
    #[value(name = "thmA")]
    ThmA,
    #[value(name = "mainA")]
    MainA,
    #[value(name = "demNonUCC")]
    DemNonUcc,
    #[value(name = "dkk")]
    Dkk,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Param {
    Km,
    Ktilde,
    Phiu,
    Phil,
    Phius,
    Phils,
    Tqg,
    Qg,
    Phi,
    Lebesgue,
}

#[derive(Subcommand)]
enum Command {
    /// Build a construction and save it as JSON with witnesses alongside.
    Build {
        #[arg(long, value_enum)]
        construction: Construction,
        /// l2, l1, lp:P, lorentz:Q:FILE, weak:FILE or lorentz-harmonic:Q
        #[arg(long, default_value = "l2")]
        host: String,
        #[arg(long)]
        levels: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DIM_CAP)]
        cap: usize,
    },
    /// Norm of the vector with the given basis coefficients.
    Norm {
        #[arg(long)]
        space: PathBuf,
        /// One coefficient per line.
        #[arg(long)]
        coeffs: PathBuf,
    },
    /// Thresholding greedy approximation `G_m f` of the vector with the given coefficients.
    Tga {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        coeffs: PathBuf,
        #[arg(long)]
        m: usize,
        /// Output file for the coefficients of `G_m f`; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate a greedy-algorithm parameter over a list of sizes.
    Estimate {
        #[arg(long)]
        space: PathBuf,
        #[arg(long, value_enum)]
        param: Param,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        m_list: Vec<usize>,
        /// Thresholds for `phi`.
        #[arg(long, value_delimiter = ',', default_value = "1,0.5,0.25,0.125")]
        a_list: Vec<f64>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named suite and write the report CSV plus verdict JSON.
    Reproduce {
        /// Suite name; overrides the config file.
        #[arg(long)]
        suite: Option<String>,
        /// JSON config; flags win over its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        host: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        cap: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance suites and print one line per criterion.
    Check {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9")]
        criteria: Vec<u8>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Ok(t) = std::env::var("GLAB_THREADS") {
        match t.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            }
            _ => {
                eprintln!("error: GLAB_THREADS must be a positive integer, got {t:?}");
                return ExitCode::from(2);
            }
        }
    }
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> anyhow::Result<bool> {
    match cmd {
        Command::Build { construction, host, levels, out, cap } => build(construction, &host, levels, &out, cap)?,
        Command::Norm { space, coeffs } => {
            let b = load_basis(&space)?;
            let c = read_vector_csv(&coeffs)?;
            println!("{}", b.coeff_norm(&c)?);
        }
        Command::Tga { space, coeffs, m, out } => {
            let b = load_basis(&space)?;
            let c = read_vector_csv(&coeffs)?;
            let f = b.synthesize(&c)?;
            let g = b.analyze(&b.tga(&f, m)?)?;
            match out {
                Some(p) => write_vector_csv(&p, &g)?,
                None => {
                    let mut w = BufWriter::new(io::stdout().lock());
                    for x in g {
                        writeln!(w, "{x}")?;
                    }
                }
            }
        }
        Command::Estimate { space, param, m_list, a_list, seed, trials, out } => {
            let rows = estimate(&space, param, &m_list, &a_list, seed, trials)?;
            match out {
                Some(p) => write_report_csv(BufWriter::new(File::create(&p)?), &rows)?,
                None => write_report_csv(io::stdout().lock(), &rows)?,
            }
        }
        Command::Reproduce { suite, config, levels, host, seed, trials, cap, out } => {
            let mut cfg = match config {
                Some(p) => serde_json::from_reader(File::open(&p).with_context(|| format!("reading {}", p.display()))?)?,
                None => ExperimentConfig::default(),
            };
            if let Some(s) = suite {
                cfg.suite = s.parse()?;
            }
            if levels.is_some() {
                cfg.levels = levels;
            }
            if let Some(h) = host {
                cfg.host = h;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if trials.is_some() {
                cfg.trials = trials;
            }
            if let Some(c) = cap {
                cfg.cap = c;
            }
            if out.is_some() {
                cfg.out = out;
            }
            let r = run_suite(&cfg)?;
            print_verdicts(&r);
            let path = cfg.out.clone().unwrap_or_else(|| PathBuf::from(format!("{}.csv", cfg.suite)));
            let json = emit_report(&r, &path)?;
            eprintln!("wrote {} and {}", path.display(), json.display());
            return Ok(r.passed());
        }
        Command::Check { criteria, seed } => {
            let mut all = true;
            for c in criteria {
                let Some(suite) = Suite::for_criterion(c) else {
                    bail!("no criterion {c}");
                };
                let mut cfg = ExperimentConfig::new(suite);
                cfg.seed = seed;
                let r = run_suite(&cfg)?;
                let mut ok = r.passed();
                if suite == Suite::Lorentz {
                    let mut reg = cfg.clone();
                    reg.suite = Suite::Regularity;
                    ok &= run_suite(&reg)?.passed();
                }
                for v in r.failures() {
                    println!("    {v}");
                }
                println!("criterion {c} ({suite}): {}", if ok { "PASS" } else { "FAIL" });
                all &= ok;
            }
            return Ok(all);
        }
    }
    Ok(true)
}

fn print_verdicts(r: &SuiteResult) {
    for v in &r.verdicts {
        println!("{v}");
    }
    println!(
        "suite {}: {} in {:.2}s",
        r.suite,
        if r.passed() { "PASS" } else { "FAIL" },
        r.info.elapsed_seconds
    );
}

fn witness_path(space: &Path) -> PathBuf {
    space.with_extension("witnesses.csv")
}

fn build(construction: Construction, host: &str, levels: usize, out: &Path, cap: usize) -> anyhow::Result<()> {
    let (basis, witnesses) = match construction {
        Construction::ThmA => {
            let h = parse_host(host, dyadic_pairs(levels)?.dim())?;
            let t = build_thm_a(&h, None, levels, cap)?;
            (t.basis().clone(), t.witnesses)
        }
        Construction::MainA => {
            let h = parse_host(host, dyadic_pairs(levels)?.dim())?;
            let a = build_main_a(&h, levels, cap)?;
            let w = a.qg_witnesses();
            (a.basis, w)
        }
        Construction::DemNonUcc => {
            let dim = (2..=levels).map(|n| 2 * n).sum::<usize>();
            let d = build_dem_nonucc(&parse_host(host, dim)?, levels, cap)?;
            let mut w = WitnessFamily::empty();
            for (k, (_, v)) in d.alternating_witnesses().into_iter().enumerate() {
                let set = (0..v.len()).filter(|&i| v[i] != 0.0).collect();
                w.push(Witness::structured(format!("alternating-{}", k + d.first), v, set));
            }
            (d.basis().clone(), w)
        }
        Construction::Dkk => {
            let sigma = glab::OrderedPartition::new((1..=levels).map(|n| 1usize << n).collect())?;
            if sigma.dim() > cap {
                bail!("{} coordinates exceed cap {cap}", sigma.dim());
            }
            let h = parse_host(host, sigma.dim())?;
            let base = Basis::unit(Arc::new(NormedSpace::Seq(SeqNorm::l2(levels))));
            let y = Arc::new(DkkSpace::new(base, h, sigma)?);
            let mut w = WitnessFamily::empty();
            for k in 0..levels {
                let v = y.block_indicator(k);
                let set = (0..v.len()).filter(|&i| v[i] != 0.0).collect();
                w.push(Witness::structured(format!("block-{}", k + 1), v, set));
            }
            (y.unit_basis(), w)
        }
    };
    save_basis(&basis, out)?;
    let wp = witness_path(out);
    write_witnesses_csv(&wp, &witnesses)?;
    eprintln!("wrote {} ({} vectors) and {}", out.display(), basis.dim(), wp.display());
    Ok(())
}

fn estimate(space: &Path, param: Param, m_list: &[usize], a_list: &[f64], seed: u64, trials: usize) -> anyhow::Result<Vec<EstimateReport>> {
    let b = load_basis(space)?;
    let wp = witness_path(space);
    let fam = if wp.exists() { read_witnesses_csv(&wp, b.dim())? } else { WitnessFamily::empty() };
    let opts = SearchOptions::new(trials, seed);
    let mut rows = Vec::new();
    match param {
        Param::Tqg => rows.push(tqg_constant_lower(&b, &fam, trials, seed)?),
        Param::Qg => rows.push(quasi_greedy_lower(&b, &fam)?.report),
        Param::Phi => {
            for &a in a_list {
                rows.push(phi_lower(&b, a, &fam, trials, seed)?);
            }
        }
        _ => {
            for &m in m_list {
                if m == 0 || m > b.dim() {
                    bail!("m = {m} outside 1..={}", b.dim());
                }
                match param {
                    Param::Km => {
                        let exact = if b.space().is_euclidean() { km_exact_hilbert(&b, m, None).ok() } else { None };
                        rows.push(match exact {
                            Some(r) => r,
                            None => km_lower(&b, m, &fam, &opts)?,
                        });
                        rows.push(EstimateReport::new("km-upper-order", m as f64, m as f64, BoundKind::Upper, "k_m <= C m", seed));
                    }
                    Param::Ktilde => rows.push(ktilde_lower(&b, m, &fam, &opts)?),
                    Param::Lebesgue => rows.push(lebesgue_search(&b, m, trials, seed)?),
                    _ => {
                        let d = democracy_functions(&b, m, &DemocracyMode::Exhaustive).or_else(|_| {
                            democracy_functions(&b, m, &DemocracyMode::Sampled { trials, seed, structured: Vec::new() })
                        })?;
                        let name = match param {
                            Param::Phiu => "phiu",
                            Param::Phil => "phil",
                            Param::Phius => "phius",
                            _ => "phils",
                        };
                        rows.extend(d.rows(seed).into_iter().filter(|r| r.quantity == name));
                    }
                }
            }
        }
    }
    Ok(rows)
}
