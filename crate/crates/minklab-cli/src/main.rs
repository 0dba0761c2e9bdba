//! `minklab` — reproducible geometry-of-numbers experiments.
//!
//! Every command prints a self-describing JSON report embedding the full
//! semantic configuration (seed included, worker count excluded) and a
//! content hash of its inputs, so a report can be reproduced from itself.
//! Exit codes: 0 success, 2 validation error, 3 budget/feasibility error.

use clap::{Parser, Subcommand, ValueEnum};
use minklab::distribution::{self, DEFAULT_FIT_WINDOW};
use minklab::error::Error;
use minklab::flows::{self, deep, FlowSpec};
use minklab::haar::{self, HaarSampler};
use minklab::lattice::{read_basis_json, LatticeBasis};
use minklab::minima;
use minklab::parallel::ExecMode;
use minklab::reduction;
use minklab::siegel;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(name = "minklab", version, about = "geometry-of-numbers experiments")]
struct Cli {
    /// RNG seed recorded in every report.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads for ensemble blocks (0 = all cores). Results are
    /// byte-identical for any value.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    /// Write the report (or ensemble / CSV) to this path as well as stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SamplerArg {
    Exact2,
    Siegel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ReduceMethod {
    Minkowski,
    Quasi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FlowKind {
    Diagonal,
    Unipotent,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Volume constants: Vol(K), Vol(X) = zeta(2)...zeta(d), and c_{d,k}.
    Constants {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        k: usize,
    },
    /// Successive minima and attaining vectors of a basis file.
    Minima {
        #[arg(long)]
        basis: PathBuf,
        /// Also run the exhaustive coefficient-box oracle.
        #[arg(long)]
        oracle: bool,
        /// Coefficient bound for the oracle box.
        #[arg(long, default_value_t = 4)]
        bound: i64,
    },
    /// Reduced basis (Minkowski greedy or quasi-minimal recursion).
    Reduce {
        #[arg(long)]
        basis: PathBuf,
        #[arg(long, value_enum)]
        method: ReduceMethod,
    },
    /// Dual basis (inverse transpose).
    Dual {
        #[arg(long)]
        basis: PathBuf,
    },
    /// Draw a reproducible Haar ensemble and write it as JSON lines.
    Sample {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        count: usize,
        #[arg(long, value_enum, default_value_t = SamplerArg::Siegel)]
        sampler: SamplerArg,
    },
    /// Monte-Carlo check of the primitive-tuple mean-value identity.
    SiegelCheck {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        radius: f64,
        #[arg(long)]
        count: usize,
        #[arg(long, value_enum)]
        sampler: Option<SamplerArg>,
    },
    /// Weighted empirical CDF of lambda_i with a log-log exponent fit.
    EstimatePhi {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        i: usize,
        /// Comma-separated grid of deltas in (0, 0.5].
        #[arg(long, value_delimiter = ',')]
        deltas: Vec<f64>,
        #[arg(long)]
        count: usize,
        #[arg(long, value_enum)]
        sampler: Option<SamplerArg>,
        /// Fit window lo,hi (defaults to 0.05,0.3).
        #[arg(long, value_delimiter = ',', num_args = 2)]
        window: Option<Vec<f64>>,
        /// Also emit grid rows as CSV (to --out if given).
        #[arg(long)]
        csv: bool,
    },
    /// Weighted tail P(lambda_i >= 1/delta) with the dual-route cross-check.
    EstimateTail {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        i: usize,
        #[arg(long, value_delimiter = ',')]
        deltas: Vec<f64>,
        #[arg(long)]
        count: usize,
        #[arg(long, value_delimiter = ',', num_args = 2)]
        window: Option<Vec<f64>>,
    },
    /// Height traces along a flow for seeded Haar lattices (CSV: seed, t,
    /// delta_i, running_ratio).
    FlowLaw {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 1)]
        i: usize,
        #[arg(long, value_enum, default_value_t = FlowKind::Diagonal)]
        kind: FlowKind,
        /// Diagonal generator entries, e.g. 1,-1.
        #[arg(long, value_delimiter = ',')]
        z: Option<Vec<f64>>,
        #[arg(long)]
        tmax: f64,
        #[arg(long, default_value_t = 50)]
        seeds: u64,
        #[arg(long, default_value_t = 30.0)]
        tmin: f64,
    },
    /// First discrete times the diagonal orbit enters shrinking targets
    /// lambda_1 <= e^{-t}, with the log m ~ t regression slope.
    HitTime {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Target levels t (lambda_1 <= e^{-t}), comma separated.
        #[arg(long, value_delimiter = ',')]
        levels: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        seeds: u64,
        #[arg(long, default_value_t = 5000)]
        mmax: u64,
    },
}

fn enumeration_budget() -> usize {
    std::env::var("MINKLAB_BUDGET")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(siegel::DEFAULT_ENUM_BUDGET)
}

fn hash_bytes(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

fn hash_file(path: &PathBuf) -> Result<String, Error> {
    Ok(hash_bytes(&std::fs::read(path)?))
}

fn sampler_for(dim: usize, arg: Option<SamplerArg>) -> Result<HaarSampler, Error> {
    let chosen = arg.unwrap_or(if dim == 2 {
        SamplerArg::Exact2
    } else {
        SamplerArg::Siegel
    });
    match chosen {
        SamplerArg::Exact2 => {
            if dim != 2 {
                return Err(Error::InvalidRange(
                    "the exact sampler only exists at dimension 2".into(),
                ));
            }
            Ok(HaarSampler::exact_d2())
        }
        SamplerArg::Siegel => HaarSampler::siegel(dim),
    }
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::EnumerationBudgetExceeded { .. }
        | Error::DimensionTooLarge { .. }
        | Error::InsufficientMass { .. } => 3,
        _ => 2,
    }
}

fn emit(report: &serde_json::Value, out: &Option<PathBuf>) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(report)?;
    println!("{text}");
    if let Some(path) = out {
        std::fs::write(path, text + "\n")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ConfigEcho {
    command: String,
    seed: u64,
    params: serde_json::Value,
}

fn report(command: &str, seed: u64, params: serde_json::Value, input_hash: String, result: serde_json::Value) -> serde_json::Value {
    json!({
        "config": ConfigEcho { command: command.into(), seed, params },
        "input_hash": input_hash,
        "result": result,
    })
}

fn run(cli: Cli) -> Result<(), Error> {
    let seed = cli.seed;
    match cli.command {
        Command::Constants { dim, k } => {
            let v = haar::volume_constants(dim, k)?;
            let params = json!({"dim": dim, "k": k});
            let hash = hash_bytes(params.to_string().as_bytes());
            emit(
                &report("constants", seed, params, hash, serde_json::to_value(v)?),
                &cli.out,
            )
        }
        Command::Minima { basis, oracle, bound } => {
            let hash = hash_file(&basis)?;
            let b = read_basis_json(&basis)?;
            let profile = minima::successive_minima(&b)?;
            let mut result = json!({
                "values": profile.values,
                "attaining": profile.attaining.iter().map(|v| v.coeffs.clone()).collect::<Vec<_>>(),
            });
            if oracle {
                let brute = minima::brute_force_minima(&b, bound)?;
                result["oracle_values"] = serde_json::to_value(&brute.values)?;
            }
            let params = json!({"basis": basis, "oracle": oracle, "bound": bound});
            emit(&report("minima", seed, params, hash, result), &cli.out)
        }
        Command::Reduce { basis, method } => {
            let hash = hash_file(&basis)?;
            let b = read_basis_json(&basis)?;
            let result = match method {
                ReduceMethod::Minkowski => {
                    let red = reduction::minkowski_reduce(&b)?;
                    json!({
                        "basis": serde_json::to_value(&red)?,
                        "norms": reduction::column_norms(&red),
                    })
                }
                ReduceMethod::Quasi => {
                    let q = reduction::quasi_minimal_basis(&b)?;
                    let cols: Vec<Vec<f64>> =
                        q.vectors.iter().map(|v| v.embedding.clone()).collect();
                    json!({
                        "basis": serde_json::to_value(&LatticeBasis::new(cols)?)?,
                        "ratios": q.ratios,
                        "envelope": reduction::quasi_minimal_envelope(b.dim()),
                    })
                }
            };
            let params = json!({"basis": basis, "method": format!("{method:?}").to_lowercase()});
            emit(&report("reduce", seed, params, hash, result), &cli.out)
        }
        Command::Dual { basis } => {
            let hash = hash_file(&basis)?;
            let b = read_basis_json(&basis)?;
            let dual = b.dual()?;
            let params = json!({"basis": basis});
            let result = json!({
                "basis": serde_json::to_value(&dual)?,
                "covolume": dual.covolume(),
            });
            emit(&report("dual", seed, params, hash, result), &cli.out)
        }
        Command::Sample { dim, count, sampler } => {
            let s = sampler_for(dim, Some(sampler))?;
            let ensemble = s.ensemble(count, seed)?;
            let out = cli
                .out
                .clone()
                .ok_or_else(|| Error::InvalidRange("sample requires --out".into()))?;
            haar::write_ensemble_jsonl(&out, &ensemble)?;
            let params = json!({
                "dim": dim, "count": count,
                "sampler": format!("{sampler:?}").to_lowercase(),
            });
            let hash = hash_bytes(params.to_string().as_bytes());
            let summary = json!({
                "written": out,
                "weight_kind": ensemble.weight_kind,
                "truncation": ensemble.truncation,
            });
            let rep = report("sample", seed, params, hash, summary);
            println!("{}", serde_json::to_string_pretty(&rep)?);
            Ok(())
        }
        Command::SiegelCheck { dim, k, radius, count, sampler } => {
            let s = sampler_for(dim, sampler)?;
            let rep = siegel::siegel_mc_check(
                &s,
                k,
                radius,
                count,
                seed,
                enumeration_budget(),
                ExecMode::Auto,
            )?;
            let params = json!({
                "dim": dim, "k": k, "radius": radius, "count": count,
                "sampler": rep.sampler,
            });
            let hash = hash_bytes(params.to_string().as_bytes());
            emit(
                &report("siegel-check", seed, params, hash, serde_json::to_value(&rep)?),
                &cli.out,
            )
        }
        Command::EstimatePhi { dim, i, deltas, count, sampler, window, csv } => {
            let s = sampler_for(dim, sampler)?;
            let win = parse_window(&window)?;
            let rep = distribution::estimate_phi(&s, i, &deltas, count, seed, win, ExecMode::Auto)?;
            let params = json!({
                "dim": dim, "i": i, "deltas": deltas, "count": count,
                "window": [win.0, win.1],
            });
            let hash = hash_bytes(params.to_string().as_bytes());
            if csv {
                let mut text = String::from("delta,estimate,stderr,n_eff,used_in_fit\n");
                for g in &rep.grid {
                    text += &format!(
                        "{},{},{},{},{}\n",
                        g.x, g.estimate, g.stderr, g.n_eff, g.used_in_fit
                    );
                }
                print!("{text}");
                if let Some(path) = &cli.out {
                    std::fs::write(path, text)?;
                }
                return Ok(());
            }
            emit(
                &report("estimate-phi", seed, params, hash, serde_json::to_value(&rep)?),
                &cli.out,
            )
        }
        Command::EstimateTail { dim, i, deltas, count, window } => {
            let s = sampler_for(dim, None)?;
            let win = parse_window(&window)?;
            let rep = distribution::estimate_tail(&s, i, &deltas, count, seed, win, ExecMode::Auto)?;
            let params = json!({
                "dim": dim, "i": i, "deltas": deltas, "count": count,
                "window": [win.0, win.1],
            });
            let hash = hash_bytes(params.to_string().as_bytes());
            emit(
                &report("estimate-tail", seed, params, hash, serde_json::to_value(&rep)?),
                &cli.out,
            )
        }
        Command::FlowLaw { dim, i, kind, z, tmax, seeds, tmin } => {
            let params = json!({
                "dim": dim, "i": i, "kind": format!("{kind:?}").to_lowercase(),
                "z": z, "tmax": tmax, "seeds": seeds, "tmin": tmin,
            });
            let hash = hash_bytes(params.to_string().as_bytes());
            let (csv, summary) = flow_law(dim, i, kind, z, tmax, seeds, tmin, seed)?;
            if let Some(path) = &cli.out {
                std::fs::write(path, &csv)?;
            }
            emit(&report("flow-law", seed, params, hash, summary), &None)
        }
        Command::HitTime { dim, levels, seeds, mmax } => {
            if dim != 2 {
                return Err(Error::DimensionTooLarge {
                    dim,
                    max: 2,
                    op: "hit-time (exact orbit engine)",
                });
            }
            if levels.is_empty() {
                return Err(Error::InvalidRange("need at least one level".into()));
            }
            let rep = deep::hitting_experiment(seed, seeds, &levels, mmax, ExecMode::Auto)?;
            let params = json!({
                "dim": dim, "levels": levels, "seeds": seeds, "mmax": mmax,
            });
            let hash = hash_bytes(params.to_string().as_bytes());
            emit(
                &report("hit-time", seed, params, hash, serde_json::to_value(&rep)?),
                &cli.out,
            )
        }
    }
}

fn parse_window(window: &Option<Vec<f64>>) -> Result<(f64, f64), Error> {
    match window {
        None => Ok(DEFAULT_FIT_WINDOW),
        Some(v) if v.len() == 2 && v[0] < v[1] => Ok((v[0], v[1])),
        _ => Err(Error::InvalidRange("--window needs lo,hi with lo < hi".into())),
    }
}

#[allow(clippy::too_many_arguments)]
fn flow_law(
    dim: usize,
    i: usize,
    kind: FlowKind,
    z: Option<Vec<f64>>,
    tmax: f64,
    seeds: u64,
    tmin: f64,
    seed: u64,
) -> Result<(String, serde_json::Value), Error> {
    if !(tmin > 1.0 && tmax > tmin && tmax <= 1e5) {
        return Err(Error::InvalidRange(
            "need 1 < tmin < tmax <= 1e5".into(),
        ));
    }
    let mut csv = String::from("seed,t,delta_i,running_ratio\n");
    let mut finals = Vec::new();
    match kind {
        FlowKind::Diagonal => {
            if dim != 2 || i != 1 {
                return Err(Error::DimensionTooLarge {
                    dim,
                    max: 2,
                    op: "flow-law diagonal (exact orbit engine, i = 1)",
                });
            }
            let z = z.unwrap_or_else(|| vec![1.0, -1.0]);
            if z.len() != dim {
                return Err(Error::InvalidRange(format!(
                    "generator has {} entries for dimension {dim}",
                    z.len()
                )));
            }
            let spec = FlowSpec::diagonal(z.clone())?;
            let rate = match spec {
                FlowSpec::Diagonal { ref z } => z[0].abs(),
                _ => unreachable!(),
            };
            let cfg = deep::TraceConfig {
                t_min: tmin,
                t_max: tmax,
                step: 1.05,
                bits: deep::depth_bits(tmax * rate),
                rate,
            };
            let outcomes = deep::trace_experiment(seed, seeds, &cfg, ExecMode::Auto);
            for o in &outcomes {
                for ((t, d), r) in o
                    .trace
                    .times
                    .iter()
                    .zip(&o.trace.delta_values)
                    .zip(&o.trace.running_ratio)
                {
                    csv += &format!("{},{},{},{}\n", o.seed_index, t, d, r);
                }
                finals.push(o.final_ratio);
            }
        }
        FlowKind::Unipotent => {
            // polynomial coefficient growth keeps the f64 path exact here
            if dim != 2 {
                return Err(Error::DimensionTooLarge {
                    dim,
                    max: 2,
                    op: "flow-law unipotent",
                });
            }
            let n = minklab::mat::Mat::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
            let spec = FlowSpec::unipotent(n)?;
            let points = ((tmax / flows::TRACE_T_MIN_DEFAULT).ln() / 1.05f64.ln()).ceil() as usize + 1;
            let sampler = HaarSampler::exact_d2();
            for s in 0..seeds {
                let mut rng = minklab::parallel::block_rng(seed, s);
                let (basis, _) = sampler.sample_one(&mut rng)?;
                let trace = flows::log_law_trace(&spec, &basis, i, tmax, points)?;
                for ((t, d), r) in trace
                    .times
                    .iter()
                    .zip(&trace.delta_values)
                    .zip(&trace.running_ratio)
                {
                    csv += &format!("{s},{t},{d},{r}\n");
                }
                finals.push(trace.final_ratio());
            }
        }
    }
    let in_band = finals.iter().filter(|r| **r >= 0.25 && **r <= 0.75).count();
    let summary = json!({
        "final_ratios": finals,
        "in_band_fraction": in_band as f64 / finals.len().max(1) as f64,
        "band": [0.25, 0.75],
    });
    Ok((csv, summary))
}

fn main() {
    let cli = Cli::parse();
    #[cfg(feature = "parallel")]
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .ok();
    }
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(exit_code_for(&err));
    }
}
