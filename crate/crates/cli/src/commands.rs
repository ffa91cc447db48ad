use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use ptm_core::experiments::{
    completeness_campaign, detection_sweep, soundness_campaign, CampaignSpec, SweepSpec,
};
use ptm_core::generators::{
    corrupt, gen_behrend, gen_query_lb, gen_random_metric, gen_random_tree, gen_random_ultra,
    gen_sample_lb, gen_twin, instance_rng, load_instance, salem_spencer, save_instance,
    CorruptionMode, GeneratedInstance, SalemSpencerSet,
};
use ptm_core::matrix::{load_matrix, load_matrix_raw, save_matrix};
use ptm_core::repair::{behrend_direct_repair, farness_bounds, optimal_edge_value};
use ptm_core::skeleton::{build_skeleton, decay_experiment, SkeletonKind};
use ptm_core::testers::{
    run_tester, sample_indices, ConstantsProfile, ProfileName, TestOptions, TesterKind,
};
use ptm_core::violations::{
    enumerate_violations_capped, greedy_edge_disjoint_pack, triangle_census, ViolationKind,
};
use ptm_core::QueryOracle;

use crate::args::*;

/// Process exit status for a completed run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success = 0,
    Reject = 1,
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let g = &cli.global;
    match &cli.command {
        Command::Gen(a) => gen(g, a),
        Command::Test(a) => test(g, a),
        Command::Oracle(a) => oracle(g, a),
        Command::Repair(a) => repair(g, a),
        Command::Diagnose(DiagnoseCommand::Skeleton(a)) => skeleton(g, a),
        Command::Diagnose(DiagnoseCommand::Decay(a)) => decay(g, a),
        Command::Experiment(a) => experiment(g, a),
    }
}

fn note(g: &GlobalArgs, msg: impl AsRef<str>) {
    if !g.quiet {
        eprintln!("{}", msg.as_ref());
    }
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn config_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".config.json");
    PathBuf::from(s)
}

fn write_config(out: &Path, config: &impl Serialize) -> Result<()> {
    write_file(
        &config_path(out),
        &(serde_json::to_string_pretty(config)? + "\n"),
    )
}

fn print_json(v: &impl Serialize) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, v)?;
    writeln!(stdout)?;
    Ok(())
}

fn parse_params(raw: &[String]) -> Result<Vec<(String, String)>> {
    raw.iter()
        .filter(|s| !s.is_empty())
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| anyhow!("parameter {kv:?} is not key=value"))
        })
        .collect()
}

fn param<T: std::str::FromStr>(params: &[(String, String)], key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    params
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| {
            v.parse::<T>()
                .map_err(|e| anyhow!("parameter {key}={v}: {e}"))
        })
        .transpose()
}

fn need<T>(v: Option<T>, flag: &str, kind: GenKind) -> Result<T> {
    v.ok_or_else(|| anyhow!("--{flag} is required for --kind {kind:?}"))
}

fn suffixed(out: &Path, suffix: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}{suffix}"),
    };
    out.with_file_name(name)
}

fn gen(g: &GlobalArgs, a: &GenArgs) -> Result<Outcome> {
    let params = parse_params(&a.params)?;
    for (k, _) in &params {
        if !["max_weight", "x_size", "mode"].contains(&k.as_str()) {
            bail!("unknown parameter {k:?}");
        }
    }
    let max_weight: u32 = param(&params, "max_weight")?.unwrap_or(20);
    let x_set = |n: usize| -> Result<SalemSpencerSet> {
        let x = salem_spencer(n);
        match param::<usize>(&params, "x_size")? {
            None => Ok(x),
            Some(k) if k <= x.len() => SalemSpencerSet::new(n, x.members[..k].to_vec())
                .ok_or_else(|| anyhow!("truncated set is invalid")),
            Some(k) => bail!("x_size={k} exceeds the generated set size {}", x.len()),
        }
    };
    let seed = g.seed;
    let mut written: Vec<(PathBuf, &GeneratedInstance)> = Vec::new();
    let twin;
    let single;
    match a.kind {
        GenKind::Twin => {
            let n = need(a.n, "n", a.kind)?;
            twin = gen_twin(n, &x_set(n)?, seed);
            written.push((suffixed(&a.out, "_good"), &twin.0));
            written.push((suffixed(&a.out, "_bad"), &twin.1));
        }
        kind => {
            single = match kind {
                GenKind::Behrend => {
                    let n = need(a.n, "n", kind)?;
                    gen_behrend(n, &x_set(n)?, seed)
                }
                GenKind::SampleLb => {
                    gen_sample_lb(need(a.n, "n", kind)?, need(a.eps, "eps", kind)?, seed)?
                }
                GenKind::QueryLb => {
                    gen_query_lb(need(a.n, "n", kind)?, need(a.eps, "eps", kind)?, seed)?
                }
                GenKind::RandomMetric => gen_random_metric(need(a.n, "n", kind)?, seed, max_weight),
                GenKind::RandomUltra => gen_random_ultra(need(a.n, "n", kind)?, seed),
                GenKind::RandomTree => gen_random_tree(need(a.n, "n", kind)?, seed, max_weight),
                GenKind::Corrupt => {
                    let input = need(a.input.as_ref(), "input", kind)?;
                    let (m, meta) = load_instance(input)?;
                    let base = match meta {
                        Some(meta) => GeneratedInstance::from_meta(m, meta),
                        None => bail!("{} has no provenance sidecar", input.display()),
                    };
                    let mode = match param::<String>(&params, "mode")?.as_deref() {
                        None | Some("uniform-rewrite") => CorruptionMode::UniformRewrite,
                        Some("ds-style") => CorruptionMode::DsStyle,
                        Some(other) => bail!("unknown corruption mode {other:?}"),
                    };
                    corrupt(&base, need(a.eps, "eps", kind)?, seed, mode)?
                }
                GenKind::Twin => unreachable!(),
            };
            written.push((a.out.clone(), &single));
        }
    }
    let mut summary = Vec::new();
    for (path, inst) in &written {
        save_instance(inst, path)?;
        note(
            g,
            format!("wrote {} (n = {})", path.display(), inst.matrix.n()),
        );
        summary.push(json!({"path": path, "meta": inst.meta()}));
    }
    if g.json {
        print_json(&summary)?;
    }
    Ok(Outcome::Success)
}

fn test(g: &GlobalArgs, a: &TestArgs) -> Result<Outcome> {
    let m = load_matrix_raw(&a.input)?;
    let tester = match a.kind {
        TesterArg::Metric => TesterKind::Metric,
        TesterArg::Ultra => TesterKind::Ultra,
        TesterArg::Tree => TesterKind::Tree,
    };
    let profile = ConstantsProfile::named(match a.profile {
        ProfileArg::Paper => ProfileName::Paper,
        ProfileArg::Desk => ProfileName::Desk,
    });
    let mut opts = TestOptions::new(a.eps, profile, g.seed);
    opts.skip_clean = a.skip_clean;
    opts.two_phase = a.two_phase;
    opts.timing = a.timing;
    let mut oracle = QueryOracle::new(&m);
    if let Some(b) = a.budget {
        oracle = oracle.with_budget(b);
    }
    let report = run_tester(tester, &mut oracle, &opts)?;
    let artifact = json!({
        "config": {
            "tester": tester,
            "input": a.input,
            "n": m.n(),
            "budget": a.budget,
            "options": opts,
        },
        "report": report,
    });
    if let Some(out) = &a.out {
        write_file(out, &(serde_json::to_string_pretty(&artifact)? + "\n"))?;
    }
    if g.json {
        print_json(&artifact)?;
    } else {
        match &report.certificate {
            Some(c) => println!("reject {}", c.to_json_line()),
            None => println!("accept"),
        }
    }
    note(
        g,
        format!(
            "{} queries, {} sampled indices",
            report.queries_used, report.samples_used
        ),
    );
    Ok(if report.rejected() {
        Outcome::Reject
    } else {
        Outcome::Success
    })
}

fn oracle(g: &GlobalArgs, a: &OracleArgs) -> Result<Outcome> {
    let m = load_matrix(&a.input)?;
    let kind = match a.kind {
        OracleKind::Triangles | OracleKind::Census | OracleKind::Pack => ViolationKind::Triangle,
        OracleKind::UltraTriples => ViolationKind::UltraTriple,
        OracleKind::TreeQuadruples => ViolationKind::TreeQuadruple,
    };
    let cap = a.cap.unwrap_or(kind.default_cap());
    let config = json!({"kind": a.kind, "input": a.input, "cap": cap, "n": m.n()});
    let body = match a.kind {
        OracleKind::Census => {
            if m.n() > cap {
                bail!("n = {} exceeds the enumeration cap of {cap}", m.n());
            }
            let c = triangle_census(&m)?;
            let pairs: Vec<Value> = c
                .pair_degree
                .iter()
                .map(|(&(i, j), &d)| json!([i, j, d]))
                .collect();
            let v =
                json!({"total": c.total, "vertex_degree": c.vertex_degree, "pair_degree": pairs});
            serde_json::to_string_pretty(&v)? + "\n"
        }
        _ => {
            let vs = if matches!(a.kind, OracleKind::Pack) {
                if m.n() > cap {
                    bail!("n = {} exceeds the enumeration cap of {cap}", m.n());
                }
                greedy_edge_disjoint_pack(&m)?
            } else {
                enumerate_violations_capped(&m, kind, cap)?
            };
            note(g, format!("{} violations", vs.len()));
            if a.count {
                format!("{}\n", vs.len())
            } else if g.json {
                serde_json::to_string_pretty(&json!({"count": vs.len(), "violations": vs}))? + "\n"
            } else {
                vs.iter().map(|v| v.to_json_line() + "\n").collect()
            }
        }
    };
    match &a.out {
        Some(out) => {
            write_file(out, &body)?;
            write_config(out, &config)?;
        }
        None => print!("{body}"),
    }
    Ok(Outcome::Success)
}

fn repair(g: &GlobalArgs, a: &RepairArgs) -> Result<Outcome> {
    match a.kind {
        RepairKind::Bounds => {
            let m = load_matrix(&a.input)?;
            let b = farness_bounds(&m)?;
            let mut v = serde_json::to_value(&b)?;
            if let (Some(out), Some(cert)) = (&a.out, &b.upper_certificate) {
                save_matrix(cert, out)?;
                v["upper_certificate"] = json!(out);
            }
            if let Some(out) = &a.lower_out {
                let lines: String = b
                    .lower_certificate
                    .iter()
                    .map(|t| t.to_json_line() + "\n")
                    .collect();
                write_file(out, &lines)?;
                v["lower_certificate"] = json!(out);
            }
            print_json(&v)?;
        }
        RepairKind::Behrend => {
            let (m, meta) = load_instance(&a.input)?;
            let meta =
                meta.ok_or_else(|| anyhow!("{} has no provenance sidecar", a.input.display()))?;
            let inst = GeneratedInstance::from_meta(m, meta);
            let fixed = behrend_direct_repair(&inst)?;
            let changed = fixed.changed_entries(&inst.matrix);
            let out = a
                .out
                .as_ref()
                .ok_or_else(|| anyhow!("--out is required for --kind behrend"))?;
            save_matrix(&fixed, out)?;
            let v = json!({"changed_entries": changed, "out": out});
            if g.json {
                print_json(&v)?;
            } else {
                note(
                    g,
                    format!("wrote {} ({changed} entries changed)", out.display()),
                );
            }
        }
        RepairKind::Edge => {
            let m = load_matrix(&a.input)?;
            let (i, j) = match (a.i, a.j) {
                (Some(i), Some(j)) => (i, j),
                _ => bail!("--i and --j are required for --kind edge"),
            };
            let stab = optimal_edge_value(&m, i, j)?;
            if let Some(out) = &a.out {
                let mut fixed = m.clone();
                fixed.set_sym(i, j, stab.value);
                save_matrix(&fixed, out)?;
            }
            print_json(
                &json!({"i": i, "j": j, "value": stab.value, "hit_count": stab.hit_count, "intervals": stab.intervals.len()}),
            )?;
        }
    }
    Ok(Outcome::Success)
}

fn skeleton_kind(k: SkeletonArg) -> SkeletonKind {
    match k {
        SkeletonArg::Ultra => SkeletonKind::Ultra,
        SkeletonArg::Tree => SkeletonKind::Tree,
    }
}

fn skeleton(g: &GlobalArgs, a: &SkeletonArgs) -> Result<Outcome> {
    let m = load_matrix(&a.input)?;
    let s = sample_indices(m.n(), a.samples, &mut instance_rng(g.seed));
    let st = build_skeleton(&m, &s, skeleton_kind(a.kind), a.eps);
    let v = json!({
        "config": {"input": a.input, "kind": a.kind, "samples": a.samples, "eps": a.eps, "seed": g.seed},
        "state": st,
    });
    if let Some(out) = &a.out {
        write_file(out, &(serde_json::to_string_pretty(&v)? + "\n"))?;
    }
    if g.json {
        print_json(&v)?;
    } else {
        println!(
            "consistent={} parts={} sc={} ec={} active_entries={}",
            st.consistent,
            st.parts.len(),
            st.sc_count,
            st.ec_count,
            st.active_entries
        );
    }
    Ok(Outcome::Success)
}

fn decay(g: &GlobalArgs, a: &DecayArgs) -> Result<Outcome> {
    let (m, meta) = load_instance(&a.input)?;
    let certified = meta.as_ref().is_some_and(|meta| {
        let inst = GeneratedInstance::from_meta(m.clone(), meta.clone());
        let far = |e: f64| e >= a.eps;
        inst.params
            .get("eps")
            .and_then(Value::as_f64)
            .is_some_and(far)
            || inst
                .params
                .get("certified_eps")
                .and_then(Value::as_f64)
                .is_some_and(far)
    });
    if !certified {
        eprintln!(
            "warning: {} is not certified {}-far; the decay bound need not hold",
            a.input.display(),
            a.eps
        );
    }
    let table = decay_experiment(&m, skeleton_kind(a.kind), a.eps, a.steps, a.trials, g.seed);
    write_file(&a.csv, &table.to_csv())?;
    write_config(
        &a.csv,
        &json!({"input": a.input, "kind": a.kind, "eps": a.eps, "steps": a.steps, "trials": a.trials, "seed": g.seed, "certified_far": certified}),
    )?;
    if g.json {
        print_json(&table.rows)?;
    }
    note(g, format!("wrote {}", a.csv.display()));
    Ok(Outcome::Success)
}

fn experiment(g: &GlobalArgs, a: &ExperimentArgs) -> Result<Outcome> {
    let text =
        fs::read_to_string(&a.spec).with_context(|| format!("reading {}", a.spec.display()))?;
    match a.mode {
        ExperimentKind::Sweep => {
            let spec: SweepSpec = serde_json::from_str(&text).context("parsing sweep spec")?;
            let table = detection_sweep(&spec)?;
            write_file(&a.out, &table.to_csv()?)?;
            write_config(&a.out, &spec)?;
            if g.json {
                print_json(&table.rows)?;
            }
        }
        ExperimentKind::Soundness | ExperimentKind::Completeness => {
            let spec: CampaignSpec =
                serde_json::from_str(&text).context("parsing campaign spec")?;
            let report = if matches!(a.mode, ExperimentKind::Soundness) {
                soundness_campaign(&spec)?
            } else {
                completeness_campaign(&spec)?
            };
            if !report.skipped.is_empty() {
                note(
                    g,
                    format!(
                        "skipped {} uncertified instances: {:?}",
                        report.skipped.len(),
                        report.skipped
                    ),
                );
            }
            write_file(&a.out, &report.to_csv()?)?;
            write_config(
                &a.out,
                &json!({"spec": spec, "profile": ConstantsProfile::named(spec.profile)}),
            )?;
            if g.json {
                print_json(&report)?;
            } else {
                note(
                    g,
                    format!(
                        "{}: rate {:.3} [{:.3}, {:.3}] over {} trials",
                        if report.pass { "PASS" } else { "FAIL" },
                        report.estimate.rate,
                        report.estimate.ci_low,
                        report.estimate.ci_high,
                        report.evaluated
                    ),
                );
            }
        }
    }
    note(g, format!("wrote {}", a.out.display()));
    Ok(Outcome::Success)
}
