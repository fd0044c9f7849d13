//! Command-line interface: generate family members, check their recursive
//! structure, build and verify tree packings, and run the exact oracle.
//!
//! Output is line-oriented `key=value` with a `--json` alternative. Exit
//! codes: 0 success, 1 property violated, 2 input error, 3 structural
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use genconn::families::{
    self, check_common_outside_neighbors, check_definition1, FamilyInstance,
};
use genconn::graph::{Graph, VertexSet};
use genconn::menger;
use genconn::oracle::{self, Kappa3Mode};
use genconn::packing::{self, Certificate, TreePacking};
use genconn::Error;

const GEN_CAP: usize = 5000;
const ORACLE_CAP: usize = 40;

#[derive(Parser)]
#[command(name = "genconn", about = "Tree connectivity toolkit for recursive graph families", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a family member and write its edge list and label dump
    Gen {
        /// Family spec: ag:<n>, qk:<n>:<k>, ss:<n>, bs:<n>
        spec: String,
        /// Output path for the edge list (default <spec>.edges)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Output path for the label dump (default <spec>.labels)
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Override the generation size cap
        #[arg(long, default_value_t = GEN_CAP)]
        max_vertices: usize,
        #[arg(long)]
        json: bool,
    },
    /// Check the recursive-structure conditions of a family member
    Check {
        spec: String,
        #[arg(long)]
        json: bool,
    },
    /// Build and verify a tree packing for three vertices
    Trees {
        spec: String,
        /// Three vertex labels (see the label dump format)
        labels: Vec<String>,
        /// Certificate output path
        #[arg(long, default_value = "certificate.json")]
        out: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Re-verify a certificate against a graph
    Verify {
        /// Graph: family spec or edge-list file
        graph: String,
        /// Certificate file produced by `trees`
        certificate: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Build packings for every (or sampled) vertex triple
    Sweep {
        spec: String,
        #[command(flatten)]
        mode: SweepMode,
        /// Worker threads (default: rayon's choice)
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        json: bool,
    },
    /// Exact (or sampled upper bound) generalized 3-connectivity
    Kappa3 {
        /// Family spec or edge-list file path
        input: String,
        #[command(flatten)]
        mode: OracleMode,
        /// Override the exhaustive-oracle size cap
        #[arg(long, default_value_t = ORACLE_CAP)]
        max_vertices: usize,
        #[arg(long)]
        json: bool,
    },
    /// Vertex connectivity
    Kappa {
        /// Family spec or edge-list file path
        input: String,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct SweepModeGroup {}

#[derive(Args)]
struct SweepMode {
    /// Sweep every triple
    #[arg(long, conflicts_with_all = ["sample", "seed"])]
    all: bool,
    /// Sample this many triples (requires --seed)
    #[arg(long, requires = "seed")]
    sample: Option<usize>,
    /// RNG seed for sampling
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct OracleMode {
    /// Exhaustive over all triples
    #[arg(long, conflicts_with_all = ["sample", "seed"])]
    exhaustive: bool,
    /// Sampled upper bound over this many triples (requires --seed)
    #[arg(long, requires = "seed")]
    sample: Option<usize>,
    /// RNG seed for sampling
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Input { .. } => 2,
                Error::Resource { .. } => 2,
                Error::Structural { .. } => 3,
            };
            ExitCode::from(code)
        }
    }
}

struct Report {
    lines: Vec<(String, String)>,
    json: bool,
}

impl Report {
    fn new(json: bool) -> Self {
        Report {
            lines: Vec::new(),
            json,
        }
    }

    fn put(&mut self, key: &str, value: impl ToString) {
        self.lines.push((key.to_string(), value.to_string()));
    }

    fn emit(&self) {
        if self.json {
            let mut map = serde_json::Map::new();
            for (k, v) in &self.lines {
                let val = v
                    .parse::<i64>()
                    .map(Value::from)
                    .or_else(|_| v.parse::<bool>().map(Value::from))
                    .unwrap_or_else(|_| Value::from(v.clone()));
                map.insert(k.clone(), val);
            }
            println!("{}", serde_json::to_string(&Value::Object(map)).unwrap());
        } else {
            for (k, v) in &self.lines {
                println!("{k}={v}");
            }
        }
    }
}

fn parse_spec(s: &str) -> Result<FamilyInstance, Error> {
    let parts: Vec<&str> = s.split(':').collect();
    let parse_num = |p: &str| -> Result<usize, Error> {
        p.parse()
            .map_err(|_| Error::input(format!("bad number {p:?} in family spec {s:?}")))
    };
    match parts.as_slice() {
        ["ag", n] => families::gen_alternating_group_graph(parse_num(n)?),
        ["ss", n] => families::gen_split_star(parse_num(n)?),
        ["bs", n] => families::gen_bubble_sort_star(parse_num(n)?),
        ["qk", n, k] => families::gen_kary_ncube(parse_num(n)?, parse_num(k)?),
        _ => Err(Error::input(format!(
            "unrecognized family spec {s:?}; expected ag:<n>, qk:<n>:<k>, ss:<n> or bs:<n>"
        ))),
    }
}

/// Vertex count the spec would produce, without building it.
fn expected_size(s: &str) -> Result<usize, Error> {
    let parts: Vec<&str> = s.split(':').collect();
    let parse_num = |p: &str| -> Result<usize, Error> {
        p.parse()
            .map_err(|_| Error::input(format!("bad number {p:?} in family spec {s:?}")))
    };
    let fact = |n: usize| -> Option<usize> {
        (1..=n).try_fold(1usize, |a, b| a.checked_mul(b))
    };
    let big = Err(Error::resource(format!("family spec {s:?} is too large")));
    match parts.as_slice() {
        ["ag", n] => match fact(parse_num(*n)?) {
            Some(f) => Ok(f / 2),
            None => big,
        },
        ["ss", n] | ["bs", n] => match fact(parse_num(*n)?) {
            Some(f) => Ok(f),
            None => big,
        },
        ["qk", n, k] => {
            let (n, k) = (parse_num(n)?, parse_num(k)?);
            match k.checked_pow(n.min(u32::MAX as usize) as u32) {
                Some(v) => Ok(v),
                None => big,
            }
        }
        _ => Err(Error::input(format!("unrecognized family spec {s:?}"))),
    }
}

fn load_graph(input: &str) -> Result<(Graph, Option<FamilyInstance>), Error> {
    if std::path::Path::new(input).exists() {
        let text = std::fs::read_to_string(input)
            .map_err(|e| Error::input(format!("cannot read {input}: {e}")))?;
        Ok((Graph::from_edge_list_text(&text)?, None))
    } else {
        let inst = parse_spec(input)?;
        Ok((inst.graph.clone(), Some(inst)))
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Gen {
            spec,
            out,
            labels,
            max_vertices,
            json,
        } => cmd_gen(&spec, out, labels, max_vertices, json),
        Command::Check { spec, json } => cmd_check(&spec, json),
        Command::Trees {
            spec,
            labels,
            out,
            json,
        } => cmd_trees(&spec, &labels, &out, json),
        Command::Verify {
            graph,
            certificate,
            json,
        } => cmd_verify(&graph, &certificate, json),
        Command::Sweep {
            spec,
            mode,
            jobs,
            json,
        } => cmd_sweep(&spec, mode, jobs, json),
        Command::Kappa3 {
            input,
            mode,
            max_vertices,
            json,
        } => cmd_kappa3(&input, mode, max_vertices, json),
        Command::Kappa { input, json } => cmd_kappa(&input, json),
    }
}

fn cmd_gen(
    spec: &str,
    out: Option<PathBuf>,
    labels: Option<PathBuf>,
    max_vertices: usize,
    json: bool,
) -> Result<u8, Error> {
    let size = expected_size(spec)?;
    if size > max_vertices {
        return Err(Error::resource(format!(
            "{spec} has {size} vertices, above the cap {max_vertices} (raise with --max-vertices)"
        )));
    }
    let inst = parse_spec(spec)?;
    let stem = spec.replace(':', "_");
    let out = out.unwrap_or_else(|| PathBuf::from(format!("{stem}.edges")));
    let labels_path = labels.unwrap_or_else(|| PathBuf::from(format!("{stem}.labels")));
    std::fs::write(&out, inst.graph.to_edge_list_text())
        .map_err(|e| Error::input(format!("cannot write {}: {e}", out.display())))?;
    let mut rep = Report::new(json);
    rep.put("family", spec);
    rep.put("vertices", inst.graph.vertex_count());
    rep.put("edges", inst.graph.edge_count());
    let stats = inst.graph.degree_stats();
    rep.put("regular", stats.regular);
    rep.put("degree", stats.max);
    rep.put("edge_list", out.display());
    match inst.label_dump() {
        Ok(dump) => {
            std::fs::write(&labels_path, dump)
                .map_err(|e| Error::input(format!("cannot write {}: {e}", labels_path.display())))?;
            rep.put("label_dump", labels_path.display());
        }
        Err(e) => rep.put("label_dump_skipped", e),
    }
    rep.emit();
    Ok(0)
}

fn cmd_check(spec: &str, json: bool) -> Result<u8, Error> {
    let size = expected_size(spec)?;
    if size > GEN_CAP {
        return Err(Error::resource(format!(
            "{spec} has {size} vertices, above the cap {GEN_CAP}"
        )));
    }
    let inst = parse_spec(spec)?;
    let mut rep = Report::new(json);
    rep.put("family", spec);
    let def = check_definition1(&inst);
    for c in &def.conditions {
        rep.put(&format!("condition_{}", c.id), c.pass);
        if !c.info.is_empty() {
            rep.put(&format!("condition_{}_info", c.id), &c.info);
        }
        if let Some(w) = &c.witness {
            rep.put(&format!("condition_{}_witness", c.id), w);
        }
    }
    let common = check_common_outside_neighbors(&inst);
    let mut common_ok = true;
    for c in &common.conditions {
        rep.put(&format!("common_{}", c.id), c.pass);
        if let Some(w) = &c.witness {
            rep.put(&format!("common_{}_witness", c.id), w);
        }
        common_ok &= c.pass;
    }
    rep.put("common_outside_ok", common_ok);
    rep.emit();
    Ok(if common_ok { 0 } else { 1 })
}

fn parse_terminals(inst: &FamilyInstance, labels: &[String]) -> Result<VertexSet, Error> {
    if labels.len() != 3 {
        return Err(Error::input(format!(
            "expected three vertex labels, got {}",
            labels.len()
        )));
    }
    let ids: Vec<usize> = labels
        .iter()
        .map(|l| inst.parse_label(l))
        .collect::<Result<_, _>>()?;
    let s = VertexSet::new(ids);
    if s.len() != 3 {
        return Err(Error::input("the three labels must name distinct vertices"));
    }
    Ok(s)
}

fn cmd_trees(spec: &str, labels: &[String], out: &PathBuf, json: bool) -> Result<u8, Error> {
    let size = expected_size(spec)?;
    if size > GEN_CAP {
        return Err(Error::resource(format!(
            "{spec} has {size} vertices, above the cap {GEN_CAP}"
        )));
    }
    let inst = parse_spec(spec)?;
    let s = parse_terminals(&inst, labels)?;
    let packing = packing::build_tree_packing(&inst, &s)?;
    let cert = packing::certificate(&inst, &packing);
    let text = serde_json::to_string_pretty(&cert)
        .map_err(|e| Error::structural(format!("certificate serialization failed: {e}")))?;
    std::fs::write(out, text + "\n")
        .map_err(|e| Error::input(format!("cannot write {}: {e}", out.display())))?;
    let mut rep = Report::new(json);
    rep.put("family", spec);
    rep.put("trees", packing.trees.len());
    rep.put("target", inst.target_trees());
    rep.put("verified", cert.verified);
    rep.put("certificate", out.display());
    for (i, t) in packing.trace.iter().enumerate() {
        rep.put(&format!("tree_{i}_rule"), &t.rule);
    }
    rep.emit();
    Ok(if cert.verified { 0 } else { 1 })
}

fn cmd_verify(graph: &str, certificate: &PathBuf, json: bool) -> Result<u8, Error> {
    let (g, _) = load_graph(graph)?;
    let text = std::fs::read_to_string(certificate)
        .map_err(|e| Error::input(format!("cannot read {}: {e}", certificate.display())))?;
    let cert: Certificate = serde_json::from_str(&text)
        .map_err(|e| Error::input(format!("bad certificate: {e}")))?;
    if cert.s.ids.len() != 3 {
        return Err(Error::input("certificate does not name three terminals"));
    }
    let p = TreePacking {
        s: [cert.s.ids[0], cert.s.ids[1], cert.s.ids[2]],
        trees: cert.trees.clone(),
        trace: cert.trace.clone(),
    };
    let check = packing::verify_packing(&g, &p);
    let verified = check.is_ok();
    let mut rep = Report::new(json);
    rep.put("trees", p.trees.len());
    rep.put("verified", verified);
    rep.put("matches_certificate", verified == cert.verified);
    if let Err(e) = &check {
        rep.put("violation", e);
    }
    rep.emit();
    Ok(if verified { 0 } else { 1 })
}

fn cmd_sweep(spec: &str, mode: SweepMode, jobs: Option<usize>, json: bool) -> Result<u8, Error> {
    let size = expected_size(spec)?;
    if size > GEN_CAP {
        return Err(Error::resource(format!(
            "{spec} has {size} vertices, above the cap {GEN_CAP}"
        )));
    }
    let inst = parse_spec(spec)?;
    let n = inst.graph.vertex_count();
    let triples: Vec<[usize; 3]> = if mode.all {
        let mut out = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    out.push([a, b, c]);
                }
            }
        }
        out
    } else if let (Some(count), Some(seed)) = (mode.sample, mode.seed) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let s = oracle::sample_triple(&mut rng, n);
                let v: Vec<usize> = s.iter().collect();
                [v[0], v[1], v[2]]
            })
            .collect()
    } else {
        return Err(Error::input("sweep needs --all or --sample N --seed S"));
    };

    let target = inst.target_trees();
    let run_one = |t: &[usize; 3]| -> (usize, usize, usize, bool) {
        // (tree count, fallback trees, total trees, failed)
        match packing::build_tree_packing(&inst, &VertexSet::new(t.to_vec())) {
            Ok(p) => {
                let fb = p.fallback_count();
                let cnt = p.trees.len();
                (cnt, fb, cnt, false)
            }
            Err(_) => (0, 0, 0, true),
        }
    };
    let results: Vec<(usize, usize, usize, bool)> = if let Some(j) = jobs {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| Error::resource(format!("cannot build thread pool: {e}")))?;
        pool.install(|| {
            use rayon::prelude::*;
            triples.par_iter().map(run_one).collect()
        })
    } else {
        use rayon::prelude::*;
        triples.par_iter().map(run_one).collect()
    };

    let mut min = usize::MAX;
    let mut max = 0usize;
    let mut failures = 0usize;
    let mut fallback_trees = 0usize;
    let mut total_trees = 0usize;
    for &(cnt, fb, tot, failed) in &results {
        if failed {
            failures += 1;
            min = 0;
            continue;
        }
        min = min.min(cnt);
        max = max.max(cnt);
        fallback_trees += fb;
        total_trees += tot;
    }
    if results.is_empty() {
        min = 0;
    }
    let mut rep = Report::new(json);
    rep.put("family", spec);
    rep.put("triples", triples.len());
    rep.put("target", target);
    rep.put("min_trees", min);
    rep.put("max_trees", max);
    rep.put("failures", failures);
    let rate = if total_trees == 0 {
        0.0
    } else {
        fallback_trees as f64 / total_trees as f64
    };
    rep.put("fallback_trees", fallback_trees);
    rep.put("fallback_rate", format!("{rate:.6}"));
    rep.emit();
    Ok(if failures > 0 || min < target { 1 } else { 0 })
}

fn cmd_kappa3(
    input: &str,
    mode: OracleMode,
    max_vertices: usize,
    json: bool,
) -> Result<u8, Error> {
    let (g, inst) = load_graph(input)?;
    if !g.is_connected() {
        return Err(Error::input("input graph is disconnected"));
    }
    let mode = if mode.exhaustive {
        if g.vertex_count() > max_vertices {
            return Err(Error::resource(format!(
                "{} vertices exceed the exhaustive-oracle cap {max_vertices} (raise with --max-vertices)",
                g.vertex_count()
            )));
        }
        Kappa3Mode::Exhaustive
    } else if let (Some(count), Some(seed)) = (mode.sample, mode.seed) {
        Kappa3Mode::Sampled { count, seed }
    } else {
        return Err(Error::input("kappa3 needs --exhaustive or --sample N --seed S"));
    };
    let exhaustive = matches!(mode, Kappa3Mode::Exhaustive);
    let value = oracle::kappa3(&g, mode)?;
    let mut rep = Report::new(json);
    rep.put("kappa3", value);
    rep.put("exact", exhaustive);
    let b = oracle::bounds(&g)?;
    rep.put("bound_lower", b.lower);
    rep.put("bound_upper", b.upper);
    rep.put("kappa", b.kappa);
    if let Some(inst) = inst {
        rep.put("family_kappa3_formula", inst.target_trees());
    }
    rep.emit();
    Ok(0)
}

fn cmd_kappa(input: &str, json: bool) -> Result<u8, Error> {
    let (g, _) = load_graph(input)?;
    let value = menger::vertex_connectivity(&g);
    let mut rep = Report::new(json);
    rep.put("kappa", value);
    rep.emit();
    Ok(0)
}
