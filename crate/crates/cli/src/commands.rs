use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use nalgebra::DVector;
use smoothdist::baseline::{run_demo, DescentTrace, Scenario, DEMO_MAX_STEPS, DEMO_SCAN_STEPS, DEMO_SEGMENTS};
use smoothdist::blend;
use smoothdist::sampling::sample_polytope;
use smoothdist::verify::{verify, VerifyOptions};
use smoothdist::{build, BuildConfig, DagStructure, Polytope};

use crate::report::{fmt_f64, log_log_slope, slope, CsvOut, RunConfig};
use crate::{resolve_seed, Command, FieldKind, VerifyFailed};

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Build { input, epsilon, seed, out, lambda_c, lambda_p } => {
            let mut config = BuildConfig::new(epsilon, resolve_seed(seed)?);
            config.lambda_c = lambda_c;
            config.lambda_p = lambda_p;
            cmd_build(&input, &config, &out)
        }
        Command::Query { structure, at, gradient } => cmd_query(&structure, &at, gradient),
        Command::Grid { structure, res, out, field } => cmd_grid(&structure, res, &out, field),
        Command::Verify { structure, samples, seed } => {
            let opts = VerifyOptions { samples, seed: resolve_seed(seed)?, ..VerifyOptions::default() };
            cmd_verify(&structure, &opts)
        }
        Command::Bench { input, eps_list, out, seed, queries } => {
            let eps = parse_list(&eps_list)?;
            cmd_bench(&input, &eps, resolve_seed(seed)?, queries, &out)
        }
        Command::Demo { scenario, out, seed } => {
            let scenario: Scenario = scenario.parse()?;
            cmd_demo(scenario, resolve_seed(seed)?, &out)
        }
    }
}

fn invalid(msg: String) -> anyhow::Error {
    smoothdist::Error::InvalidArgument(msg).into()
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| invalid(format!("'{t}' is not a number"))))
        .collect()
}

pub fn load_polytope(path: &Path) -> Result<Polytope> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(Polytope::from_json_str(&text)?)
}

pub fn load_structure(path: &Path) -> Result<DagStructure> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(DagStructure::from_json(&text)?)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

pub fn cmd_build(input: &Path, config: &BuildConfig, out: &Path) -> Result<()> {
    let p = load_polytope(input)?;
    let start = Instant::now();
    let s = build(&p, config)?;
    let elapsed = start.elapsed().as_secs_f64();
    write_file(out, &s.to_json()?)?;
    let sizes = s.level_sizes();
    println!("level sizes: {sizes:?}");
    println!("level-0 nodes: {}", sizes[0]);
    println!("top level m: {}", s.top_level());
    println!("patches: {}", s.patches.len());
    println!("max out-degree: {}", s.max_out_degree());
    println!("build time: {elapsed:.3} s");
    Ok(())
}

fn parse_point(s: &str, dim: usize) -> Result<DVector<f64>> {
    let v = parse_list(s)?;
    if v.len() != dim {
        return Err(smoothdist::Error::DimensionMismatch { expected: dim, got: v.len() }.into());
    }
    Ok(DVector::from_vec(v))
}

fn join(v: &DVector<f64>) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")
}

pub fn cmd_query(path: &Path, at: &str, gradient: bool) -> Result<()> {
    let s = load_structure(path)?;
    let x = parse_point(at, s.dim())?;
    // points just outside are answered when the descent still finds a patch
    let descent = s.ray_shoot_descend(&s.transform.apply(&x))?;
    let r = blend::eval_original(&s, &x)?;
    println!("value {}", fmt_f64(r.value));
    if gradient {
        println!("gradient {}", join(&r.gradient));
    }
    println!("patches {}", r.contributions.len());
    println!("path_length {}", descent.path.len());
    Ok(())
}

/// Cell centers of an `res^d` grid over the box, first axis fastest.
pub fn grid_points(lo: &DVector<f64>, hi: &DVector<f64>, res: usize) -> Vec<DVector<f64>> {
    let d = lo.len();
    let total = res.pow(d as u32);
    (0..total)
        .map(|k| {
            let mut x = DVector::zeros(d);
            let mut rest = k;
            for i in 0..d {
                let j = rest % res;
                rest /= res;
                x[i] = lo[i] + (j as f64 + 0.5) / res as f64 * (hi[i] - lo[i]);
            }
            x
        })
        .collect()
}

pub fn cmd_grid(path: &Path, res: usize, out: &Path, field: FieldKind) -> Result<()> {
    if res == 0 {
        return Err(invalid("--res must be positive".into()));
    }
    let s = load_structure(path)?;
    let d = s.dim();
    let (lo, hi) = s.polytope.bounding_box();
    let (lo, hi) = (s.transform.invert(&lo), s.transform.invert(&hi));
    let config = RunConfig::from_build("grid", &s.config).with_samples("res", res);
    let mut columns: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    for c in ["inside", "d", "value", "error", "grad_norm", "patches", "field"] {
        columns.push(c.to_string());
    }
    let mut csv = CsvOut::create(out, &config, &columns)?;
    for x in grid_points(&lo, &hi, res) {
        let mut row: Vec<String> = x.iter().map(|v| fmt_f64(*v)).collect();
        let q = s.transform.apply(&x);
        if !s.polytope.contains(&q, 0.0) {
            row.push("0".into());
            row.extend(std::iter::repeat_n(String::new(), 6));
            csv.row(&row)?;
            continue;
        }
        let exact = s.transform.length_to_original(s.polytope.exact_boundary_distance(&q)?);
        let r = blend::eval_original(&s, &x)?;
        let chosen = match field {
            FieldKind::Blend => r.value,
            FieldKind::Exact => exact,
            FieldKind::Error => r.value - exact,
            FieldKind::Witness => s.transform.length_to_original(s.witness_value(&q)?.0),
        };
        row.push("1".into());
        for v in [exact, r.value, r.value - exact, r.gradient.norm()] {
            row.push(fmt_f64(v));
        }
        row.push(r.contributions.len().to_string());
        row.push(fmt_f64(chosen));
        csv.row(&row)?;
    }
    csv.finish()
}

pub fn cmd_verify(path: &Path, opts: &VerifyOptions) -> Result<()> {
    let s = load_structure(path)?;
    let report = verify(&s, opts)?;
    print!("{}", report.table());
    if report.passed() {
        println!("all checks passed");
        Ok(())
    } else {
        Err(VerifyFailed(report.failures()).into())
    }
}

/// One epsilon of a scaling run.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub epsilon: f64,
    pub level0: usize,
    pub nodes: usize,
    pub levels: usize,
    pub mean_path_length: f64,
    pub mean_query_seconds: f64,
    pub build_seconds: f64,
}

pub fn bench_rows(p: &Polytope, eps: &[f64], seed: u64, queries: usize) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::with_capacity(eps.len());
    for &e in eps {
        let start = Instant::now();
        let s = build(p, &BuildConfig::new(e, seed))?;
        let build_seconds = start.elapsed().as_secs_f64();
        let points = sample_polytope(&s.polytope, queries.max(1), seed, 7);
        let start = Instant::now();
        for q in &points {
            std::hint::black_box(blend::eval(&s, q)?);
        }
        let mean_query_seconds = start.elapsed().as_secs_f64() / points.len() as f64;
        let mut path = 0usize;
        for q in &points {
            path += s.ray_shoot_descend(q)?.path.len();
        }
        rows.push(BenchRow {
            epsilon: e,
            level0: s.levels[0].len(),
            nodes: s.node_count(),
            levels: s.levels.len(),
            mean_path_length: path as f64 / points.len() as f64,
            mean_query_seconds,
            build_seconds,
        });
    }
    Ok(rows)
}

/// Storage slope (log-log, level-0 nodes against `1 / eps`) and path slope
/// (mean path length against `log2(1 / eps)`).
pub fn bench_slopes(rows: &[BenchRow]) -> Option<(f64, f64)> {
    let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let storage = log_log_slope(&eps, &rows.iter().map(|r| r.level0 as f64).collect::<Vec<_>>())?;
    let x: Vec<f64> = eps.iter().map(|e| (1.0 / e).log2()).collect();
    let path = slope(&x, &rows.iter().map(|r| r.mean_path_length).collect::<Vec<_>>())?;
    Some((storage, path))
}

pub fn cmd_bench(input: &Path, eps: &[f64], seed: u64, queries: usize, out: &Path) -> Result<()> {
    let p = load_polytope(input)?;
    let config = RunConfig::new("bench", eps.to_vec(), seed).with_samples("queries", queries);
    let columns: Vec<String> =
        ["epsilon", "level0_nodes", "total_nodes", "levels", "mean_path_length", "mean_query_seconds", "build_seconds"]
            .iter()
            .map(|c| c.to_string())
            .collect();
    let mut csv = CsvOut::create(out, &config, &columns)?;
    let rows = bench_rows(&p, eps, seed, queries)?;
    for r in &rows {
        csv.row(&[
            fmt_f64(r.epsilon),
            r.level0.to_string(),
            r.nodes.to_string(),
            r.levels.to_string(),
            fmt_f64(r.mean_path_length),
            fmt_f64(r.mean_query_seconds),
            fmt_f64(r.build_seconds),
        ])?;
        println!(
            "eps {}: level-0 {}, nodes {}, levels {}, mean path {:.3}, query {:.3e} s, build {:.3} s",
            r.epsilon, r.level0, r.nodes, r.levels, r.mean_path_length, r.mean_query_seconds, r.build_seconds
        );
    }
    csv.finish()?;
    if let Some((storage, path)) = bench_slopes(&rows) {
        println!("storage slope (log level-0 vs log 1/eps): {storage:.4}");
        println!("path slope (levels per halving of eps): {path:.4}");
    }
    Ok(())
}

fn trace_rows(csv: &mut CsvOut, name: &str, t: &DescentTrace) -> Result<()> {
    for (k, (x, v)) in t.points.iter().zip(&t.values).enumerate() {
        let mut row = vec![name.to_string(), k.to_string()];
        row.extend(x.iter().map(|c| fmt_f64(*c)));
        row.push(fmt_f64(*v));
        csv.row(&row)?;
    }
    Ok(())
}

pub fn cmd_demo(scenario: Scenario, seed: u64, out: &Path) -> Result<()> {
    let report = run_demo(scenario, seed)?;
    let config = RunConfig::from_build("demo", &report.structure.config)
        .with_samples("segments", DEMO_SEGMENTS)
        .with_samples("scan_steps", DEMO_SCAN_STEPS)
        .with_samples("max_steps", DEMO_MAX_STEPS);
    let d = report.structure.dim();
    let mut columns = vec!["field".to_string(), "step".to_string()];
    columns.extend((0..d).map(|i| format!("x{i}")));
    columns.push("value".into());
    let mut csv = CsvOut::create(out, &config, &columns)?;
    trace_rows(&mut csv, "witness", &report.witness)?;
    trace_rows(&mut csv, "blended", &report.blended)?;
    csv.finish()?;
    let heading = scenario.heading();
    for (name, t, jumps) in [
        ("witness", &report.witness, report.witness_jump_segments),
        ("blended", &report.blended, report.blended_jump_segments),
    ] {
        println!(
            "{name}: {} after {} steps, jitter {}, monotone {}, segments with jumps {}/{}",
            t.terminated.as_str(),
            t.points.len() - 1,
            t.jitter(),
            t.is_monotone(heading, 1e-12),
            jumps,
            report.segments
        );
    }
    println!("witness cycled or jittered: {}", if report.witness_misbehaves() { "yes" } else { "no" });
    println!("blended converged without jitter: {}", if report.blended_behaves() { "yes" } else { "no" });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points_are_cell_centers() {
        let lo = DVector::from_vec(vec![0.0, 0.0]);
        let hi = DVector::from_vec(vec![2.0, 1.0]);
        let g = grid_points(&lo, &hi, 2);
        assert_eq!(g.len(), 4);
        assert_eq!(g[0].as_slice(), &[0.5, 0.25]);
        assert_eq!(g[1].as_slice(), &[1.5, 0.25]);
        assert_eq!(g[2].as_slice(), &[0.5, 0.75]);
        let one = grid_points(&lo, &hi, 1);
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].as_slice(), &[1.0, 0.5]);
    }

    #[test]
    fn lists_parse_or_fail() {
        assert_eq!(parse_list("0.2, 0.1").unwrap(), vec![0.2, 0.1]);
        assert!(parse_list("0.2,x").is_err());
        assert!(parse_point("1,2,3", 2).is_err());
    }
}
