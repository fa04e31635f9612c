use serde::Serialize;
use serde_json::json;

use super::config::{Command, ExperimentConfig};
use super::{Artifacts, Failure};
use crate::cyclic::{coverage_sampler, cyclicity_sampler, equivalence_trials, probe_map};
use crate::error::{Error, Result};
use crate::geometry::{make_shape, Boundary, Shape};
use crate::perturbation::{count_stability, slope_report, splitting_experiment};
use crate::spectral::{solve, Solved};

pub(super) fn run(cmd: Command, cfg: &ExperimentConfig) -> std::result::Result<Artifacts, Failure> {
    let art = match cmd {
        Command::Spectrum => spectrum(cfg)?,
        Command::Hadamard => hadamard(cfg)?,
        Command::Split => split(cfg)?,
        Command::CountStability => counts(cfg)?,
        Command::Cyclic => cyclic(cfg)?,
        Command::Coverage => coverage(cfg)?,
        Command::ProbeMap => map(cfg)?,
        Command::Oracle => oracle(cfg)?,
    };
    Ok(art)
}

fn resolution(cfg: &ExperimentConfig, shape: &Shape) -> usize {
    cfg.resolution.unwrap_or(match &shape.boundary {
        Boundary::Curve(c) => c.len(),
        Boundary::Surface(_) => 0,
    })
}

fn load(cfg: &ExperimentConfig, cmd: Command) -> Result<(Shape, Solved, usize)> {
    let shape = make_shape(cfg.shape(cmd)?)?;
    let res = resolution(cfg, &shape);
    let mut solved = solve(&shape, res)?;
    if let Some(tol) = cfg.degeneracy_tol {
        solved.spectrum.recluster(tol);
    }
    Ok((shape, solved, res))
}

fn pick_cluster(cfg: &ExperimentConfig, solved: &Solved) -> Result<usize> {
    let n = solved.spectrum.clusters.len();
    let c = match (cfg.cluster, cfg.lambda) {
        (Some(c), _) => c,
        (None, Some(l)) => solved.spectrum.nearest_cluster(l).unwrap_or(0),
        (None, None) => 1,
    };
    if c >= n {
        return Err(Error::InvalidParameter(format!("cluster {c} out of range ({n} clusters)")));
    }
    Ok(c)
}

fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("report serializes")
}

fn kv(k: &str, v: impl ToString) -> (String, String) {
    (k.to_string(), v.to_string())
}

fn spectrum(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let (shape, s, _) = load(cfg, Command::Spectrum)?;
    let sp = &s.spectrum;
    let mut csv = String::from("index,lambda,cluster_id,multiplicity\n");
    for (id, c) in sp.clusters.iter().enumerate() {
        for i in c.range() {
            csv.push_str(&format!("{},{:.15e},{},{}\n", i, sp.eigenvalues[i], id, c.multiplicity));
        }
    }
    let clusters: Vec<_> = sp
        .clusters
        .iter()
        .enumerate()
        .map(|(id, c)| json!({"cluster_id": id, "value": c.value, "multiplicity": c.multiplicity, "start": c.start}))
        .collect();
    let sizes: Vec<String> = sp.clusters.iter().take(8).map(|c| c.multiplicity.to_string()).collect();
    Ok(Artifacts {
        json: json!({
            "config": cfg,
            "shape": shape.label,
            "dimension": s.dimension(),
            "unknowns": sp.len(),
            "symmetry_residual": s.ops.symmetry_residual,
            "gram_asymmetry": s.ops.gram_asymmetry,
            "degeneracy_tol": sp.tol,
            "eigen_residual": sp.eigen_residual(&s.ops),
            "clusters": clusters,
            "eigenvalues": sp.eigenvalues,
        }),
        csv,
        columns: &[
            ("index", "position in the descending eigenvalue list"),
            ("lambda", "NP eigenvalue (dimensionless, in [-1/2, 1/2])"),
            ("cluster_id", "index of the degeneracy cluster"),
            ("multiplicity", "size of that cluster"),
        ],
        summary: vec![
            kv("shape", &shape.label),
            kv("unknowns", sp.len()),
            kv("top eigenvalue", format!("{:.10}", sp.eigenvalues[0])),
            kv("symmetry residual", format!("{:.3e}", s.ops.symmetry_residual)),
            kv("leading cluster sizes", sizes.join(", ")),
        ],
    })
}

fn hadamard(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let (shape, s, res) = load(cfg, Command::Hadamard)?;
    let field = cfg.field(Command::Hadamard)?;
    let c = pick_cluster(cfg, &s)?;
    let h = cfg.h.as_deref().unwrap_or_default();
    let r = slope_report(&shape, &s, c, field, h, res)?;
    Ok(Artifacts {
        csv: r.to_csv(),
        json: json!({"config": cfg, "report": to_json(&r)}),
        columns: &[
            ("cluster", "cluster index in the unperturbed spectrum"),
            ("branch", "branch index after sorting slopes ascending"),
            ("formula_slope", "dλ/dh from the variational formula (per unit h)"),
            ("fd_slope", "dλ/dh from central differences, Richardson-extrapolated when possible"),
            ("rel_err", "|formula - fd| / |fd|"),
        ],
        summary: vec![
            kv("cluster", format!("{c} (λ = {:.6}, multiplicity {})", r.formula.lambda, r.formula.multiplicity)),
            kv("formula slopes", format!("{:?}", r.formula.slopes)),
            kv("fd slopes", format!("{:?}", r.fd.best())),
            kv("agree", r.agree),
        ],
    })
}

fn split(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let (shape, s, res) = load(cfg, Command::Split)?;
    let field = cfg.field(Command::Split)?;
    let opts = cfg.split.as_ref().expect("validated");
    let r = splitting_experiment(&shape, &s, field, opts, res)?;
    let mut csv = String::from("cluster_value,multiplicity,branch,value_after,gap_after,simple\n");
    for c in &r.clusters {
        for (b, v) in c.values_after.iter().enumerate() {
            let gap = c.gaps_after.get(b).map_or_else(|| "NaN".to_string(), |g| format!("{g:.6e}"));
            csv.push_str(&format!("{:.12e},{},{},{:.15e},{},{}\n", c.value, c.multiplicity, b, v, gap, c.simple));
        }
    }
    let split_count = r.clusters.iter().filter(|c| c.multiplicity > 1 && c.simple).count();
    let degenerate = r.clusters.iter().filter(|c| c.multiplicity > 1).count();
    Ok(Artifacts {
        csv,
        json: json!({"config": cfg, "report": to_json(&r)}),
        columns: &[
            ("cluster_value", "unperturbed cluster eigenvalue"),
            ("multiplicity", "unperturbed multiplicity"),
            ("branch", "member index within the cluster (descending)"),
            ("value_after", "eigenvalue of the perturbed shape at the same index"),
            ("gap_after", "gap to the next member after perturbation (NaN for the last)"),
            ("simple", "every gap in the cluster exceeds the tolerance"),
        ],
        summary: vec![
            kv("h", r.h),
            kv("field", &r.field),
            kv("degenerate clusters split", format!("{split_count} / {degenerate}")),
        ],
    })
}

fn counts(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let shape = make_shape(cfg.shape(Command::CountStability)?)?;
    let field = cfg.field(Command::CountStability)?;
    let c = cfg.count.as_ref().expect("validated");
    let r = count_stability(&shape, field, &c.sweep, c.interval, c.tol, resolution(cfg, &shape))?;
    let mut csv = String::from("h,count\n");
    for (h, n) in &r.counts {
        csv.push_str(&format!("{h},{n}\n"));
    }
    Ok(Artifacts {
        csv,
        json: json!({"config": cfg, "report": to_json(&r)}),
        columns: &[
            ("h", "perturbation amplitude"),
            ("count", "eigenvalues in the open interval, with multiplicity"),
        ],
        summary: vec![kv("interval", format!("({}, {})", r.lo, r.hi)), kv("stable", r.stable)],
    })
}

fn cyclic(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let (_, s, _) = load(cfg, Command::Cyclic)?;
    let opts = cfg.sampler.as_ref().expect("validated");
    let r = cyclicity_sampler(&s, opts)?;
    Ok(Artifacts {
        csv: r.to_csv(),
        json: json!({"config": cfg, "report": to_json(&r)}),
        columns: &[
            ("sample", "sample index"),
            ("cluster", "cluster index in the spectrum"),
            ("N_lambda", "cluster multiplicity"),
            ("rank", "numerical rank of the pairing matrix"),
            ("G_lambda", "sum of squared maximal minors (NaN with fewer probes than N_lambda)"),
            ("full_rank", "rank equals N_lambda"),
        ],
        summary: vec![
            kv("retained clusters", r.retained_clusters.len()),
            kv("probes per sample", r.probes_per_sample),
            kv("fully cyclic fraction", r.fully_cyclic_fraction),
            kv("G/rank consistent", r.g_rank_consistent),
        ],
    })
}

fn coverage(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let (_, s, _) = load(cfg, Command::Coverage)?;
    let opts = cfg.sampler.as_ref().expect("validated");
    let threshold = cfg.coverage_threshold.unwrap_or(1e-10);
    let (samples, fraction) = coverage_sampler(&s, opts, threshold)?;
    let mut csv = String::from("sample,cluster,lambda,row_norm,min_abs_pairing,covered\n");
    for smp in &samples {
        for c in &smp.report.clusters {
            let min = c.pairings.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
            csv.push_str(&format!(
                "{},{},{:.12e},{:.12e},{:.12e},{}\n",
                smp.sample, c.cluster, c.lambda, c.row_norm, min, smp.covered
            ));
        }
    }
    Ok(Artifacts {
        csv,
        json: json!({"config": cfg, "threshold": threshold, "fraction": fraction, "samples": to_json(&samples)}),
        columns: &[
            ("sample", "sample index"),
            ("cluster", "cluster index in the spectrum"),
            ("lambda", "cluster eigenvalue"),
            ("row_norm", "norm of the probe's pairings with the cluster basis"),
            ("min_abs_pairing", "smallest individual pairing magnitude in the cluster (basis dependent)"),
            ("covered", "every retained cluster row norm exceeds the threshold"),
        ],
        summary: vec![kv("samples", samples.len()), kv("covered fraction", fraction)],
    })
}

fn map(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let (_, s, _) = load(cfg, Command::ProbeMap)?;
    let opts = cfg.probe_map.as_ref().expect("validated");
    let rows = probe_map(&s, opts)?;
    let mut csv = String::from("x,y,z,cluster,lambda,row_norm,g_lambda,status\n");
    for r in &rows {
        csv.push_str(&format!(
            "{:.6},{:.6},{:.6},{},{:.12e},{:.12e},{:.12e},{}\n",
            r.x, r.y, r.z, r.cluster, r.lambda, r.row_norm, r.g_lambda, r.status
        ));
    }
    let ok = rows.iter().filter(|r| r.status == "ok").count();
    Ok(Artifacts {
        csv,
        json: json!({"config": cfg, "rows": rows.len(), "exterior_rows": ok}),
        columns: &[
            ("x", "probe x coordinate"),
            ("y", "probe y coordinate"),
            ("z", "probe z coordinate"),
            ("cluster", "cluster index in the spectrum"),
            ("lambda", "cluster eigenvalue"),
            ("row_norm", "norm of the pairing row of the grid probe (NaN off the exterior)"),
            ("g_lambda", "G with the fixed probes plus the grid probe (NaN if undefined)"),
            ("status", "ok, interior or near_field"),
        ],
        summary: vec![kv("grid rows", rows.len()), kv("exterior rows", ok)],
    })
}

fn oracle(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let o = cfg.oracle.as_ref().expect("validated");
    let r = equivalence_trials(o.trials, o.seed, o.max_dim, o.max_mult, o.tol)?;
    let mut csv = String::from("trial,kind,dimension,vectors,krylov_dim,full_span,criterion_verdict,agreement\n");
    for t in &r.trials {
        let kind = serde_json::to_value(t.kind).expect("kind serializes");
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            t.trial,
            kind.as_str().unwrap_or_default(),
            t.report.dimension,
            t.report.vectors,
            t.report.krylov_dim,
            t.report.full_span,
            t.report.criterion_verdict,
            t.report.agreement
        ));
    }
    Ok(Artifacts {
        csv,
        json: json!({"config": cfg, "report": to_json(&r)}),
        columns: &[
            ("trial", "trial index"),
            ("kind", "how the vectors were drawn: generic, too_few, deficient, canonical"),
            ("dimension", "matrix size"),
            ("vectors", "number of probe vectors"),
            ("krylov_dim", "dimension of the joint Krylov span"),
            ("full_span", "Krylov span is the whole space"),
            ("criterion_verdict", "every eigenspace pairing matrix has full rank"),
            ("agreement", "full_span equals criterion_verdict"),
        ],
        summary: vec![
            kv("agreements", format!("{} / {}", r.agreements, r.trials.len())),
            kv("too-few-vector cases", r.few_vector_cases),
            kv("too-few-vector exceptions", r.few_vector_exceptions),
        ],
    })
}
