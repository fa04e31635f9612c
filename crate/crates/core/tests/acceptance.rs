//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line
//! (written straight to stderr so it shows without `--nocapture`) and then
//! asserts.

use std::io::Write;
use std::time::Instant;

use nalgebra::Vector3;
use nplab::cyclic::{coverage_sampler, cyclicity_sampler, equivalence_trials, SamplerOptions};
use nplab::geometry::{make_shape, PerturbationField, Shape, ShapeSpec};
use nplab::perturbation::{
    count_stability, fd_slopes, hadamard_slopes, slopes_agree, splitting_experiment, SplitOptions,
};
use nplab::spectral::{eval_exterior, solve, Solved};

fn report(id: u32, name: &str, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("acceptance {id:02} {name:<28} {verdict}  {detail}\n");
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn sci(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn sphere(subdiv: u32) -> Shape {
    make_shape(&ShapeSpec::Sphere { radius: 1.0, subdiv }).unwrap()
}

fn sphere_solved(subdiv: u32) -> (Shape, Solved) {
    let s = sphere(subdiv);
    let solved = solve(&s, 0).unwrap();
    (s, solved)
}

fn sampler(samples: usize, seed: u64) -> SamplerOptions {
    SamplerOptions {
        min_abs_lambda: 0.08,
        samples,
        seed,
        shell: (1.5, 3.0),
        direction: [1.0, 0.0, 0.0],
        probes: None,
        rank_tol: 1e-6,
    }
}

#[test]
fn criterion_01_disk_spectrum() {
    let t = Instant::now();
    let c = make_shape(&ShapeSpec::Circle { radius: 0.5, nodes: 128 }).unwrap();
    let s = solve(&c, 128).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let ev = &s.spectrum.eigenvalues;
    let top = (ev[0] - 0.5).abs();
    let rest = ev[1..].iter().fold(0.0f64, |m, l| m.max(l.abs()));
    report(
        1,
        "disk_spectrum",
        top < 1e-10 && rest < 1e-10 && secs < 1.0,
        format!("|λ0-1/2|={top:.1e} max|λk|={rest:.1e} time={secs:.2}s"),
    );
}

#[test]
fn criterion_02_ball_spectrum() {
    let exact = [0.5, 1.0 / 6.0, 0.1];
    let errors = |s: &Solved| -> Option<Vec<f64>> {
        let cl = &s.spectrum.clusters;
        if cl.len() < 3 || cl[0].multiplicity != 1 || cl[1].multiplicity != 3 || cl[2].multiplicity != 5 {
            return None;
        }
        Some(
            (0..3)
                .map(|k| {
                    s.spectrum.eigenvalues[cl[k].range()]
                        .iter()
                        .fold(0.0f64, |m, l| m.max((l - exact[k]).abs()))
                })
                .collect(),
        )
    };
    let t = Instant::now();
    let (_, coarse) = sphere_solved(3);
    let secs = t.elapsed().as_secs_f64();
    let (_, fine) = sphere_solved(4);
    let (ec, ef) = (errors(&coarse), errors(&fine));
    let pass = match (&ec, &ef) {
        (Some(c), Some(f)) => c.iter().all(|e| *e < 0.02) && c.iter().zip(f).all(|(a, b)| b < a) && secs < 60.0,
        _ => false,
    };
    report(
        2,
        "ball_spectrum",
        pass,
        format!(
            "errors 1280={} 5120={} time(1280)={secs:.1}s",
            ec.as_deref().map_or("n/a".into(), sci),
            ef.as_deref().map_or("n/a".into(), sci)
        ),
    );
}

#[test]
fn criterion_03_self_adjointness() {
    let e = make_shape(&ShapeSpec::Ellipse { a: 0.6, b: 0.35, nodes: 128 }).unwrap();
    let r2 = solve(&e, 128).unwrap().ops.symmetry_residual;
    let r3a = sphere_solved(2).1.ops.symmetry_residual;
    let r3b = sphere_solved(3).1.ops.symmetry_residual;
    report(
        3,
        "self_adjointness",
        r2 < 1e-8 && r3a < 5e-2 && r3b < 5e-2 && r3b < r3a,
        format!("2D={r2:.1e} 3D sd2={r3a:.2e} sd3={r3b:.2e}"),
    );
}

#[test]
fn criterion_04_hadamard_formula() {
    let (shape, s) = sphere_solved(3);
    let field = PerturbationField::SphericalHarmonic { l: 2, m: 0 };
    let c = s.spectrum.nearest_cluster(1.0 / 6.0).unwrap();
    let formula = hadamard_slopes(&shape, &s, c, &field).unwrap();
    // The third, larger step only serves to measure the convergence order.
    let fd = fd_slopes(&shape, &s, c, &field, &[1e-3, 2e-3, 4e-3], 0).unwrap();
    let agree = formula.slopes.len() == 3 && formula.slopes.iter().zip(&fd.richardson).all(|(f, d)| slopes_agree(*f, *d));
    let ratios = fd.error_ratios.clone().unwrap_or_default();
    // Ratios are meaningful only where the step dependence is above round-off.
    let measurable: Vec<f64> = ratios
        .iter()
        .zip(0..3)
        .filter(|(_, b)| (fd.levels[1].slopes[*b] - fd.levels[0].slopes[*b]).abs() > 1e-7)
        .map(|(r, _)| *r)
        .collect();
    let order_ok = !measurable.is_empty() && measurable.iter().all(|r| (3.0..=5.0).contains(r));
    report(
        4,
        "hadamard_formula",
        agree && order_ok,
        format!("formula={:.4?} fd={:.4?} ratios={:.2?}", formula.slopes, fd.richardson, ratios),
    );
}

#[test]
fn criterion_05_dilation_invariance() {
    let (shape, s) = sphere_solved(3);
    let field = PerturbationField::Constant { value: 1.0 };
    let c = s.spectrum.nearest_cluster(1.0 / 6.0).unwrap();
    let formula = hadamard_slopes(&shape, &s, c, &field).unwrap();
    let fd = fd_slopes(&shape, &s, c, &field, &[1e-3], 0).unwrap();
    let worst = formula.slopes.iter().chain(fd.best()).fold(0.0f64, |m, x| m.max(x.abs()));
    report(
        5,
        "dilation_invariance",
        worst < 1e-3,
        format!("max|slope|={worst:.2e} formula={} fd={}", sci(&formula.slopes), sci(fd.best())),
    );
}

#[test]
fn criterion_06_generic_splitting() {
    let (shape, s) = sphere_solved(3);
    let tol = 1e-4;
    let opts = SplitOptions { h: 0.05, tol, min_abs: 0.15, intervals: vec![] };
    let mut gaps = Vec::new();
    let mut pass = true;
    for seed in 1..=5 {
        let field = PerturbationField::RandomBandlimited { max_degree: 4, seed };
        let r = splitting_experiment(&shape, &s, &field, &opts, 0).unwrap();
        let c = r.clusters.iter().find(|c| (c.value - 1.0 / 6.0).abs() < 0.02).unwrap();
        pass &= c.multiplicity == 3 && c.min_gap > 10.0 * tol;
        gaps.push(c.min_gap);
    }
    report(6, "generic_splitting", pass, format!("tol={tol:.0e} min gaps={}", sci(&gaps)));
}

#[test]
fn criterion_07_interval_count_stability() {
    let shape = sphere(3);
    let field = PerturbationField::RandomBandlimited { max_degree: 4, seed: 1 };
    let r = count_stability(&shape, &field, &[0.0, 0.01, 0.02], (0.08, 0.5), 1e-3, 0).unwrap();
    let counts: Vec<usize> = r.counts.iter().map(|c| c.1).collect();
    report(
        7,
        "interval_count_stability",
        counts[0] == 8 && r.stable,
        format!("counts at h=0,0.01,0.02: {counts:?}"),
    );
}

#[test]
fn criterion_08_rank_krylov_equivalence() {
    let t = Instant::now();
    let s = equivalence_trials(100, 2024, 16, 3, 1e-8).unwrap();
    let secs = t.elapsed().as_secs_f64();
    report(
        8,
        "rank_krylov_equivalence",
        s.trials.len() == 100 && s.all_agree() && secs < 5.0,
        format!("{}/100 agree time={secs:.2}s", s.agreements),
    );
}

#[test]
fn criterion_09_too_few_vectors() {
    let s = equivalence_trials(100, 2024, 16, 3, 1e-8).unwrap();
    report(
        9,
        "too_few_vectors",
        s.few_vector_cases > 0 && s.few_vector_exceptions == 0,
        format!("{} trials with M < N_lambda, {} exceptions", s.few_vector_cases, s.few_vector_exceptions),
    );
}

#[test]
fn criterion_10_n_cyclic_genericity() {
    let (_, s) = sphere_solved(3);
    let r = cyclicity_sampler(&s, &sampler(200, 2024)).unwrap();
    report(
        10,
        "n_cyclic_genericity",
        r.spectral_multiplicity == 5 && r.fully_cyclic_fraction >= 0.99 && r.g_rank_consistent,
        format!(
            "N={} clusters={} full-rank fraction={:.3} G/rank consistent={}",
            r.spectral_multiplicity,
            r.retained_clusters.len(),
            r.fully_cyclic_fraction,
            r.g_rank_consistent
        ),
    );
}

#[test]
fn criterion_11_eigenmode_coverage() {
    let (_, s) = sphere_solved(3);
    let (samples, fraction) = coverage_sampler(&s, &sampler(200, 2025), 1e-10).unwrap();
    let smallest = samples.iter().map(|x| x.report.min_row_norm).fold(f64::INFINITY, f64::min);
    report(
        11,
        "eigenmode_coverage",
        samples.len() == 200 && fraction >= 0.99,
        format!("covered fraction={fraction:.3} smallest row norm={smallest:.2e}"),
    );
}

#[test]
fn criterion_12_exterior_evaluation() {
    let (_, s) = sphere_solved(3);
    let ones = vec![1.0; s.disc.len()];
    let z = Vector3::new(0.3, -1.2, 1.56);
    let z = z * (2.0 / z.norm());
    let e = eval_exterior(&s.disc, &ones, &z, &(z / 2.0)).unwrap();
    let ev = (e.value + 0.5).abs() / 0.5;
    let eg = (e.directional_derivative - 0.25).abs() / 0.25;
    report(
        12,
        "exterior_evaluation",
        ev < 0.01 && eg < 0.01,
        format!("S={:.5} (rel {ev:.1e}) grad={:.5} (rel {eg:.1e})", e.value, e.directional_derivative),
    );
}
