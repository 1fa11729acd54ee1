//! Acceptance criteria 1-9. Prints one line per criterion and exits non-zero
//! if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;

use common::*;
use heatopt::analysis::{
    fixed_control_sweep, optimal_control_sweep, estimate_checks, EstimateOptions, DEFAULT_ALPHAS,
};
use heatopt::control::{contraction_constant, ControlProblem, DEFAULT_MAX_ITER};
use heatopt::state::{series_inner, ControlPair, ProblemData, Trajectory, Variant};
use rand::RngExt;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn variants(data: &ProblemData, alpha: f64) -> Vec<(ProblemData, Variant)> {
    vec![
        (data.clone(), Variant::Dirichlet),
        (data.with_alpha(alpha).unwrap(), Variant::Robin),
    ]
}

fn residual(u: &Trajectory, data: &ProblemData) -> Vec<Vec<f64>> {
    u.slices[1..]
        .iter()
        .zip(data.z_d())
        .map(|(a, z)| a.iter().zip(z).map(|(x, y)| x - y).collect())
        .collect()
}

fn ac1_adjoint_identity() -> Verdict {
    let mut worst = 0.0_f64;
    let mut rng = rng(101);
    for inst in [tiny_instance(0.5, 0.5, 10.0), default_instance()] {
        let steps = inst.data.n_steps();
        let tau = inst.data.tau();
        for (data, variant) in variants(&inst.data, 10.0) {
            let problem = ControlProblem::new(&data, &inst.ops, variant).unwrap();
            let base = random_control(&inst.ops, steps, &mut rng);
            let u = problem.state(&base).unwrap();
            let p = problem.adjoint(&u).unwrap();
            let res = residual(&u, &data);
            let p_steps = &p.slices[..steps];
            let p_trace: Vec<Vec<f64>> = p_steps.iter().map(|s| inst.ops.trace_gamma2(s)).collect();
            for _ in 0..20 {
                let dir = random_control(&inst.ops, steps, &mut rng);
                let c = problem.apply_c(&dir).unwrap();
                let lhs = series_inner(&inst.ops.mass, tau, &c.slices[1..], &res);
                let rhs = series_inner(&inst.ops.mass, tau, &dir.g, p_steps)
                    - series_inner(&inst.ops.gamma2_mass_trace, tau, &dir.q, &p_trace);
                worst = worst.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
            }
        }
    }
    verdict(worst <= 1e-10, format!("max |lhs - rhs| / (1 + |lhs|) = {worst:.3e} (tol 1e-10)"))
}

fn ac2_gradient_fd() -> Verdict {
    let inst = default_instance();
    let steps = inst.data.n_steps();
    let mut rng = rng(102);
    let mut worst = 0.0_f64;
    for (data, variant) in variants(&inst.data, 10.0) {
        let problem = ControlProblem::new(&data, &inst.ops, variant).unwrap();
        for _ in 0..20 {
            let c = random_control(&inst.ops, steps, &mut rng);
            let d = random_control(&inst.ops, steps, &mut rng);
            let exact = problem.inner(&problem.gradient(&c).unwrap(), &d);
            let h = 1e-5 / problem.norm(&d);
            let plus = problem.cost(&c.combine(1.0, &d, h)).unwrap();
            let minus = problem.cost(&c.combine(1.0, &d, -h)).unwrap();
            let fd = (plus - minus) / (2.0 * h);
            worst = worst.max((exact - fd).abs() / exact.abs());
        }
    }
    verdict(worst <= 1e-6, format!("max relative error = {worst:.3e} (tol 1e-6)"))
}

fn ac3_convexity() -> Verdict {
    let inst = default_instance();
    let steps = inst.data.n_steps();
    let tau = inst.data.tau();
    let mut rng = rng(103);
    let mut worst = 0.0_f64;
    for (data, variant) in variants(&inst.data, 10.0) {
        let problem = ControlProblem::new(&data, &inst.ops, variant).unwrap();
        for _ in 0..10 {
            let c1 = random_control(&inst.ops, steps, &mut rng);
            let c2 = random_control(&inst.ops, steps, &mut rng);
            let (j1, j2) = (problem.cost(&c1).unwrap(), problem.cost(&c2).unwrap());
            let du = problem.state(&c2).unwrap().sub(&problem.state(&c1).unwrap());
            let dc = c2.sub(&c1);
            let bracket = series_inner(&inst.ops.mass, tau, &du.slices[1..], &du.slices[1..])
                + data.m1() * dc.h_inner(&dc, &inst.ops, tau)
                + data.m2() * dc.q_inner(&dc, &inst.ops, tau);
            for t in [0.25, 0.5, 0.75] {
                let jt = problem.cost(&c1.combine(t, &c2, 1.0 - t)).unwrap();
                let gap = t * j1 + (1.0 - t) * j2 - jt;
                let expected = t * (1.0 - t) / 2.0 * bracket;
                worst = worst.max((gap - expected).abs() / expected.abs());
            }
        }
    }
    verdict(worst <= 1e-10, format!("max relative error = {worst:.3e} (tol 1e-10)"))
}

fn ac4_kkt_oracle() -> Verdict {
    let inst = tiny_instance(0.1, 0.1, 10.0);
    let dense = dense_assembly(&inst.mesh);
    let mut worst = 0.0_f64;
    for (data, variant) in variants(&inst.data, 10.0) {
        let st = space_time(&dense, &data, variant);
        let report = ControlProblem::new(&data, &inst.ops, variant)
            .unwrap()
            .solve_cg(1e-13, DEFAULT_MAX_ITER)
            .unwrap();
        let diff = st.flatten(report.control()) - st.kkt_solution();
        worst = worst.max(st.norm(&diff));
    }
    verdict(worst <= 1e-8, format!("max |cg - kkt|_HxQ = {worst:.3e} (tol 1e-8)"))
}

fn ac5_fixed_point() -> Verdict {
    let base = default_instance();
    let data = base.data.with_weights(60.0, 60.0).unwrap();
    let constants = base.ops.compute_constants().unwrap();
    let tol = 1e-8;
    let mut ok = true;
    let mut parts = Vec::new();
    for (data, variant) in variants(&data, 10.0) {
        let alpha = (variant == Variant::Robin).then_some(data.alpha());
        let c0 = contraction_constant(&constants, data.m1(), data.m2(), variant, alpha);
        let problem = ControlProblem::new(&data, &base.ops, variant).unwrap();
        let fp = problem.solve_fixed_point(tol, DEFAULT_MAX_ITER).unwrap();
        let cg = problem.solve_cg(tol, DEFAULT_MAX_ITER).unwrap();
        let distance = problem.norm(&fp.control().sub(cg.control()));
        let ratio = fp.step_ratio.unwrap_or(0.0);
        ok &= c0 < 0.8 && fp.converged && ratio <= c0 + 0.05 && distance <= 10.0 * tol;
        parts.push(format!(
            "{variant}: C0 = {c0:.3}, step ratio = {ratio:.3e}, iterations = {}, |fp - cg| = {distance:.2e}",
            fp.iterations
        ));
    }
    verdict(ok, parts.join("; "))
}

fn ac6_alpha_sweep() -> Verdict {
    let inst = default_instance();
    let report = optimal_control_sweep(&inst.data, &DEFAULT_ALPHAS, &inst.ops, 1e-8).unwrap();
    let col = |f: &dyn Fn(&heatopt::analysis::SweepRecord) -> f64| -> Vec<f64> { report.records.iter().map(f).collect() };
    let gaps = [
        ("state", col(&|r| r.state_gap)),
        ("adjoint", col(&|r| r.adjoint_gap)),
        ("control", col(&|r| r.control_gap.unwrap())),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, g) in &gaps {
        let decreasing = g.windows(2).all(|w| w[1] < w[0]);
        let ratio = g[g.len() - 1] / g[0];
        ok &= decreasing && ratio < 0.2;
        parts.push(format!("{name} ratio {ratio:.2e}{}", if decreasing { "" } else { " NOT DECREASING" }));
    }
    let res = col(&|r| r.boundary_residual);
    let growth = res.iter().fold(0.0_f64, |m, &v| m.max(v)) / res[0];
    ok &= growth <= 10.0;
    parts.push(format!("boundary max/first {growth:.3}"));
    verdict(ok, parts.join(", "))
}

fn random_instance(seed: u64) -> Instance {
    let mut r = rng(seed);
    let sides = [r#"["left"]"#, r#"["bottom"]"#, r#"["left", "top"]"#, r#"["right", "bottom", "left"]"#];
    let side = sides[r.random_range(0..sides.len())];
    let m1 = 10f64.powf(r.random_range(-2.5..0.5));
    let m2 = 10f64.powf(r.random_range(-2.5..0.5));
    let b = r.random_range(-1.0..2.0);
    let bubble = r.random_range(-4.0..4.0);
    let amp = r.random_range(0.2..2.0);
    let cxy = [r.random_range(0.1..0.9), r.random_range(0.1..0.9)];
    let width = r.random_range(0.05..0.4);
    let alpha = 10f64.powf(r.random_range(0.5..3.0));
    let inst = from_config(&format!(
        r#"
[mesh]
nx = 12
ny = 12
gamma1 = {side}

[time]
final_time = 1.0
n_steps = 16

[problem]
m1 = {m1}
m2 = {m2}
alpha = {alpha}
b = {{ kind = "constant", value = {b} }}
v_b = {{ kind = "constant", value = {b} }}
z_d = {{ kind = "gaussian", amplitude = {amp}, center = [{}, {}], width = {width} }}
"#,
        cxy[0], cxy[1]
    ));
    add_bubble(inst, bubble)
}

/// Adds `c x y (1 - x) (1 - y)` to the lift; it vanishes on every side, so
/// `v_b = b` still holds on the Dirichlet nodes.
fn add_bubble(inst: Instance, c: f64) -> Instance {
    let Instance { mesh, ops, data } = inst;
    let v_b: Vec<f64> = data
        .v_b()
        .iter()
        .zip(mesh.nodes())
        .map(|(v, p)| v + c * p[0] * p[1] * (1.0 - p[0]) * (1.0 - p[1]))
        .collect();
    let data = ProblemData::new(
        &ops,
        *data.grid(),
        data.b().to_vec(),
        v_b,
        data.z_d().clone(),
        data.m1(),
        data.m2(),
        data.alpha(),
    )
    .unwrap();
    Instance { mesh, ops, data }
}

fn ac7_estimates() -> Verdict {
    let mut ok = true;
    let mut strict = 0;
    let mut worst_lip = 0.0_f64;
    let mut failures = Vec::new();
    for seed in 0..10 {
        let inst = random_instance(700 + seed);
        let opts = EstimateOptions {
            alpha: inst.data.alpha(),
            seed,
            ..EstimateOptions::default()
        };
        let report = estimate_checks(&inst.data, &inst.ops, 1e-10, &opts).unwrap();
        for v in [&report.dirichlet, &report.robin] {
            let pass = v.estimate.holds && v.estimate_perturbed.holds && v.remark.holds && v.lipschitz.holds;
            if !pass {
                failures.push(format!("seed {seed} {}", v.variant));
            }
            ok &= pass;
            strict += usize::from(v.estimate.lhs <= v.estimate.rhs);
            worst_lip = worst_lip.max(v.lipschitz.max_ratio / v.lipschitz.contraction_constant);
        }
    }
    verdict(
        ok,
        format!(
            "20 variant runs; estimate strict at optimum {strict}/20 (else within solver residual), \
             max Lipschitz ratio / bound = {worst_lip:.3e}{}",
            if failures.is_empty() { String::new() } else { format!("; failed: {}", failures.join(", ")) }
        ),
    )
}

fn ac8_trivial() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for variant in [Variant::Dirichlet, Variant::Robin] {
        let text = DEFAULT_CONFIG.replace(
            r#"z_d = { kind = "gaussian", amplitude = 1.0, center = [0.5, 0.5], width = 0.2 }"#,
            r#"z_d = { kind = "uncontrolled" }"#,
        );
        let inst = heatopt::config::RunConfig::parse(&text, ".").unwrap().instance(variant).unwrap();
        let problem = ControlProblem::new(&inst.data, &inst.ops, variant).unwrap();
        let zero = ControlPair::zeros(&inst.ops, inst.data.n_steps());
        for report in [
            problem.solve_cg(1e-8, DEFAULT_MAX_ITER).unwrap(),
            problem.solve_fixed_point(1e-8, DEFAULT_MAX_ITER).unwrap(),
        ] {
            let exact = report.converged && report.cost == 0.0 && *report.control() == zero;
            ok &= exact;
            if !exact {
                parts.push(format!("{variant} {} cost {:e}", report.solver, report.cost));
            }
        }
    }

    let text = DEFAULT_CONFIG
        .replace(r#"v_b = { kind = "linear", c0 = 1.0, cx = -1.0 }"#, "")
        .replace(
            r#"z_d = { kind = "gaussian", amplitude = 1.0, center = [0.5, 0.5], width = 0.2 }"#,
            r#"z_d = { kind = "constant", value = 1.0 }"#,
        );
    let inst = from_config(&text);
    let zero = ControlPair::zeros(&inst.ops, inst.data.n_steps());
    let mut dev = 0.0_f64;
    for (data, variant) in variants(&inst.data, 10.0) {
        let u = ControlProblem::new(&data, &inst.ops, variant).unwrap().state(&zero).unwrap();
        dev = dev.max(u.slices.iter().flatten().fold(0.0_f64, |m, v| m.max((v - 1.0).abs())));
    }
    let fixed = fixed_control_sweep(&inst.data, &zero, &DEFAULT_ALPHAS, &inst.ops).unwrap();
    let optimal = optimal_control_sweep(&inst.data, &DEFAULT_ALPHAS, &inst.ops, 1e-8).unwrap();
    let max_gap = fixed
        .records
        .iter()
        .chain(&optimal.records)
        .map(|r| r.state_gap.max(r.adjoint_gap).max(r.control_gap.unwrap_or(0.0)))
        .fold(0.0_f64, f64::max);
    ok &= dev <= 1e-12 && max_gap <= 1e-12;
    parts.push(format!(
        "uncontrolled target: optimum (0, 0) with cost 0; constant data: |u - 1| <= {dev:.1e}, max sweep gap {max_gap:.1e}"
    ));
    verdict(ok, parts.join("; "))
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn ac9_determinism() -> Verdict {
    let config: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", "default.toml"].iter().collect();
    let tmp = tempfile::tempdir().unwrap();
    let mut ok = true;
    let mut count = 0;
    for cmd in ["solve", "sweep"] {
        let mut runs = Vec::new();
        for k in 0..2 {
            let out = tmp.path().join(format!("{cmd}{k}"));
            let status = Command::new(env!("CARGO_BIN_EXE_heatopt"))
                .args([cmd, "--quiet", "--config"])
                .arg(&config)
                .arg("--out")
                .arg(&out)
                .status()
                .unwrap();
            ok &= status.success();
            runs.push(csv_bytes(&out));
        }
        ok &= !runs[0].is_empty() && runs[0] == runs[1];
        count += runs[0].len();
    }
    verdict(ok, format!("{count} csv files compared byte for byte across two runs"))
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 9] = [
        ("adjoint identity", ac1_adjoint_identity),
        ("gradient vs central differences", ac2_gradient_fd),
        ("convexity identity", ac3_convexity),
        ("cg vs dense kkt oracle", ac4_kkt_oracle),
        ("fixed-point characterization", ac5_fixed_point),
        ("alpha convergence", ac6_alpha_sweep),
        ("joint vs distributed estimates", ac7_estimates),
        ("trivial exactness", ac8_trivial),
        ("determinism", ac9_determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let v = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        failed += usize::from(!v.passed);
        println!(
            "AC{} {} {name}: {} [{:.1}s]",
            i + 1,
            if v.passed { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
