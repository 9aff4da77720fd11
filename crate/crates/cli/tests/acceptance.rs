//! Acceptance suite: one PASS/FAIL line per criterion, tolerances fixed here.
//!
//! Runs without the libtest harness so the lines always reach stdout.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use ifs_decay::cocycle::lyapunov_chi;
use ifs_decay::diophantine::{dio_distance, dio_exponent, ratio_logs, Classification, ScanConfig};
use ifs_decay::examples::{cantor, exp_conjugated_lebesgue, lebesgue, nonlinear, two_ratio};
use ifs_decay::limit::{
    clt_error, conditional_llt, llt_ratio, CltMethod, ConditionalLltConfig, DensityConvention,
    LltConfig, WalkStats,
};
use ifs_decay::linearity::{conjugacy_construct, linearity_sup, second_difference_residual};
use ifs_decay::mc::stream_rng;
use ifs_decay::measure::{fourier_ss, MeasureSampler};
use ifs_decay::transfer::{
    c6_calibrate, dolgopyat_check, leading_eigen, OperatorConfig, TransferOperator,
};
use ifs_decay::{Conjugacy, Ifs, Interval, Word};
use num_complex::Complex64;
use rand::Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Check {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn lib<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

// 1. Lebesgue: MC and self-similar transforms vanish at integer frequencies.
fn lebesgue_identity() -> Check {
    let leb = lebesgue();
    let n = 100_000;
    let qs: Vec<f64> = (1..=20).map(f64::from).collect();
    let depth = lib(ifs_decay::measure::auto_depth(&leb, 20.0))?;
    let est = lib(MeasureSampler::new(&leb, depth, 1, n).fourier_mc_many(&qs))?;
    let gate = 3.0 / (n as f64).sqrt();
    let worst_mc = est.iter().map(|e| e.modulus()).fold(0.0, f64::max);
    let mut worst_ss = 0.0f64;
    for &q in &qs {
        worst_ss = worst_ss.max(lib(fourier_ss(&leb, q, 1e-6))?.norm());
    }
    ensure(
        worst_mc <= gate && worst_ss <= 1e-5,
        format!("max |F_mc| = {worst_mc:.3e} (gate {gate:.3e}), max |F_ss| = {worst_ss:.3e}"),
    )
}

// 2. Cantor: |F(3^n)| is constant and equals the truncated cosine product.
fn cantor_non_decay() -> Check {
    let c = cantor();
    let product = |q: f64| -> f64 {
        (1..=60)
            .map(|k| (2.0 * PI * q / 3f64.powi(k)).cos())
            .product::<f64>()
            .abs()
    };
    let mut vals = Vec::new();
    let mut worst_oracle = 0.0f64;
    for n in 0..=8 {
        let q = 3f64.powi(n);
        let v = lib(fourier_ss(&c, q, 1e-8))?.norm();
        worst_oracle = worst_oracle.max((v - product(q)).abs());
        vals.push(v);
    }
    let spread = vals.iter().cloned().fold(f64::MIN, f64::max)
        - vals.iter().cloned().fold(f64::MAX, f64::min);
    ensure(
        spread <= 1e-6 && worst_oracle <= 1e-6,
        format!("|F(3^n)| = {:.10}, spread {spread:.2e}, vs product {worst_oracle:.2e}", vals[0]),
    )
}

// 3. Affine IFS: leading eigenvalue is the character sum.
fn affine_eigen_oracle() -> Check {
    let tr = two_ratio();
    let (r, p): ([f64; 2], [f64; 2]) = ([0.5, 1.0 / 3.0], [0.5, 0.5]);
    let chi: f64 = r.iter().zip(&p).map(|(r, p)| -p * r.ln()).sum();
    let character = |theta: f64| -> Complex64 {
        r.iter()
            .zip(&p)
            .map(|(r, p)| Complex64::from_polar(*p, -2.0 * PI * theta * r.ln()))
            .sum()
    };
    let depth = 8;
    let mut worst = 0.0f64;
    for theta in [0.01, 0.05, 0.1] {
        for recentred in [false, true] {
            let cfg = OperatorConfig {
                theta,
                depth,
                recentred,
                chi: if recentred { chi } else { 0.0 },
            };
            let e = lib(leading_eigen(&lib(TransferOperator::new(&tr, cfg))?))?;
            let mut expect = character(theta);
            if recentred {
                expect *= Complex64::from_polar(1.0, -2.0 * PI * theta * chi);
            }
            worst = worst.max((e.lambda - expect).norm());
        }
    }
    let cfg = OperatorConfig {
        theta: 0.0,
        depth,
        recentred: false,
        chi: 0.0,
    };
    let e0 = lib(leading_eigen(&lib(TransferOperator::new(&tr, cfg))?))?;
    let one = Complex64::new(1.0, 0.0);
    let zero_err = e0
        .vector
        .values
        .iter()
        .map(|v| (v - one).norm())
        .fold((e0.lambda - one).norm(), f64::max);
    ensure(
        worst <= 1e-8 && zero_err <= 1e-12,
        format!("max |lambda - oracle| = {worst:.2e}, theta=0 error {zero_err:.2e}"),
    )
}

// 4. Exact Berry-Esseen distances on the two-ratio walk.
fn berry_esseen() -> Check {
    let tr = two_ratio();
    let st = lib(WalkStats::estimate(&tr, 100_000, 100, 1))?;
    let mut d = Vec::new();
    for n in [100, 400, 1600] {
        d.push(lib(clt_error(&tr, n, CltMethod::Exact, &st))?);
    }
    ensure(
        d[0] <= 0.06 && d[1] <= 0.03 && d[1] < d[0] && d[2] < d[1],
        format!("distances {:.5} {:.5} {:.5}", d[0], d[1], d[2]),
    )
}

/// `|later - target| <= |earlier - target|` up to twice the combined stderr.
fn nonincreasing(errs: &[(f64, f64)]) -> bool {
    errs.windows(2)
        .all(|w| w[1].0 <= w[0].0 + 2.0 * (w[0].1.powi(2) + w[1].1.powi(2)).sqrt())
}

// 5. LLT ratio on the nonlinear IFS.
fn llt_positivity() -> Check {
    let nl = nonlinear();
    let st = lib(WalkStats::estimate(&nl, 100_000, 100, 1))?;
    let run = |n: usize| {
        llt_ratio(
            &nl,
            &LltConfig {
                n,
                tail: Word::repeat(0, 20),
                c_lo: -0.25,
                c_hi: 0.25,
                v: 0.0,
                samples: 1_000_000,
                seed: 1,
                r_const: 1.0,
                convention: DensityConvention::Standard,
            },
            &st,
        )
    };
    let r30 = lib(run(30))?;
    let mut trend = Vec::new();
    for n in [20, 40, 80] {
        let r = lib(run(n))?;
        trend.push(((r.ratio - 0.5).abs(), r.stderr));
    }
    ensure(
        (0.35..=0.65).contains(&r30.ratio) && nonincreasing(&trend),
        format!(
            "n=30 ratio {:.4} (se {:.4}); |ratio-0.5| at 20/40/80: {:.4} {:.4} {:.4}",
            r30.ratio, r30.stderr, trend[0].0, trend[1].0, trend[2].0
        ),
    )
}

// 6. Conditional LLT on the lower half of [k chi, k chi + D'].
fn conditional_trend() -> Check {
    let nl = nonlinear();
    let chi = lib(lyapunov_chi(&nl, 200_000, 100, 1))?.value;
    let mut errs = Vec::new();
    let mut retained50 = 0.0;
    for k in [20.0, 50.0, 80.0] {
        let rep = lib(conditional_llt(
            &nl,
            &ConditionalLltConfig {
                k,
                h_prime: 7.0,
                j_lo: k * chi,
                j_hi: k * chi + 0.5 * nl.d_max(),
                samples: 1_000_000,
                gamma_samples: 20_000,
                min_cell: 1000,
                seed: 1,
            },
            chi,
        ))?;
        if k == 50.0 {
            retained50 = rep.retained_fraction;
        }
        errs.push((rep.weighted_error, rep.weighted_stderr));
    }
    ensure(
        errs[1].0 <= 0.1 && nonincreasing(&errs) && retained50 >= 0.8,
        format!(
            "weighted error at k=20/50/80: {:.4} {:.4} {:.4}; retained at k=50 {:.3}",
            errs[0].0, errs[1].0, errs[2].0, retained50
        ),
    )
}

// 7. Gap on the nonlinear IFS, none on the homogeneous one.
fn dolgopyat_gap() -> Check {
    let (depth, probes, beta) = (8, 64, 2.0);
    let nl = nonlinear();
    let grid: Vec<f64> = (1..=128).map(|i| 2.0 * i as f64).collect();
    let cal = lib(c6_calibrate(&nl, &grid, 4, depth, probes, 1))?;
    let rep = lib(dolgopyat_check(&nl, &grid, beta, depth, cal.c6, probes, 1))?;
    let worst_nl = rep.rows.iter().map(|r| r.norm_estimate).fold(0.0, f64::max);

    let hom = lebesgue();
    let resonant: Vec<f64> = (1..=16).map(|m| m as f64 / 2f64.ln()).filter(|t| *t > 1.0).collect();
    let cal_h = lib(c6_calibrate(&hom, &resonant, 4, depth, probes, 1))?;
    let rep_h = lib(dolgopyat_check(&hom, &resonant, beta, depth, cal_h.c6, probes, 1))?;
    let best_h = rep_h.rows.iter().map(|r| r.norm_estimate).fold(f64::MAX, f64::min);
    ensure(
        rep.rows.len() == grid.len() && worst_nl < 1.0 && best_h >= 1.0 - 1e-9,
        format!(
            "NL: C6 = {:.3}, max g = {worst_nl:.7} over {} theta; homogeneous: min g = {best_h:.12}",
            cal.c6,
            rep.rows.len()
        ),
    )
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// `d((a - b)x, Z)` with the product carried in double-double.
fn two_point_oracle(a: f64, b: f64, x: f64) -> f64 {
    let (s, e) = two_sum(a, -b);
    let p = s * x;
    let pe = s.mul_add(x, -p) + e * x;
    let f = (p - p.round()) + pe;
    (f - f.round()).abs()
}

// 8. Diophantine classifier.
fn diophantine() -> Check {
    let scan = ScanConfig {
        x_min: 10.0,
        x_max: 1e4,
        points: 4096,
    };
    let hom = lib(dio_exponent(&ratio_logs(&lebesgue()), &scan))?;
    let single = lib(dio_exponent(&[2f64.ln()], &scan))?;
    let trivial = matches!(hom.classification, Classification::NonDiophantine { .. })
        && matches!(single.classification, Classification::NonDiophantine { .. });

    let mut rng = stream_rng(8, 0xacc, 0);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (a, b, x) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(-10.0..10.0));
        worst = worst.max((dio_distance(&[a, b], x) - two_point_oracle(a, b, x) / 2.0).abs());
    }

    let t = [2f64.ln(), 3f64.ln(), 5f64.ln()];
    let p = lib(dio_exponent(&t, &scan))?;
    let (dio, detail) = match p.classification {
        Classification::Diophantine { c, ell } => (
            c > 0.0 && ell.is_finite(),
            format!("C = {c:.3e}, ell = {ell:.3}, {} envelope points", p.envelope.len()),
        ),
        Classification::NonDiophantine { x_witness } => {
            (false, format!("classified non-Diophantine at x = {x_witness}"))
        }
    };
    ensure(
        trivial && worst <= 1e-14 && dio,
        format!("trivial cases ok = {trivial}; two-point max error {worst:.1e}; (log2, log3, log5): {detail}"),
    )
}

// 9. Linearity test and conjugacy round trip.
fn conjugacy_round_trip() -> Check {
    let ns = [2, 4, 8, 16];
    let conj = exp_conjugated_lebesgue();
    let lin = lib(linearity_sup(&conj, &ns, 1024, 1))?;
    // sups that vanish to rounding count as decayed
    let decays = lin
        .sups
        .windows(2)
        .all(|w| w[1] <= 1e-12 || w[1] * 1.8 <= w[0]);

    let r = lib(conjugacy_construct(&conj, 1001, false, 1))?;
    let eta = Conjugacy::Exp { rate: 1.0 };
    let unit = lib(Interval::new(0.0, 1.0))?;
    let residual = second_difference_residual(|x| r.h(eta.eta(x)), unit, 1000);

    let nl: Ifs = nonlinear();
    let control = lib(linearity_sup(&nl, &ns, 1024, 1))?;
    let held = control.sups.iter().all(|&s| s >= 0.5 * control.sups[0]);
    ensure(
        decays && residual <= 1e-4 && held,
        format!(
            "conjugated sups {:?}; round-trip residual {residual:.2e}; NL sups {:.3?}",
            lin.sups, control.sups
        ),
    )
}

const NL_IFS: &str = r#"
[ifs]
interval = [0.0, 1.0]
probabilities = [0.5, 0.5]
[[ifs.maps]]
kind = "polynomial"
coefficients = [0.0, 0.5, 0.125]
[[ifs.maps]]
kind = "affine"
coefficients = [0.3333333333333333, 0.6666666666666666]
"#;

const TWO_RATIO_IFS: &str = r#"
[ifs]
interval = [0.0, 1.0]
probabilities = [0.5, 0.5]
[[ifs.maps]]
kind = "affine"
coefficients = [0.5, 0.0]
[[ifs.maps]]
kind = "affine"
coefficients = [0.3333333333333333, 0.6666666666666666]
"#;

const EXP_LEBESGUE_IFS: &str = r#"
[ifs]
interval = [0.0, 1.0]
probabilities = [0.5, 0.5]
[[ifs.maps]]
kind = "conjugated-affine"
coefficients = [0.5, 0.0]
conjugacy = "exp"
conjugacy_param = 1.0
[[ifs.maps]]
kind = "conjugated-affine"
coefficients = [0.5, 0.5]
conjugacy = "exp"
conjugacy_param = 1.0
"#;

/// Small-sample sections; several sample counts straddle the chunk size.
const SECTIONS: &str = r#"
[fourier]
q = [1.0, 7.5, 40.0]
samples = 9000
[decay_fit]
q_min = 100.0
q_max = 10000.0
points = 9
samples = 100000
[walk]
trajectories = 50
n = [5, 20]
cell_samples = 5000
stats = { samples = 9000, n = 50 }
[clt]
n = [50, 100]
stats = { samples = 9000, n = 50 }
[llt]
n = [20, 30]
samples = 9000
stats = { samples = 9000, n = 50 }
[smooth_llt]
n = [20]
samples = 9000
stats = { samples = 9000, n = 50 }
[cllt]
k = [10.0, 20.0]
h_prime = 4.0
samples = 9000
gamma_samples = 2000
min_cell = 50
stats = { samples = 9000, n = 50 }
[operator_eigen]
theta = [0.0, 0.05]
depth = 5
recentred = true
stats = { samples = 9000, n = 50 }
[dolgopyat]
theta = [2.0, 4.0, 8.0]
depth = 5
probes = 8
calibration_n = 2
[dio]
x_min = 10.0
x_max = 10000.0
points = 512
[linearity]
samples = 300
temporal_samples = 5000
[conjugate]
grid = 201
[decay_pipeline]
q_min = 100.0
q_max = 10000.0
points = 4
samples = 9000
stats = { samples = 9000, n = 50 }
"#;

const SUBCOMMANDS: [&str; 14] = [
    "validate",
    "fourier",
    "decay-fit",
    "walk",
    "clt",
    "llt",
    "smooth-llt",
    "cllt",
    "operator-eigen",
    "dolgopyat",
    "dio",
    "linearity",
    "conjugate",
    "decay-pipeline",
];

/// Sorted `(file name, bytes)` for every CSV in `dir`.
fn csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| {
            let p = e.ok()?.path();
            (p.extension()? == "csv").then(|| {
                (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
            })
        })
        .collect();
    out.sort();
    out
}

// 10. Byte-identical CSVs across repeat runs and worker counts.
fn determinism() -> Check {
    let tmp = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let mut files = 0;
    for sub in SUBCOMMANDS {
        let ifs = match sub {
            "clt" => TWO_RATIO_IFS,
            "conjugate" => EXP_LEBESGUE_IFS,
            _ => NL_IFS,
        };
        let mut reference: Option<Vec<(String, Vec<u8>)>> = None;
        for workers in [1, 8] {
            for rep in 0..2 {
                let dir = tmp.path().join(format!("{sub}-{workers}-{rep}"));
                let cfg = dir.with_extension("toml");
                fs::write(&cfg, format!("seed = 11\nworkers = {workers}\n{ifs}\n{SECTIONS}"))
                    .map_err(|e| e.to_string())?;
                let out = Command::new(env!("CARGO_BIN_EXE_ifs-decay"))
                    .arg(sub)
                    .arg(&cfg)
                    .arg("--out")
                    .arg(&dir)
                    .output()
                    .map_err(|e| e.to_string())?;
                if !out.status.success() {
                    return Err(format!(
                        "{sub} (workers {workers}) failed: {}",
                        String::from_utf8_lossy(&out.stderr).trim()
                    ));
                }
                let got = csvs(&dir);
                match &reference {
                    None => {
                        files += got.len();
                        reference = Some(got);
                    }
                    Some(r) if *r != got => {
                        return Err(format!("{sub}: CSVs differ at workers {workers}, run {rep}"));
                    }
                    _ => {}
                }
            }
        }
    }
    Ok(format!("{} subcommands, {files} CSVs, 4 runs each (workers 1 and 8)", SUBCOMMANDS.len()))
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Check,
}

fn main() -> ExitCode {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria = [
        Criterion { id: 1, name: "Lebesgue identity", budget: secs(10), run: lebesgue_identity },
        Criterion { id: 2, name: "Cantor non-decay", budget: secs(1), run: cantor_non_decay },
        Criterion { id: 3, name: "affine eigenvalue oracle", budget: secs(30), run: affine_eigen_oracle },
        Criterion { id: 4, name: "Berry-Esseen", budget: secs(5), run: berry_esseen },
        Criterion { id: 5, name: "LLT positivity", budget: secs(120), run: llt_positivity },
        Criterion { id: 6, name: "conditional LLT trend", budget: secs(180), run: conditional_trend },
        Criterion { id: 7, name: "Dolgopyat gap", budget: secs(300), run: dolgopyat_gap },
        Criterion { id: 8, name: "Diophantine classifier", budget: secs(30), run: diophantine },
        Criterion { id: 9, name: "conjugacy round trip", budget: secs(60), run: conjugacy_round_trip },
        Criterion { id: 10, name: "determinism", budget: None, run: determinism },
    ];
    // `cargo test -- <filter>` style selection by criterion number
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in criteria.iter().filter(|c| only.is_empty() || only.contains(&c.id)) {
        let start = Instant::now();
        let result = (c.run)();
        let took = start.elapsed();
        let over = c.budget.is_some_and(|b| took > b);
        let (ok, detail) = match result {
            Ok(d) if !over => (true, d),
            Ok(d) => (false, format!("{d}; over the {:?} budget", c.budget.unwrap())),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<26} {} ({:.1} s) {detail}",
            c.id,
            c.name,
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
