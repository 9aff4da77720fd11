use std::collections::BTreeMap;

use ifs_decay::cocycle::{self, lyapunov_chi, partition_cell, trajectory_length};
use ifs_decay::diophantine::{
    box_dim_estimate, dio_condition_ls, dio_exponent, dyadic_scales, ratio_logs, Classification,
    ScanConfig,
};
use ifs_decay::limit::{
    clt_error, conditional_llt, llt_ratio, smooth_llt, CltMethod, ConditionalLltConfig,
    DensityConvention, LltConfig, WalkStats,
};
use ifs_decay::linearity::{conjugacy_construct, linearity_sup, sample_temporal};
use ifs_decay::mc::{self, tag};
use ifs_decay::measure::{self, decay_fit, decay_fit_from, geometric_grid, MeasureSampler};
use ifs_decay::transfer::{
    c6_calibrate, default_depth, dolgopyat_check, leading_eigen, OperatorConfig,
    TransferOperator,
};
use ifs_decay::{Ifs, Word};

use crate::config::{ExperimentConfig, StatsConfig};
use crate::error::CliError;
use crate::output::{Csv, RunOutput};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Validate,
    Fourier,
    DecayFit,
    Walk,
    Clt,
    Llt,
    SmoothLlt,
    Cllt,
    OperatorEigen,
    Dolgopyat,
    Dio,
    Linearity,
    Conjugate,
    DecayPipeline,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Fourier => "fourier",
            Command::DecayFit => "decay-fit",
            Command::Walk => "walk",
            Command::Clt => "clt",
            Command::Llt => "llt",
            Command::SmoothLlt => "smooth-llt",
            Command::Cllt => "cllt",
            Command::OperatorEigen => "operator-eigen",
            Command::Dolgopyat => "dolgopyat",
            Command::Dio => "dio",
            Command::Linearity => "linearity",
            Command::Conjugate => "conjugate",
            Command::DecayPipeline => "decay-pipeline",
        }
    }
}

/// Runs one subcommand. `validate` returns its output even on failure so the
/// report can still be written; the flag says whether it passed.
pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<(RunOutput, bool), CliError> {
    if cmd == Command::Validate {
        return validate(cfg);
    }
    let ifs = cfg.ifs()?;
    let out = match cmd {
        Command::Validate => unreachable!(),
        Command::Fourier => fourier(&ifs, cfg),
        Command::DecayFit => decay_fit_cmd(&ifs, cfg),
        Command::Walk => walk(&ifs, cfg),
        Command::Clt => clt(&ifs, cfg),
        Command::Llt => llt(&ifs, cfg),
        Command::SmoothLlt => smooth(&ifs, cfg),
        Command::Cllt => cllt(&ifs, cfg),
        Command::OperatorEigen => eigen(&ifs, cfg),
        Command::Dolgopyat => dolgopyat(&ifs, cfg),
        Command::Dio => dio(&ifs, cfg),
        Command::Linearity => linearity(&ifs, cfg),
        Command::Conjugate => conjugate(&ifs, cfg),
        Command::DecayPipeline => pipeline(&ifs, cfg),
    }?;
    Ok((out, true))
}

fn validate(cfg: &ExperimentConfig) -> Result<(RunOutput, bool), CliError> {
    let ifs = cfg.ifs_unchecked()?;
    let rep = ifs.validate();
    let mut out = RunOutput::default();
    for line in rep.to_string().lines() {
        out.note(line);
    }
    Ok((out, rep.passed()))
}

fn walk_stats(ifs: &Ifs, s: &StatsConfig, seed: u64) -> Result<WalkStats, CliError> {
    Ok(WalkStats::estimate(ifs, s.samples, s.n, seed)?)
}

fn chi(ifs: &Ifs, s: &StatsConfig, seed: u64) -> Result<f64, CliError> {
    Ok(lyapunov_chi(ifs, s.samples, s.n, seed)?.value)
}

fn tail_word(ifs: &Ifs, tail: &[u8]) -> Result<Word, CliError> {
    if tail.iter().any(|&s| s == 0 || s as usize > ifs.len()) {
        return Err(CliError::Config(format!(
            "tail symbols must lie in 1..={}",
            ifs.len()
        )));
    }
    Ok(Word::from_one_based(tail))
}

fn fourier(ifs: &Ifs, cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let c = &cfg.fourier;
    let qmax = c.q.iter().fold(0.0f64, |m, q| m.max(q.abs()));
    let depth = match c.depth {
        Some(d) => d,
        None => measure::auto_depth(ifs, qmax.max(1.0))?,
    };
    let est = MeasureSampler::new(ifs, depth, cfg.seed, c.samples).fourier_mc_many(&c.q)?;
    let mut csv = Csv::new("fourier.csv", &["q", "re", "im", "modulus", "stderr", "depth"]);
    for e in &est {
        csv.row(&[&e.q, &e.value.re, &e.value.im, &e.modulus(), &e.stderr, &e.depth]);
    }
    let mut out = RunOutput::default();
    let worst = est.iter().map(|e| e.modulus()).fold(0.0, f64::max);
    out.note(format!("depth={depth} samples={} max_modulus={worst}", c.samples));
    out.note(format!("noise gate 3/sqrt(N) = {}", 3.0 / (c.samples as f64).sqrt()));
    out.files.push(csv);
    Ok(out)
}

fn decay_fit_cmd(ifs: &Ifs, cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let c = &cfg.decay_fit;
    let grid = geometric_grid(c.q_min, c.q_max, c.points);
    let fit = decay_fit(ifs, &grid, c.samples, cfg.seed)?;
    let mut csv = Csv::new(
        "decay_fit.csv",
        &["alpha_hat", "C_hat", "rms", "noise_floor", "n_points"],
    );
    csv.row(&[&fit.alpha_hat, &fit.c_hat, &fit.rms, &fit.noise_floor, &fit.n_points]);
    let mut out = RunOutput::default();
    out.note(format!(
        "alpha_hat={} C_hat={} from {} of {} frequencies (depth {})",
        fit.alpha_hat,
        fit.c_hat,
        fit.n_points,
        grid.len(),
        fit.depth
    ));
    out.files.push(csv);
    Ok(out)
}

fn walk(ifs: &Ifs, cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let c = &cfg.walk;
    let stats = walk_stats(ifs, &c.stats, cfg.seed)?;
    let sums = cocycle::random_sums(ifs, c.trajectories, &c.n, cfg.seed, tag::WALK);
    let mut walk = Csv::new("walk.csv", &["trajectory_id", "n", "S_n"]);
    for (id, s) in sums.iter().enumerate() {
        for (n, v) in c.n.iter().zip(s) {
            walk.row(&[&id, n, v]);
        }
    }
    let len = trajectory_length(ifs, c.k, c.h_prime, stats.chi);
    let labels = mc::sample_vec(c.cell_samples, cfg.seed, tag::WALK ^ 0x100, |rng| {
        let w = ifs.sampler().word(rng, len);
        partition_cell(ifs, &w, c.k, c.h_prime, stats.chi).map(|cell| cell.label)
    });
    let mut counts: BTreeMap<Word, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l?).or_default() += 1;
    }
    let mut cells = Csv::new("cells.csv", &["label", "count", "k", "h_prime"]);
    for (label, count) in &counts {
        cells.row(&[&label.label(), count, &c.k, &c.h_prime]);
    }
    let mut out = RunOutput::default();
    out.note(format!("chi={} (stderr {})", stats.chi, stats.chi_stderr));
    out.note(format!(
        "r0^2={} (stderr {}){}",
        stats.variance.r0_sq,
        stats.variance.stderr,
        if stats.variance.degenerate { " degenerate" } else { "" }
    ));
    out.note(format!("D={} D'={}", ifs.d_min(), ifs.d_max()));
    out.note(format!("{} partition cells over {} samples", counts.len(), c.cell_samples));
    out.files.push(walk);
    out.files.push(cells);
    Ok(out)
}

fn clt(ifs: &Ifs, cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let c = &cfg.clt;
    let stats = walk_stats(ifs, &c.stats, cfg.seed)?;
    let method = match c.method.as_str() {
        "exact" => CltMethod::Exact,
        _ => CltMethod::MonteCarlo {
            samples: c.samples,
            seed: cfg.seed,
        },
    };
    let mut csv = Csv::new("clt.csv", &["n", "kolmogorov_distance", "method"]);
    for &n in &c.n {
        let d = clt_error(ifs, n, method, &stats)?;
        csv.row(&[&n, &d, &c.method]);
    }
    let mut out = RunOutput::default();
    out.note(format!("chi={} r0^2={}", stats.chi, stats.variance.r0_sq));
    out.files.push(csv);
    Ok(out)
}

fn llt(ifs: &Ifs, cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let c = &cfg.llt;
    let stats = walk_stats(ifs, &c.stats, cfg.seed)?;
    let tail = tail_word(ifs, &c.tail)?;
    let convention = match c.convention.as_str() {
        "literal" => DensityConvention::Literal,
        _ => DensityConvention::Standard,
    };
    let mut csv = Csv::new(
        "llt.csv",
        &["n", "v", "c_lo", "c_hi", "mass", "gn", "ratio", "stderr"],
    );
    let mut out = RunOutput::default();
    for &n in &c.n {
        let rep = llt_ratio(
            ifs,
            &LltConfig {
                n,
                tail: tail.clone(),
                c_lo: c.c_lo,
                c_hi: c.c_hi,
                v: c.v,
                samples: c.samples,
                seed: cfg.seed,
                r_const: c.r_const,
                convention,
            },
            &stats,
        )?;
        csv.row(&[&n, &rep.v, &rep.c_lo, &rep.c_hi, &rep.mass, &rep.gn, &rep.ratio, &rep.stderr]);
        if let Some(w) = rep.warning {
            out.note(format!("n={n}: {w}"));
        }
    }
    out.note(format!(
        "chi={} r0^2={} lambda(C)={}",
        stats.chi,
        stats.variance.r0_sq,
        (c.c_hi - c.c_lo).max(0.0)
    ));
    out.files.push(csv);
    Ok(out)
}

fn smooth(ifs: &Ifs, cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let c = &cfg.smooth_llt;
    let stats = walk_stats(ifs, &c.stats, cfg.seed)?;
    let tail = tail_word(ifs, &c.tail)?;
    let mut csv = Csv::new(
        "smooth_llt.csv",
        &["n", "c_lo", "c_hi", "eps", "lhs", "lhs_stderr", "rhs", "difference"],
    );
    for &n in &c.n {
        let r = smooth_llt(ifs, &tail, n, c.c_lo, c.c_hi, c.eps, c.samples, cfg.seed, &stats)?;
        csv.row(&[&n, &c.c_lo, &c.c_hi, &c.eps, &r.lhs, &r.lhs_stderr, &r.rhs, &r.difference]);
    }
    let mut out = RunOutput::default();
    out.note(format!("chi={} r0^2={}", stats.chi, stats.variance.r0_sq));
    out.files.push(csv);
    Ok(out)
}

fn cllt(ifs: &Ifs, cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let c = &cfg.cllt;
    if !(0.0 <= c.j_lo_frac && c.j_lo_frac <= c.j_hi_frac && c.j_hi_frac <= 1.0) {
        return Err(CliError::Config(
            "cllt needs 0 <= j_lo_frac <= j_hi_frac <= 1".into(),
        ));
    }
    let chi = chi(ifs, &c.stats, cfg.seed)?;
    let mut csv = Csv::new(
        "cllt.csv",
        &["k", "h_prime", "cell_label", "count", "emp_prob", "gamma_prob", "abs_err"],
    );
    let mut out = RunOutput::default();
    out.note(format!("chi={chi}"));
    for &k in &c.k {
        let base = k * chi;
        let rep = conditional_llt(
            ifs,
            &ConditionalLltConfig {
                k,
                h_prime: c.h_prime,
                j_lo: base + c.j_lo_frac * ifs.d_max(),
                j_hi: base + c.j_hi_frac * ifs.d_max(),
                samples: c.samples,
                gamma_samples: c.gamma_samples,
                min_cell: c.min_cell,
                seed: cfg.seed,
            },
            chi,
        )?;
        for cell in &rep.cells {
            csv.row(&[
                &k,
                &c.h_prime,
                &cell.label.label(),
                &cell.count,
                &cell.emp_prob,
                &cell.gamma_prob,
                &cell.abs_err,
            ]);
        }
        out.note(format!(
            "k={k}: weighted error {} (stderr {}), retained fraction {}, {} cells kept, {} dropped",
            rep.weighted_error,
            rep.weighted_stderr,
            rep.retained_fraction,
            rep.cells.len(),
            rep.dropped_cells
        ));
    }
    out.files.push(csv);
    Ok(out)
}

fn eigen(ifs: &Ifs, cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let c = &cfg.operator_eigen;
    let depth = c.depth.unwrap_or_else(|| default_depth(ifs.len()));
    let chi = if c.recentred { chi(ifs, &c.stats, cfg.seed)? } else { 0.0 };
    let mut csv = Csv::new("eigen.csv", &["theta", "re_lambda", "im_lambda", "iterations"]);
    for &theta in &c.theta {
        let op = TransferOperator::new(
            ifs,
            OperatorConfig {
                theta,
                depth,
                recentred: c.recentred,
                chi,
            },
        )?;
        let e = leading_eigen(&op)?;
        csv.row(&[&theta, &e.lambda.re, &e.lambda.im, &e.iterations]);
    }
    let mut out = RunOutput::default();
    out.note(format!("depth={depth} recentred={} chi={chi}", c.recentred));
    out.files.push(csv);
    Ok(out)
}

fn dolgopyat(ifs: &Ifs, cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let c = &cfg.dolgopyat;
    let depth = c.depth.unwrap_or_else(|| default_depth(ifs.len()));
    let mut out = RunOutput::default();
    let c6 = match c.c6 {
        Some(v) => v,
        None => {
            let cal = c6_calibrate(ifs, &c.theta, c.calibration_n, depth, c.probes, cfg.seed)?;
            out.note(format!(
                "C6={} (start {}, {} doublings)",
                cal.c6, cal.start, cal.doublings
            ));
            cal.c6
        }
    };
    let rep = dolgopyat_check(ifs, &c.theta, c.beta, depth, c6, c.probes, cfg.seed)?;
    let mut csv = Csv::new(
        "dolgopyat.csv",
        &["theta", "n_beta_theta", "norm_estimate", "one_minus_norm"],
    );
    for r in &rep.rows {
        csv.row(&[&r.theta, &r.n, &r.norm_estimate, &r.one_minus_norm]);
    }
    let worst = rep.rows.iter().map(|r| r.norm_estimate).fold(0.0, f64::max);
    out.note(format!("depth={depth} probes={} max g={worst}", c.probes));
    match rep.fit {
        Some((cc, alpha)) => out.note(format!("fit 1-g ~ C theta^-alpha: C={cc} alpha={alpha}")),
        None => out.note("fewer than two rows with a gap; no fit"),
    }
    out.files.push(csv);
    Ok(out)
}

fn dio(ifs: &Ifs, cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let c = &cfg.dio;
    let t = c.t.clone().unwrap_or_else(|| ratio_logs(ifs));
    let scan = ScanConfig {
        x_min: c.x_min,
        x_max: c.x_max,
        points: c.points,
    };
    let p = match c.mode.as_str() {
        "ls" => dio_condition_ls(&t, &scan)?,
        _ => dio_exponent(&t, &scan)?,
    };
    let mut csv = Csv::new("dio.csv", &["x", "distance"]);
    for (x, d) in p.xs.iter().zip(&p.distances) {
        csv.row(&[x, d]);
    }
    let mut out = RunOutput::default();
    out.note(format!("t={t:?} mode={} range=[{}, {}]", c.mode, c.x_min, c.x_max));
    match p.classification {
        Classification::NonDiophantine { x_witness } => {
            out.note(format!("non-Diophantine on the scanned range (near-zero at x={x_witness})"))
        }
        Classification::Diophantine { c, ell } => out.note(format!(
            "Diophantine on the scanned range: C={c} ell={ell} ({} envelope points)",
            p.envelope.len()
        )),
    }
    out.files.push(csv);
    Ok(out)
}

fn linearity(ifs: &Ifs, cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let c = &cfg.linearity;
    let rep = linearity_sup(ifs, &c.n, c.samples, cfg.seed)?;
    let mut lin = Csv::new("linearity.csv", &["n", "sup"]);
    for (n, s) in rep.ns.iter().zip(&rep.sups) {
        lin.row(&[n, s]);
    }
    let vals = sample_temporal(ifs, c.temporal_n, c.temporal_samples, cfg.seed)?;
    let mut temporal = Csv::new("temporal.csv", &["sample_id", "n", "D_n"]);
    for (i, v) in vals.iter().enumerate() {
        temporal.row(&[&i, &c.temporal_n, v]);
    }
    let mut out = RunOutput::default();
    out.note(format!(
        "linearity sups {:?}; {}",
        rep.sups,
        if rep.decays() { "decays (conjugate-to-linear signature)" } else { "no decay" }
    ));
    match box_dim_estimate(&vals, &dyadic_scales(c.scale_from, c.scale_to)) {
        Ok(b) => out.note(format!(
            "box dimension of sampled D_n: {}{}",
            b.dimension,
            if b.degenerate { " (all values equal)" } else { "" }
        )),
        Err(e) => out.note(format!("box dimension skipped: {e}")),
    }
    out.files.push(lin);
    out.files.push(temporal);
    Ok(out)
}

fn conjugate(ifs: &Ifs, cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let c = &cfg.conjugate;
    let r = conjugacy_construct(ifs, c.grid, c.force, cfg.seed)?;
    let mut csv = Csv::new("conjugacy.csv", &["x", "phi1", "h", "residual_g2"]);
    for row in &r.rows {
        csv.row(&[&row.x, &row.phi1, &row.h, &row.residual_g2]);
    }
    let mut out = RunOutput::default();
    out.note(format!(
        "sup |g''| over attractor sample = {} (second differences, delta {})",
        r.sup_residual, r.delta
    ));
    out.note(format!("linearity sups {:?}", r.linearity.sups));
    out.files.push(csv);
    Ok(out)
}

/// Solves `ln q = (δ₀/4) ln k + (k + √k) χ` for `k > 0` by bisection.
fn schedule_k(q: f64, chi: f64, delta0: f64) -> f64 {
    let f = |k: f64| 0.25 * delta0 * k.ln() + (k + k.sqrt()) * chi - q.ln();
    let (mut lo, mut hi) = (1e-12, 1.0);
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn pipeline(ifs: &Ifs, cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let c = &cfg.decay_pipeline;
    if !(c.delta0 >= 0.0) {
        return Err(CliError::Config("decay_pipeline.delta0 must be >= 0".into()));
    }
    let chi = chi(ifs, &c.stats, cfg.seed)?;
    let grid = geometric_grid(c.q_min, c.q_max, c.points);
    let depth = measure::auto_depth(ifs, c.q_max)?;
    let est = MeasureSampler::new(ifs, depth, cfg.seed, c.samples).fourier_mc_many(&grid)?;
    let mut csv = Csv::new(
        "pipeline.csv",
        &["q", "k", "h_prime", "tau_scale", "modulus", "stderr", "depth"],
    );
    for e in &est {
        let k = schedule_k(e.q, chi, c.delta0);
        let h = k.sqrt();
        csv.row(&[&e.q, &k, &h, &((k + h) * chi), &e.modulus(), &e.stderr, &depth]);
    }
    let mut out = RunOutput::default();
    out.note(format!("chi={chi} delta0={} depth={depth}", c.delta0));
    match decay_fit_from(&est, c.samples, depth) {
        Ok(f) => out.note(format!(
            "decay fit over the schedule: alpha_hat={} C_hat={} ({} points above the noise floor)",
            f.alpha_hat, f.c_hat, f.n_points
        )),
        Err(e) => out.note(format!("decay fit unavailable: {e}")),
    }
    out.files.push(csv);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_inverts() {
        let (chi, d0) = (0.76, 0.5);
        for q in [1e2, 1e4, 1e6] {
            let k = schedule_k(q, chi, d0);
            let back = (0.25 * d0 * k.ln() + (k + k.sqrt()) * chi).exp();
            assert!((back / q - 1.0).abs() < 1e-10);
        }
    }
}
