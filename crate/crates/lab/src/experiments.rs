//! Experiment bodies. Each returns a table plus a JSON summary; trials run in
//! parallel but rows are emitted in trial order.

use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use shearlab::blocks::{
    build_beta1, build_beta2, detect_shifting, nonshifting_select, shifting_sparsity,
    BlockParams, MatchedOrbitData, NonshiftingParams, SelectMode,
};
use shearlab::intervals::{random_partition, verify_solovay, Interval, IntervalFamily};
use shearlab::lie::{make_sl2_triple, LieElement};
use shearlab::quotient::reduce;
use shearlab::shear::{closeness_intervals_sl2, commutation_uubar};
use shearlab::time_change::{ratner_estimate_survey, sample_haar, trial_rng};
use shearlab::weight::decompose;
use shearlab::{LabError, Sl2Matrix, TimeChangeFn};

use crate::config::{
    BlocksParams, CommutationParams, DecomposeParams, Grid, HpropertyParams,
    NonshiftingParamsCfg, Params, ShearIntervalsParams, SolovayParams, TimechangeParams,
};

/// Columns drawn in `plot.svg`.
#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub title: String,
    pub x: usize,
    pub y: usize,
    pub log_x: bool,
    pub log_y: bool,
}

#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub summary: Value,
    pub plot: Option<PlotSpec>,
}

/// Shortest round-trip formatting; exponent form outside `[1e-4, 1e7)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e7).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn run(params: &Params, seed: u64) -> Result<Table, LabError> {
    match params {
        Params::Decompose(p) => decompose_exp(p),
        Params::ShearIntervals(p) => shear_intervals(p),
        Params::Solovay(p) => solovay(p, seed),
        Params::Commutation(p) => commutation(p),
        Params::Timechange(p) => timechange(p, seed),
        Params::Hproperty(p) => hproperty(p, seed),
        Params::Blocks(p) => blocks(p, seed),
        Params::Nonshifting(p) => nonshifting(p, seed),
    }
}

fn decompose_exp(p: &DecomposeParams) -> Result<Table, LabError> {
    let d = decompose(p.n, &make_sl2_triple(p.n)?)?;
    let rows = d
        .modules()
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let tag = serde_json::to_value(m.tag).expect("enum serializes");
            vec![
                i.to_string(),
                tag.as_str().unwrap_or_default().to_string(),
                m.highest_weight.to_string(),
                m.dim().to_string(),
            ]
        })
        .collect();
    Ok(Table {
        header: vec!["module", "tag", "highest_weight", "dim"],
        rows,
        summary: json!({
            "n": p.n,
            "modules": d.modules().len(),
            "total_dim": d.modules().iter().map(|m| m.dim()).sum::<usize>(),
            "relation_residual": d.relation_residual(),
        }),
        plot: Some(PlotSpec {
            title: format!("weight modules, n = {}", p.n),
            x: 0,
            y: 2,
            log_x: false,
            log_y: false,
        }),
    })
}

fn shear_intervals(p: &ShearIntervalsParams) -> Result<Table, LabError> {
    let h = Sl2Matrix::a_flow(p.omega).mul(&Sl2Matrix::ubar(p.b));
    let out = closeness_intervals_sl2(&h, p.eps, p.kappa, p.r0, p.c, p.s_max, p.grid)?;
    let rows = out
        .family
        .intervals()
        .iter()
        .enumerate()
        .map(|(i, iv)| vec![i.to_string(), num(iv.lo), num(iv.hi), num(iv.len())])
        .collect();
    Ok(Table {
        header: vec!["interval", "lo", "hi", "length"],
        rows,
        summary: json!({
            "intervals": out.family.len(),
            "l_bar1": out.l_bar1,
            "b_const": out.b_const,
            "ad_const": out.ad_const,
        }),
        plot: Some(PlotSpec {
            title: "closeness intervals".into(),
            x: 1,
            y: 2,
            log_x: false,
            log_y: false,
        }),
    })
}

fn solovay(p: &SolovayParams, seed: u64) -> Result<Table, LabError> {
    let reports = (0..p.trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = trial_rng(seed, k as u64);
            let lambda = rng.gen_range(p.lambda_min.ln()..=p.lambda_max.ln()).exp();
            let part = random_partition(&mut rng, lambda, p.zeta, p.eta)?;
            verify_solovay(&part, p.c)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let rows = reports
        .iter()
        .enumerate()
        .map(|(k, r)| {
            vec![
                k.to_string(),
                num(r.lambda),
                num(r.ratio),
                num(r.theta),
                r.holds.to_string(),
                r.vacuous.to_string(),
            ]
        })
        .collect();
    let min_ratio = reports.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    Ok(Table {
        header: vec!["trial", "lambda", "bad_ratio", "theta", "holds", "vacuous"],
        rows,
        summary: json!({
            "trials": p.trials,
            "theta": reports.first().map(|r| r.theta),
            "min_ratio": min_ratio,
            "all_hold": reports.iter().all(|r| r.holds),
        }),
        plot: Some(PlotSpec {
            title: "bad fraction against λ".into(),
            x: 1,
            y: 2,
            log_x: true,
            log_y: false,
        }),
    })
}

fn commutation(p: &CommutationParams) -> Result<Table, LabError> {
    let m = match p.grid {
        Grid::Coarse => 20,
        Grid::Fine => 100,
    };
    let mut rows = Vec::with_capacity(m * m);
    let mut worst = 0.0f64;
    for i in 0..m {
        // Symmetric grid that skips t = 0.
        let t = p.t_max * (2.0 * (i as f64 + 0.5) / m as f64 - 1.0);
        for j in 0..m {
            let rt = p.rt_max * (2.0 * j as f64 / (m - 1) as f64 - 1.0);
            let r = rt / t;
            let lhs = Sl2Matrix::u(t).mul(&Sl2Matrix::ubar(r));
            let res = lhs.max_diff(&commutation_uubar(t, r)?.product()) / lhs.max_abs().max(1.0);
            worst = worst.max(res);
            rows.push(vec![num(t), num(r), num(res)]);
        }
    }
    Ok(Table {
        header: vec!["t", "r", "residual"],
        rows,
        summary: json!({ "points": m * m, "max_residual": worst }),
        plot: Some(PlotSpec {
            title: "relative residual of the commutation identity".into(),
            x: 0,
            y: 2,
            log_x: false,
            log_y: false,
        }),
    })
}

fn timechange(p: &TimechangeParams, seed: u64) -> Result<Table, LabError> {
    let tau = TimeChangeFn::default_bump(p.amplitude)?;
    let rep = ratner_estimate_survey(&tau, p.eps_target, p.samples, (p.t_min, p.t_max), p.rt_max, seed)?;
    let rows = rep
        .records
        .iter()
        .enumerate()
        .map(|(k, (t, r, e))| vec![k.to_string(), num(*t), num(*r), num(*e)])
        .collect();
    Ok(Table {
        header: vec!["sample", "t", "r", "relative_error"],
        rows,
        summary: json!({
            "amplitude": rep.amplitude,
            "quantiles": { "p50": rep.p50, "p90": rep.p90, "p99": rep.p99 },
            "excluded_count": rep.excluded,
            "fraction_below": rep.fraction_below,
            "eps_target": rep.eps_target,
            "seed": rep.seed,
        }),
        plot: Some(PlotSpec {
            title: format!("|Δτ − Δ|/|Δ|, amplitude {}", p.amplitude),
            x: 1,
            y: 3,
            log_x: true,
            log_y: false,
        }),
    })
}

fn hproperty(p: &HpropertyParams, seed: u64) -> Result<Table, LabError> {
    let triple = make_sl2_triple(p.n)?;
    let d = decompose(p.n, &triple)?;
    let dim = shearlab::lie::dim(p.n);
    let rows = (0..p.samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = trial_rng(seed, k as u64);
            let coords: Vec<f64> = (0..dim).map(|_| p.scale * rng.gen_range(-1.0..1.0)).collect();
            let v = LieElement::from_coords(p.n, &coords)?;
            let l = d.first_time_norm(&v, p.lambda)?;
            let fm = d.fastest_motion(&v, l);
            Ok(vec![
                k.to_string(),
                num(v.norm()),
                num(l),
                num(fm.q.norm()),
                num(fm.q_prime.norm()),
            ])
        })
        .collect::<Result<Vec<_>, LabError>>()?;
    Ok(Table {
        header: vec!["sample", "norm_v", "first_time", "q_norm", "q_prime_norm"],
        rows,
        summary: json!({ "n": p.n, "samples": p.samples, "lambda": p.lambda }),
        plot: Some(PlotSpec {
            title: format!("first time ‖q‖ = {}", p.lambda),
            x: 1,
            y: 2,
            log_x: true,
            log_y: true,
        }),
    })
}

fn blocks(p: &BlocksParams, seed: u64) -> Result<Table, LabError> {
    let mut rng = trial_rng(seed, 0);
    let gx = reduce(&sample_haar(&mut rng, Some(2.0)))?.rep;
    let gy = Sl2Matrix::ubar(p.b).mul(&gx);
    let data = MatchedOrbitData::identity_times(gx, gy, p.lambda)?;
    let params = BlockParams {
        word_cap: p.word_cap,
        ..BlockParams::new(p.eps)
    };
    let beta1 = build_beta1(&data, p.lambda, &params)?;
    let beta2 = build_beta2(&beta1, p.eta, p.r0, p.big_r0)?;
    let mut rows = Vec::new();
    let mut nontrivial = 0;
    for (i, b) in beta1.iter().enumerate() {
        let shift = match beta1.get(i + 1) {
            None => String::new(),
            Some(next) => match detect_shifting(b, next, p.word_cap, p.eps) {
                Ok(s) if s.trivial => "trivial".into(),
                Ok(_) => {
                    nontrivial += 1;
                    "nontrivial".into()
                }
                Err(LabError::CuspAmbiguity(_)) => "ambiguous".into(),
                Err(LabError::Matching { .. }) => "unmatched".into(),
                Err(e) => return Err(e),
            },
        };
        rows.push(vec![
            "beta1".into(),
            i.to_string(),
            num(b.r()),
            num(b.r_bar()),
            num(b.len()),
            b.merged.to_string(),
            num(b.start.distance),
            num(b.end.distance),
            shift,
            String::new(),
        ]);
    }
    for (i, b) in beta2.iter().enumerate() {
        let sp = shifting_sparsity(b, &data, &params)?;
        rows.push(vec![
            "beta2".into(),
            i.to_string(),
            num(b.r()),
            num(b.r_bar()),
            num(b.len()),
            b.merged.to_string(),
            num(b.start.distance),
            num(b.end.distance),
            String::new(),
            num(sp.measure),
        ]);
    }
    Ok(Table {
        header: vec![
            "stage",
            "index",
            "r",
            "r_bar",
            "length",
            "merged",
            "start_distance",
            "end_distance",
            "shift_to_next",
            "far_measure",
        ],
        rows,
        summary: json!({
            "beta1_blocks": beta1.len(),
            "beta2_blocks": beta2.len(),
            "nontrivial_shifts": nontrivial,
            "last_merge_stopped": beta2.last().map(|b| b.merge_stopped),
        }),
        plot: Some(PlotSpec {
            title: "block start against length".into(),
            x: 2,
            y: 4,
            log_x: false,
            log_y: false,
        }),
    })
}

/// `n` disjoint families tiling `[0, λ]` with random piece lengths and a bias towards one family.
pub fn random_families<R: Rng>(rng: &mut R, n: usize, lambda: f64) -> Result<Vec<IntervalFamily>, LabError> {
    let mut raw: Vec<Vec<Interval>> = vec![Vec::new(); n];
    let favourite = rng.gen_range(0..n);
    let mut r = 0.0;
    while r < lambda {
        let len = 10f64.powf(rng.gen_range(0.0..3.0)).min(lambda - r);
        let who = if rng.gen_bool(0.6) { favourite } else { rng.gen_range(0..n) };
        raw[who].push(Interval::new(r, r + len)?);
        r += len;
    }
    raw.into_iter()
        .map(|v| IntervalFamily::from_unsorted(v, lambda))
        .collect()
}

fn nonshifting(p: &NonshiftingParamsCfg, seed: u64) -> Result<Table, LabError> {
    let np = NonshiftingParams {
        sigma: p.sigma,
        eta: p.eta,
        c: p.c,
        r0: 1.0,
        big_r0: 1.0,
    };
    let sels = (0..p.instances)
        .into_par_iter()
        .map(|k| {
            let mut rng = trial_rng(seed, k as u64);
            let fams = random_families(&mut rng, p.n, p.lambda)?;
            nonshifting_select(&fams, p.lambda, &np, &SelectMode::Synthetic)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let rows = sels
        .iter()
        .enumerate()
        .map(|(k, s)| {
            vec![
                k.to_string(),
                s.index.to_string(),
                num(s.block.lo),
                num(s.block.hi),
                num(s.nonshifting),
                num(s.thresholds.vartheta * p.lambda),
                s.contract_holds(p.lambda).to_string(),
            ]
        })
        .collect();
    let th = sels.first().map(|s| s.thresholds);
    Ok(Table {
        header: vec![
            "instance",
            "family",
            "block_lo",
            "block_hi",
            "nonshifting",
            "vartheta_lambda",
            "contract",
        ],
        rows,
        summary: json!({
            "thresholds": th,
            "all_contracts_hold": sels.iter().all(|s| s.contract_holds(p.lambda)),
            "lambda_below_lambda0": sels.first().map(|s| s.lambda_below_lambda0),
        }),
        plot: Some(PlotSpec {
            title: "non-shifting measure per instance".into(),
            x: 0,
            y: 4,
            log_x: false,
            log_y: false,
        }),
    })
}
