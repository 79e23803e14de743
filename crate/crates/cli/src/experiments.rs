use std::f64::consts::PI;

use anyhow::{Context, Result};
use crossmode_core::collisions::{
    optimal_collision_tau, raw_energy_sum_k, run_chain, ChargerState,
};
use crossmode_core::effective::{delta_u_joint, doublet_rabi, EffectiveParams};
use crossmode_core::fulldyn::{dispersive_residual, SystemSpec};
use crossmode_core::hilbert::{c, DensityMatrix};
use crossmode_core::lindblad::{integrate_observed, DissipationSpec, IntegratorOptions};
use crossmode_core::observables::EnergyReport;
use crossmode_core::states::{
    alpha_opt, dts, fock, gibbs_oscillator, inefficient_spats, npats, qubit_thermal,
    qubit_with_ground, qutrit_thermal, spats, ThermalSpec,
};
use crossmode_core::{Level, ProductIndex};

use crate::checks;
use crate::config::{ChargeSection, ChargerKind, Experiment, ExperimentConfig};
use crate::report::{num, Report};

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    match cfg.experiment {
        Experiment::SingleCharge => single_charge(cfg),
        Experiment::Reset => reset(cfg),
        Experiment::EtaSweep => eta_sweep(cfg),
        Experiment::Dissipation => dissipation(cfg),
        Experiment::Collisions => collisions(cfg),
        Experiment::ValidateDispersive => validate_dispersive(cfg),
        Experiment::AppendixChecks => checks::appendix(cfg.tbar, cfg.seed, &cfg.appendix_checks),
    }
}

fn grid(horizon: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|j| horizon * j as f64 / (points - 1) as f64)
        .collect()
}

/// Mode and battery frequencies fixed by χ and Δ/Ω.
struct Frequencies {
    omega_l: f64,
    omega_r: f64,
    omega_eg: f64,
}

fn frequencies(cfg: &ExperimentConfig) -> Result<Frequencies> {
    let s = SystemSpec::dispersive(cfg.chi, cfg.dispersive_ratio, 2, 2)?;
    Ok(Frequencies {
        omega_l: s.omega_l(),
        omega_r: s.omega_r(),
        omega_eg: s.omega_eg(),
    })
}

struct Charger {
    state: DensityMatrix,
    alpha: Option<f64>,
}

fn charger_state(
    kind: ChargerKind,
    n_added: usize,
    alpha: Option<f64>,
    eta: f64,
    spec: &ThermalSpec,
) -> Result<Charger> {
    let state = match kind {
        ChargerKind::Fock => fock(n_added, spec.cutoff)?,
        ChargerKind::Spats => spats(spec)?,
        ChargerKind::Npats => npats(n_added, spec)?,
        ChargerKind::Mixture => inefficient_spats(eta, spec)?,
        ChargerKind::Thermal => gibbs_oscillator(spec),
        ChargerKind::Dts => {
            let a = alpha.unwrap_or_else(|| alpha_opt(n_added, spec));
            return Ok(Charger {
                state: dts(c(a), spec).context("displaced thermal state")?,
                alpha: Some(a),
            });
        }
    };
    Ok(Charger { state, alpha: None })
}

/// The mode that receives the excitation: vacuum next to a Fock input,
/// thermal otherwise.
fn partner_state(kind: ChargerKind, spec: &ThermalSpec) -> Result<DensityMatrix> {
    Ok(match kind {
        ChargerKind::Fock => fock(0, spec.cutoff)?,
        _ => gibbs_oscillator(spec),
    })
}

fn battery(s: &ChargeSection, tbar: f64, omega_eg: f64) -> Result<(f64, f64)> {
    let q = match s.qubit_pg {
        Some(p) => qubit_with_ground(p)?,
        None => qubit_thermal(tbar, omega_eg)?,
    };
    let p = q.populations();
    Ok((p[0], p[1]))
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn single_charge(cfg: &ExperimentConfig) -> Result<Report> {
    let s = &cfg.single_charge;
    let f = frequencies(cfg)?;
    let lspec = ThermalSpec::new(cfg.tbar, f.omega_l, cfg.cutoff_left)?;
    let rspec = ThermalSpec::new(cfg.tbar, f.omega_r, cfg.cutoff_right)?;
    let left = charger_state(s.charger, s.n_added, s.alpha, s.eta, &lspec)?;
    let right = partner_state(s.charger, &rspec)?;
    let pq = battery(s, cfg.tbar, f.omega_eg)?;
    let p = EffectiveParams::from_chi(cfg.chi, 1.0, s.m_drive, s.n_drive)?;
    let charger = ChargerState::product(&left.state, &right)?;
    let joint = charger.joint_populations();

    let mut rep = Report::new(&[
        "experiment",
        "lambda_t",
        "delta_u",
        "p_g",
        "p_e",
        "tbar",
        "chi",
        "charger",
        "n_added",
        "alpha",
        "eta",
        "m_drive",
        "n_drive",
        "cutoff_left",
        "cutoff_right",
    ]);
    let mut peak = (0.0, f64::NEG_INFINITY);
    for lt in grid(s.horizon, s.points) {
        let du = delta_u_joint(&joint, pq, lt, &p);
        if du > peak.1 {
            peak = (lt, du);
        }
        rep.row(vec![
            "single-charge".into(),
            num(lt),
            num(du),
            num(pq.0 - du / 2.0),
            num(pq.1 + du / 2.0),
            num(cfg.tbar),
            num(cfg.chi),
            s.charger.id().into(),
            s.n_added.to_string(),
            opt(left.alpha),
            num(s.eta),
            s.m_drive.to_string(),
            s.n_drive.to_string(),
            cfg.cutoff_left.to_string(),
            cfg.cutoff_right.to_string(),
        ]);
    }
    let best = optimal_collision_tau(&charger, pq, &p);
    if best.delta_u > peak.1 {
        peak = (best.tau, best.delta_u);
    }
    rep.scalar("p_g_initial", num(pq.0));
    rep.scalar("p_e_initial", num(pq.1));
    rep.scalar("raw_energy_sum", num(raw_energy_sum_k(&charger, pq)));
    rep.scalar("mean_left", num(charger.mean_left()));
    rep.scalar("peak_delta_u", num(peak.1));
    rep.scalar("peak_lambda_t", num(peak.0));
    if s.charger == ChargerKind::Fock
        && s.n_added == 1
        && (s.m_drive, s.n_drive) == (0, -1)
        && cfg.chi == 1.0
    {
        rep.scalar("universal_bound", num(2.0 * pq.0));
        rep.check("universal_optimum", (peak.1 - 2.0 * pq.0).abs() < 1e-6);
    }
    Ok(rep)
}

fn reset(cfg: &ExperimentConfig) -> Result<Report> {
    let s = &cfg.reset;
    let f = frequencies(cfg)?;
    let lspec = ThermalSpec::new(cfg.tbar, f.omega_l, cfg.cutoff_left)?;
    let rspec = ThermalSpec::new(cfg.tbar, f.omega_r, cfg.cutoff_right)?;
    let right = charger_state(s.charger, s.n_added, s.alpha, s.eta, &rspec)?;
    let left = partner_state(s.charger, &lspec)?;
    let pq = battery(s, cfg.tbar, f.omega_eg)?;
    let p = EffectiveParams::from_chi(cfg.chi, 1.0, s.m_drive, s.n_drive)?;
    let charger = ChargerState::product(&left, &right.state)?;
    let joint = charger.joint_populations();

    let mut rep = Report::new(&[
        "experiment",
        "lambda_t",
        "p_g",
        "p_e",
        "delta_u",
        "tbar",
        "chi",
        "charger",
        "n_added",
        "alpha",
        "eta",
        "m_drive",
        "n_drive",
        "cutoff_left",
        "cutoff_right",
    ]);
    let mut best = (0.0, f64::NEG_INFINITY);
    for lt in grid(s.horizon, s.points) {
        let du = delta_u_joint(&joint, pq, lt, &p);
        let pg = pq.0 - du / 2.0;
        if pg > best.1 {
            best = (lt, pg);
        }
        rep.row(vec![
            "reset".into(),
            num(lt),
            num(pg),
            num(pq.1 + du / 2.0),
            num(du),
            num(cfg.tbar),
            num(cfg.chi),
            s.charger.id().into(),
            s.n_added.to_string(),
            opt(right.alpha),
            num(s.eta),
            s.m_drive.to_string(),
            s.n_drive.to_string(),
            cfg.cutoff_left.to_string(),
            cfg.cutoff_right.to_string(),
        ]);
    }
    rep.scalar("p_g_initial", num(pq.0));
    rep.scalar("raw_energy_sum", num(raw_energy_sum_k(&charger, pq)));
    rep.scalar("max_p_g", num(best.1));
    rep.scalar("max_p_g_lambda_t", num(best.0));
    if s.charger == ChargerKind::Fock
        && s.n_added == 1
        && (s.m_drive, s.n_drive) == (0, -1)
        && cfg.chi == 1.0
    {
        rep.check("full_reset", best.1 > 1.0 - 1e-6);
    }
    Ok(rep)
}

/// Linear interpolation of the first upward zero crossing of `gap`.
fn first_crossing(xs: &[f64], gap: &[f64]) -> Option<f64> {
    xs.windows(2).zip(gap.windows(2)).find_map(|(x, g)| {
        (g[0] < 0.0 && g[1] >= 0.0).then(|| x[0] + (x[1] - x[0]) * (-g[0]) / (g[1] - g[0]))
    })
}

fn eta_sweep(cfg: &ExperimentConfig) -> Result<Report> {
    let s = &cfg.eta_sweep;
    let f = frequencies(cfg)?;
    let p = EffectiveParams::from_chi(cfg.chi, 1.0, 0, -1)?;
    let mut rep = Report::new(&[
        "experiment",
        "eta",
        "peak_delta_u",
        "dts_peak_delta_u",
        "tbar",
        "chi",
        "alpha",
        "cutoff_left",
        "cutoff_right",
    ]);
    let etas = grid(1.0, s.points);
    for &tbar in &s.tbars {
        let lspec = ThermalSpec::new(tbar, f.omega_l, cfg.cutoff_left)?;
        let rspec = ThermalSpec::new(tbar, f.omega_r, cfg.cutoff_right)?;
        let right = gibbs_oscillator(&rspec);
        let q = qubit_thermal(tbar, f.omega_eg)?.populations();
        let pq = (q[0], q[1]);
        let alpha = alpha_opt(1, &lspec);
        let reference = ChargerState::product(
            &dts(c(alpha), &lspec).context("displaced thermal state")?,
            &right,
        )?;
        let dts_peak = optimal_collision_tau(&reference, pq, &p).delta_u;
        let mut gap = Vec::with_capacity(etas.len());
        for &eta in &etas {
            let ch = ChargerState::product(&inefficient_spats(eta, &lspec)?, &right)?;
            let peak = optimal_collision_tau(&ch, pq, &p).delta_u;
            gap.push(peak - dts_peak);
            rep.row(vec![
                "eta-sweep".into(),
                num(eta),
                num(peak),
                num(dts_peak),
                num(tbar),
                num(cfg.chi),
                num(alpha),
                cfg.cutoff_left.to_string(),
                cfg.cutoff_right.to_string(),
            ]);
        }
        let crossing = first_crossing(&etas, &gap);
        rep.scalar(format!("dts_peak_delta_u.tbar_{tbar}"), num(dts_peak));
        rep.scalar(
            format!("spats_peak_delta_u.tbar_{tbar}"),
            num(gap[gap.len() - 1] + dts_peak),
        );
        rep.scalar(format!("crossing_eta.tbar_{tbar}"), opt(crossing));
        rep.check(
            format!("crossing_near_half.tbar_{tbar}"),
            crossing.is_some_and(|e| (e - 0.5).abs() <= 0.02),
        );
    }
    Ok(rep)
}

fn dissipation(cfg: &ExperimentConfig) -> Result<Report> {
    let d = &cfg.dissipation;
    let spec = SystemSpec::dispersive(cfg.chi, cfg.dispersive_ratio, d.cutoff, d.cutoff)?;
    let lam = spec.lambda_eff();
    let lspec = ThermalSpec::new(cfg.tbar, spec.omega_l(), d.cutoff)?;
    let rspec = ThermalSpec::new(cfg.tbar, spec.omega_r(), d.cutoff)?;
    let q = qutrit_thermal(cfg.tbar, spec.omega_g, spec.omega_e, spec.omega_i)?;
    let lts = grid(d.horizon, d.points);
    let ts: Vec<f64> = lts.iter().map(|lt| lt / lam).collect();
    let opts = IntegratorOptions::default();

    let mut rep = Report::new(&[
        "experiment",
        "protocol",
        "gamma0_over_lambda",
        "lambda_t",
        "u_q",
        "p_g",
        "p_e",
        "p_i",
        "n_l",
        "n_r",
        "tbar",
        "chi",
        "dispersive_ratio",
        "charger",
        "cutoff",
    ]);
    let mut charge_peaks = Vec::new();
    let mut charge_pe = Vec::new();
    let mut reset_peaks = Vec::new();
    for protocol in ["charge", "reset"] {
        let rho0 = if protocol == "charge" {
            let l = charger_state(d.charger, 1, None, 1.0, &lspec)?.state;
            l.tensor(&q)?.tensor(&partner_state(d.charger, &rspec)?)?
        } else {
            let r = charger_state(d.charger, 1, None, 1.0, &rspec)?.state;
            partner_state(d.charger, &lspec)?.tensor(&q)?.tensor(&r)?
        };
        for &g in &d.gammas {
            let diss =
                DissipationSpec::in_lambda_units(g, &spec, cfg.tbar)?.with_eg_channel(d.include_eg);
            let reports = integrate_observed(&rho0, &ts, &spec, &diss, &opts, |_, rho| {
                EnergyReport::new(rho, spec.space())
            })
            .with_context(|| format!("{protocol} run at gamma0 = {g} lambda"))?;
            for (lt, r) in lts.iter().zip(&reports) {
                rep.row(vec![
                    "dissipation".into(),
                    protocol.into(),
                    num(g),
                    num(*lt),
                    num(r.u_q),
                    num(r.p_g),
                    num(r.p_e),
                    num(r.p_i),
                    num(r.n_l),
                    num(r.n_r),
                    num(cfg.tbar),
                    num(cfg.chi),
                    num(cfg.dispersive_ratio),
                    d.charger.id().into(),
                    d.cutoff.to_string(),
                ]);
            }
            if protocol == "charge" {
                let peak = reports
                    .iter()
                    .map(|r| r.p_e)
                    .fold(f64::NEG_INFINITY, f64::max);
                let u = reports
                    .iter()
                    .map(|r| r.u_q)
                    .fold(f64::NEG_INFINITY, f64::max);
                rep.scalar(format!("peak_u_q.charge.gamma_{g}"), num(u));
                rep.scalar(format!("peak_p_e.charge.gamma_{g}"), num(peak));
                charge_peaks.push(u);
                charge_pe.push(peak);
            } else {
                let peak = reports
                    .iter()
                    .map(|r| r.p_g)
                    .fold(f64::NEG_INFINITY, f64::max);
                rep.scalar(format!("peak_p_g.reset.gamma_{g}"), num(peak));
                reset_peaks.push(peak);
            }
        }
    }
    for ((g, pe), pg) in d.gammas.iter().zip(&charge_pe).zip(&reset_peaks) {
        if *g > 0.0 {
            rep.check(format!("reset_exceeds_charge.gamma_{g}"), pg > pe);
        }
    }
    if d.gammas.windows(2).all(|w| w[0] < w[1]) && d.gammas.len() > 1 {
        rep.check(
            "charge_peak_decreases_with_gamma",
            charge_peaks.windows(2).all(|w| w[0] > w[1]),
        );
    }
    Ok(rep)
}

fn collisions(cfg: &ExperimentConfig) -> Result<Report> {
    let s = &cfg.collisions;
    let f = frequencies(cfg)?;
    let lspec = ThermalSpec::new(cfg.tbar, f.omega_l, cfg.cutoff_left)?;
    let rspec = ThermalSpec::new(cfg.tbar, f.omega_r, cfg.cutoff_right)?;
    let left = charger_state(s.charger, s.n_added, s.alpha, 1.0, &lspec)?;
    let right = partner_state(s.charger, &rspec)?;
    let qubit = qubit_thermal(cfg.tbar, f.omega_eg)?;
    let p = EffectiveParams::from_chi(cfg.chi, 1.0, 0, -1)?;
    let charger = ChargerState::product(&left.state, &right)?;
    let chain = run_chain(s.k, &charger, &qubit, &p)?;

    let mut rep = Report::new(&[
        "experiment",
        "k",
        "m_drive",
        "n_drive",
        "lambda_tau",
        "p_g",
        "p_e",
        "delta_u",
        "accumulated",
        "raw_energy_sum",
        "mutual_info",
        "tbar",
        "chi",
        "charger",
        "alpha",
        "cutoff_left",
        "cutoff_right",
    ]);
    let mut acc = 0.0;
    for r in &chain.records {
        acc += r.delta_u;
        rep.row(vec![
            "collisions".into(),
            r.k.to_string(),
            r.m_drive.to_string(),
            r.n_drive.to_string(),
            num(r.tau),
            num(r.p_g),
            num(r.p_e),
            num(r.delta_u),
            num(acc),
            num(r.raw_energy_sum),
            num(r.mutual_info),
            num(cfg.tbar),
            num(cfg.chi),
            s.charger.id().into(),
            opt(left.alpha),
            cfg.cutoff_left.to_string(),
            cfg.cutoff_right.to_string(),
        ]);
    }
    let q = qubit.populations();
    let spats_ref = ChargerState::product(&spats(&lspec)?, &gibbs_oscillator(&rspec))?;
    let spats_shot = optimal_collision_tau(&spats_ref, (q[0], q[1]), &p).delta_u;
    let recs = &chain.records;
    rep.scalar("collisions_run", recs.len());
    rep.scalar(
        "drained_at",
        chain.drained_at.map(|k| k.to_string()).unwrap_or_default(),
    );
    rep.scalar("accumulated_delta_u", num(chain.accumulated_energy()));
    rep.scalar("spats_single_shot_delta_u", num(spats_shot));
    rep.scalar(
        "final_raw_energy_sum",
        num(raw_energy_sum_k(&chain.final_charger, (q[0], q[1]))),
    );
    if let (Some(first), Some(last)) = (recs.first(), recs.last()) {
        rep.scalar("initial_raw_energy_sum", num(first.raw_energy_sum));
        rep.scalar("final_mutual_info", num(last.mutual_info));
        rep.check(
            "only_first_inverted",
            first.p_e > 0.5 && recs[1..].iter().all(|r| r.p_e < 0.5),
        );
        rep.check(
            "raw_energy_drained",
            last.raw_energy_sum.abs() < 0.01 * first.raw_energy_sum.abs(),
        );
        rep.check(
            "mutual_info_positive",
            recs.iter().all(|r| r.mutual_info > 0.0),
        );
    }
    if s.charger == ChargerKind::Dts {
        rep.check(
            "accumulated_exceeds_spats",
            chain.accumulated_energy() > spats_shot,
        );
    }
    rep.scalar("tail_left", num(chain.tail.left));
    rep.scalar("tail_right", num(chain.tail.right));
    rep.audit("truncation_audit", chain.tail.passed());
    Ok(rep)
}

fn validate_dispersive(cfg: &ExperimentConfig) -> Result<Report> {
    let d = &cfg.validate_dispersive;
    let mut rep = Report::new(&[
        "experiment",
        "dispersive_ratio",
        "max_dev_p_g",
        "max_dev_p_e",
        "max_dev_n_l",
        "max_dev_n_r",
        "max_population_deviation",
        "max_p_i",
        "chi",
        "lambda_period",
        "cutoff",
    ]);
    let mut residuals = Vec::new();
    for &ratio in &d.ratios {
        let spec = SystemSpec::dispersive(cfg.chi, ratio, d.cutoff, d.cutoff)?;
        let space = spec.space();
        let k = space
            .index(ProductIndex::new(1, Level::Ground, 0))
            .context("|1,g,0> outside the truncation")?;
        let rho0 = DensityMatrix::basis(space.dim(), k)?;
        let lam = spec.lambda_eff();
        let period = 2.0 * PI / doublet_rabi(1, 0, &spec.effective_params()?);
        let ts = grid(period, d.points);
        let r = dispersive_residual(&spec, &rho0, &ts)?;
        residuals.push((ratio, r.max_population_deviation(), r.max_p_i));
        rep.row(vec![
            "validate-dispersive".into(),
            num(ratio),
            num(r.max_dev_p_g),
            num(r.max_dev_p_e),
            num(r.max_dev_n_l),
            num(r.max_dev_n_r),
            num(r.max_population_deviation()),
            num(r.max_p_i),
            num(cfg.chi),
            num(period * lam),
            d.cutoff.to_string(),
        ]);
    }
    let mut sorted = residuals.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    rep.check(
        "residual_decreases_with_ratio",
        sorted.windows(2).all(|w| w[0].1 > w[1].1),
    );
    for (ratio, dev, pi) in residuals {
        if ratio >= 50.0 {
            rep.check(format!("agreement.ratio_{ratio}"), dev < 0.05 && pi < 0.01);
        }
    }
    Ok(rep)
}
