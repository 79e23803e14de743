use std::f64::consts::PI;

use anyhow::Result;
use crossmode_core::effective::{
    evolve_effective, raw_energy_matrix, raw_energy_total, EffectiveParams,
};
use crossmode_core::fulldyn::{free_gibbs_state, SystemSpec};
use crossmode_core::hilbert::{c, partial_trace, CMatrix, DensityMatrix};
use crossmode_core::lindblad::{lindblad_rhs, DissipationSpec};
use crossmode_core::observables::{mean_number, purity, qubit_energy};
use crossmode_core::states::{
    alpha_opt, dts, fock, gibbs_oscillator, npats, qubit_with_ground, PhotonAddition, ThermalSpec,
};
use crossmode_core::ProductSpace;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::AppendixSection;
use crate::report::{num, Report};

struct Row {
    name: String,
    value: f64,
    reference: f64,
    tol: f64,
}

fn random_distribution(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>().powi(2)).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

fn random_state(rng: &mut ChaCha8Rng, dim: usize) -> Result<DensityMatrix> {
    let a = CMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let rho = &a * a.adjoint();
    let tr = rho.trace();
    Ok(DensityMatrix::new(rho / tr)?)
}

fn rows(tbar: f64, seed: u64, s: &AppendixSection) -> Result<Vec<Row>> {
    let mut out = Vec::new();
    let spec = ThermalSpec::new(tbar, 1.0, 60)?;
    for n in 1..=3 {
        let closed = PhotonAddition::new(n, &spec);
        let summed = PhotonAddition::partition_by_summation(n, &spec, 1e-12);
        out.push(Row {
            name: format!("partition_n{n}"),
            value: summed / closed.zn,
            reference: 1.0,
            tol: 1e-10,
        });
        out.push(Row {
            name: format!("npats_mean_n{n}"),
            value: mean_number(&npats(n, &spec)?),
            reference: closed.mean_number(),
            tol: 1e-6,
        });
    }
    let alpha = alpha_opt(1, &spec);
    let thermal = gibbs_oscillator(&spec);
    let displaced = dts(c(alpha), &spec)?;
    out.push(Row {
        name: "dts_mean".into(),
        value: mean_number(&displaced),
        reference: mean_number(&thermal) + alpha * alpha,
        tol: 1e-6,
    });
    out.push(Row {
        name: "dts_purity".into(),
        value: purity(&displaced),
        reference: purity(&thermal),
        tol: 1e-8,
    });

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..s.profiles {
        let (nl, nr) = (rng.gen_range(2..16), rng.gen_range(2..16));
        let pl = random_distribution(&mut rng, nl);
        let pr = random_distribution(&mut rng, nr);
        let q = random_distribution(&mut rng, 2);
        let sum = raw_energy_matrix(&pl, (q[0], q[1]), &pr)?.sum();
        worst = worst.max((sum - raw_energy_total(pl[0], (q[0], q[1]), pr[0])).abs());
    }
    out.push(Row {
        name: "raw_energy_identity".into(),
        value: worst,
        reference: 0.0,
        tol: 1e-12,
    });

    let space = ProductSpace::new(4, 2, 4)?;
    let (mut trace_dev, mut purity_dev): (f64, f64) = (0.0, 0.0);
    for j in 0..s.states {
        let chi = [0.1, 1.0, 10.0][j % 3];
        let p = EffectiveParams::from_chi(chi, 1.0, (j % 4) as i64, (j % 3) as i64 - 1)?;
        let rho = random_state(&mut rng, space.dim())?;
        let out = evolve_effective(&rho, space, rng.gen_range(0.0..20.0), &p)?;
        trace_dev = trace_dev.max((out.trace() - 1.0).abs());
        purity_dev = purity_dev.max((purity(&out) - purity(&rho)).abs());
    }
    out.push(Row {
        name: "effective_trace".into(),
        value: trace_dev,
        reference: 0.0,
        tol: 1e-10,
    });
    out.push(Row {
        name: "effective_purity".into(),
        value: purity_dev,
        reference: 0.0,
        tol: 1e-10,
    });

    let p = EffectiveParams::from_chi(1.0, 1.0, 0, -1)?;
    let q = qubit_with_ground(0.8)?;
    let rho = fock(1, 3)?.tensor(&q)?.tensor(&fock(0, 3)?)?;
    let space = ProductSpace::new(3, 2, 3)?;
    let after = evolve_effective(&rho, space, PI / 2.0, &p)?;
    let du = qubit_energy(&partial_trace(&after, &[1], &space.dims())?) - qubit_energy(&q);
    out.push(Row {
        name: "universal_charge".into(),
        value: du,
        reference: 1.6,
        tol: 1e-9,
    });

    let free = SystemSpec::dispersive(1.0, 50.0, 8, 8)?.with_couplings(0.0, 0.0);
    let gibbs = free_gibbs_state(&free, 0.3)?;
    let rhs = lindblad_rhs(&gibbs, &free, &DissipationSpec::new(1e-3, 0.3)?)?;
    let stationary = rhs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    out.push(Row {
        name: "gibbs_stationary".into(),
        value: stationary,
        reference: 0.0,
        tol: 1e-8,
    });
    Ok(out)
}

/// Appendix identities and evolution invariants as a report whose checks are
/// all fatal.
pub fn appendix(tbar: f64, seed: u64, s: &AppendixSection) -> Result<Report> {
    let mut rep = Report::new(&[
        "experiment",
        "check",
        "value",
        "reference",
        "abs_error",
        "tolerance",
        "pass",
        "tbar",
        "seed",
    ]);
    for r in rows(tbar, seed, s)? {
        let err = (r.value - r.reference).abs();
        let pass = err <= r.tol;
        rep.row(vec![
            "appendix-checks".into(),
            r.name.clone(),
            num(r.value),
            num(r.reference),
            num(err),
            num(r.tol),
            pass.to_string(),
            num(tbar),
            seed.to_string(),
        ]);
        rep.audit(r.name, pass);
    }
    Ok(rep)
}
